"""
Built-in scenario files.
Covers the linear-Gaussian benchmark, the uninformative heat limit and the
Lipschitz families used by the acceptance studies.
"""

import logging
from pathlib import Path

from app.services.scenario import dump_scenario, parse_scenario

logger = logging.getLogger(__name__)

# d = 1 signal, one observation channel, independent noises on w_1 / w_2
_ONE_DIM = {"d": 1, "d1": 2, "d2": 2, "Theta": {"family": "constant", "value": [[0.0, 1.0]]}}


SAMPLE_SCENARIOS = {
    "kalman_benchmark": {
        "system": {
            "name": "kalman_benchmark",
            **_ONE_DIM,
            "b": {"family": "linear", "slope": [[-1.0, 0.0]]},
            "theta": {"family": "constant", "value": [[1.0, 0.0]]},
            "B": {"family": "linear", "slope": [[1.0, 0.0]]},
            "K": 2.0,
            "bound": 10.0,
            "delta": 0.25,
            "T": 1.0,
            "pi0": {"kind": "gaussian", "mean": [0.0], "cov": [[1.0]]},
        },
        "grid": {"R": 6.0, "h": 0.02},
        "time": {"dt": 0.001},
        "run": {"seeds": [1], "snapshot_every": 100},
        "oracle": {"particles": 10000, "kalman": True, "initial_shift": 0.25},
        "output": "out/kalman_benchmark",
    },
    # B = 0: the filter is the heat flow of pi_0, N(0, 0.25 + 2t) at time t
    "heat": {
        "system": {
            "name": "heat",
            **_ONE_DIM,
            "b": {"family": "linear", "slope": [[0.0, 0.0]]},
            "theta": {"family": "constant", "value": [[1.4142135623730951, 0.0]]},
            "B": {"family": "linear", "slope": [[0.0, 0.0]]},
            "K": 2.0,
            "delta": 0.25,
            "T": 0.5,
            "pi0": {"kind": "gaussian", "mean": [0.0], "cov": [[0.25]]},
        },
        "grid": {"R": 6.0, "h": 0.02},
        "time": {"dt": 0.001},
        "run": {"seeds": [1], "snapshot_every": 100},
        "oracle": {"particles": 10000, "kalman": True},
        "output": "out/heat",
    },
    # Lipschitz sinusoidal coefficients with a cross term (sigma != 0)
    "sinusoidal": {
        "system": {
            "name": "sinusoidal",
            **_ONE_DIM,
            "b": {"family": "sinusoidal", "value": [0.0], "amplitude": [-1.0], "wavenumber": [1.0, 0.0]},
            "theta": {
                "family": "sinusoidal",
                "value": [[1.0, 0.5]],
                "amplitude": [[0.2, 0.1]],
                "wavenumber": [1.0, 0.0],
            },
            "B": {"family": "sinusoidal", "value": [0.0], "amplitude": [2.0], "wavenumber": [0.5, 0.0]},
            "K": 2.0,
            "delta": 0.2,
            "T": 1.0,
            "pi0": {"kind": "gaussian", "mean": [0.5], "cov": [[0.5]]},
        },
        "grid": {"R": 6.0, "h": 0.02},
        "time": {"dt": 0.001},
        "run": {"seeds": [1], "snapshot_every": 100},
        "oracle": {"particles": 100000, "kalman": False},
        "output": "out/sinusoidal",
    },
    # theta Lipschitz but not C^1 at x = 0
    "kink": {
        "system": {
            "name": "kink",
            **_ONE_DIM,
            "b": {"family": "linear", "slope": [[-1.0, 0.0]]},
            "theta": {
                "family": "kink",
                "value": [[1.0, 0.0]],
                "wavenumber": [1.0, 0.0],
                "base": 0.8,
                "slope": 0.5,
                "cap": 1.8,
            },
            "B": {"family": "linear", "slope": [[1.0, 0.0]]},
            "K": 2.0,
            "delta": 0.25,
            "T": 1.0,
            "pi0": {"kind": "gaussian", "mean": [0.0], "cov": [[1.0]]},
        },
        "grid": {"R": 6.0, "h": 0.02},
        "time": {"dt": 0.001},
        "run": {"seeds": [1], "snapshot_every": 100},
        "oracle": {"particles": 10000, "kalman": False},
        "output": "out/kink",
    },
    # compactly supported Lipschitz pi_0 for regularity estimates
    "holder_tent": {
        "system": {
            "name": "holder_tent",
            **_ONE_DIM,
            "b": {"family": "linear", "slope": [[-1.0, 0.0]]},
            "theta": {"family": "constant", "value": [[1.0, 0.0]]},
            "B": {"family": "linear", "slope": [[1.0, 0.0]]},
            "K": 2.0,
            "delta": 0.25,
            "T": 1.0,
            "pi0": {"kind": "tent", "center": [0.0], "width": [1.0]},
        },
        "grid": {"R": 4.0, "h": 0.02},
        "time": {"dt": 0.001},
        "run": {"seeds": [1], "snapshot_every": 100},
        "oracle": {"particles": 10000, "kalman": False},
        "output": "out/holder_tent",
    },
}


def write_sample_scenarios(out_dir: Path, names: list[str] | None = None) -> list[Path]:
    """
    Write built-in scenarios as YAML files.

    Args:
        out_dir: target directory (created if needed)
        names: subset of SAMPLE_SCENARIOS keys; all when omitted

    Returns:
        Paths of the written files
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names or list(SAMPLE_SCENARIOS):
        if name not in SAMPLE_SCENARIOS:
            raise KeyError(f"Unknown scenario {name!r}; known: {', '.join(SAMPLE_SCENARIOS)}")
        config = parse_scenario(SAMPLE_SCENARIOS[name])
        file = out_dir / f"{name}.yaml"
        file.write_text(dump_scenario(config), encoding="utf-8")
        written.append(file)
    logger.info(f"[CLI] Wrote {len(written)} scenarios to {out_dir}")
    return written
