"""
Simulated sample path of the signal/observation system.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PathSample:
    """
    One realization of (w_t, z_t) on a uniform mesh.

    Attributes:
        dt: time step
        times: mesh points 0, dt, ..., T
        w: Wiener increments, shape (steps, d2)
        z: states, shape (steps + 1, d1); x block first, then y block
        d: signal dimension (splits z into x and y)
        seed: seed the path was generated from
    """

    dt: float
    times: np.ndarray
    w: np.ndarray
    z: np.ndarray
    d: int
    seed: int

    @property
    def steps(self) -> int:
        return self.w.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.z[:, : self.d]

    @property
    def y(self) -> np.ndarray:
        return self.z[:, self.d:]

    @property
    def dy(self) -> np.ndarray:
        return np.diff(self.y, axis=0)
