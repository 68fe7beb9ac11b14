"""
`scenarios`: write the built-in scenario files.
"""

from pathlib import Path

import click

from app.commands.common import EXIT_CONFIG
from app.seed import SAMPLE_SCENARIOS, write_sample_scenarios


@click.command("scenarios")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("scenarios"),
    show_default=True,
    help="Directory for the YAML files.",
)
@click.argument("names", nargs=-1)
def scenarios_command(out: Path, names: tuple[str, ...]) -> None:
    """Write built-in scenarios (all, or the NAMES given)."""
    unknown = [name for name in names if name not in SAMPLE_SCENARIOS]
    if unknown:
        click.echo(f"Unknown scenarios {unknown}; known: {', '.join(SAMPLE_SCENARIOS)}", err=True)
        raise click.exceptions.Exit(EXIT_CONFIG)
    for file in write_sample_scenarios(out, list(names) or None):
        click.echo(str(file))
