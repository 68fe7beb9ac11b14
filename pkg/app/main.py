"""
Command-line entry point.
Zakai Filter Engine: simulate, filter, diagnose and compare.
"""

import logging
import sys

import click

from app.commands import compare_command, diagnose_command, filter_command, scenarios_command, simulate
from app.config import settings

# Configure logging; stderr keeps stdout free for command output
logging.basicConfig(
    level=logging.DEBUG if settings.DEBUG else settings.LOG_LEVEL,
    format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
    handlers=[
        logging.StreamHandler(sys.stderr),
    ],
)

# Set specific loggers
logging.getLogger("joblib").setLevel(logging.WARNING)

logger = logging.getLogger(__name__)


@click.group(help=f"{settings.APP_NAME} {settings.APP_VERSION}")
@click.version_option(settings.APP_VERSION, prog_name=settings.APP_NAME)
def cli() -> None:
    pass


cli.add_command(simulate)
cli.add_command(filter_command)
cli.add_command(diagnose_command)
cli.add_command(compare_command)
cli.add_command(scenarios_command)
