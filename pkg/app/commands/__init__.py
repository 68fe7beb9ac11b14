from .simulate import simulate
from .filter import filter_command
from .diagnose import diagnose_command
from .compare import compare_command
from .scenarios import scenarios_command

__all__ = ["simulate", "filter_command", "diagnose_command", "compare_command", "scenarios_command"]
