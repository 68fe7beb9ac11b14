from .scenarios import SAMPLE_SCENARIOS, write_sample_scenarios

__all__ = ["SAMPLE_SCENARIOS", "write_sample_scenarios"]
