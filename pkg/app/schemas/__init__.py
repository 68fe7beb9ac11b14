from .reports import AssumptionReport, ComparisonReport, DiagnosticsReport
from .scenario import ScenarioConfig

__all__ = ["AssumptionReport", "ComparisonReport", "DiagnosticsReport", "ScenarioConfig"]
