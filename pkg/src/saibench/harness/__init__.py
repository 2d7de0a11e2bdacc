"""Sweep plans, predictor plumbing, sweep execution, tracing and rendering."""

from .plan import PlanValidationError, SweepPlan, load_plan, plan_from_dict, validate_plan
from .protocol import PredictorError, PredictorTimeout, ProtocolError, run_external_predictor
from .render import RENDER_KINDS, RenderError, render_report, write_rendering
from .runner import CellRecord, SweepResult, build_cells, evaluate_metric, run_plan
from .trace import EmptyJoinError, TraceResult, merge_reports, trace_errors

__all__ = [name for name in dir() if not name.startswith("_")]
