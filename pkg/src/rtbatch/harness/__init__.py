"""Experiment apparatus: traces, execution models, simulation and metrics."""

from .baselines import aimd_step, batch_delay_dispatch, batch_policy_dispatch
from .engine import (AIMD, SEDF, Batch, BatchDelay, DeepRT, SimOptions, admitted_ids,
                     policy_from_name, prediction_mismatches, run_simulation)
from .execmodel import exact_model, inject_overruns, jitter_model
from .metrics import Metrics, compute_metrics, write_outputs
from .trace import TraceConfig, desktop_config, gen_trace, load_trace, save_trace

__all__ = [
    "AIMD", "SEDF", "Batch", "BatchDelay", "DeepRT", "Metrics", "SimOptions", "TraceConfig",
    "admitted_ids", "aimd_step", "batch_delay_dispatch", "batch_policy_dispatch",
    "compute_metrics", "desktop_config", "exact_model", "gen_trace", "inject_overruns",
    "jitter_model", "load_trace", "policy_from_name", "prediction_mismatches",
    "run_simulation", "save_trace", "write_outputs",
]
