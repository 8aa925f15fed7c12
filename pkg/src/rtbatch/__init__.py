"""Deadline-aware batching scheduler for periodic inference requests."""

from .admission import AdmissionResult, admit, capture_state, edf_imitator, phase1, phase2
from .adaptation import Adaptation, AdaptAction
from .core import BatchKey, Category, Frame, JobInstance, LatencyRecord, Request, Shape
from .disbatcher import DisBatcher, window_length
from .profile import ExecutionProfile, load_profile, reference_profile, save_profile, synth_profile
from .system import LiveSystem
from .worker import ExecutionQueue, Worker

__version__ = "0.1.0"

__all__ = [
    "AdaptAction", "Adaptation", "AdmissionResult", "BatchKey", "Category", "DisBatcher",
    "ExecutionProfile", "ExecutionQueue", "Frame", "JobInstance", "LatencyRecord",
    "LiveSystem", "Request", "Shape", "Worker", "admit", "capture_state", "edf_imitator",
    "load_profile", "phase1", "phase2", "reference_profile", "save_profile", "synth_profile",
    "window_length",
]
