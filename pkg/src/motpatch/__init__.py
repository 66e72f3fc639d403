"""Desk-scale simulator and scoring toolkit for patch attacks on
tracking-by-detection multi-object trackers."""

from .attack import AttackConfig, AttackLedger, inject
from .geometry import BBox, FrameDims, iou
from .io import MotRecord, load_mot, load_patch, save_mot, save_patch
from .metrics import MetricsReport, MotScores, build_report, score
from .scenario import ObjectSpec, ScenarioSpec, generate, preset
from .tracker import Detection, Tracker, TrackerConfig, run_sequence

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackLedger",
    "BBox",
    "Detection",
    "FrameDims",
    "MetricsReport",
    "MotRecord",
    "MotScores",
    "ObjectSpec",
    "ScenarioSpec",
    "Tracker",
    "TrackerConfig",
    "build_report",
    "generate",
    "inject",
    "iou",
    "load_mot",
    "load_patch",
    "preset",
    "save_mot",
    "save_patch",
    "score",
    "run_sequence",
]
