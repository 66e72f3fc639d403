"""Adversarial patch training: losses, EOT augmentation, scene rendering,
the surrogate detector, and the optimization loop."""

from .eot import EOTParams
from .losses import LossWeights, loss_ap, loss_bbr, loss_total, loss_tv
from .optimize import LossTerms, OptimizeResult, eval_loss, optimize_patch
from .scene import Scene, SceneTarget, build_clip_dataset, render, scenes_from_gt
from .surrogate import DetectorConfig, detect

__all__ = [
    "DetectorConfig",
    "EOTParams",
    "LossTerms",
    "LossWeights",
    "OptimizeResult",
    "Scene",
    "SceneTarget",
    "build_clip_dataset",
    "detect",
    "eval_loss",
    "loss_ap",
    "loss_bbr",
    "loss_total",
    "loss_tv",
    "optimize_patch",
    "render",
    "scenes_from_gt",
]
