"""Controllable cross-modal alignment experiments on synthetic multimodal
data, with representation-similarity metrics and discrete PID analysis."""

__version__ = "0.1.0"

from .losses import LossBreakdown, info_nce, symmetric_align, total_loss
from .pid import JointPmf, PidResult, broja_decompose, brute_force_oracle, empirical_pmf, mutual_information
from .simmetrics import AlignmentReport, alignment_report, cka, hsic_linear, mutual_knn, svcca
from .syndata import GenSpec, SyntheticDataset, generate
from .trainer import RunRecord, TrainConfig, evaluate, gradient_check, sweep, train

__all__ = [
    "AlignmentReport",
    "GenSpec",
    "JointPmf",
    "LossBreakdown",
    "PidResult",
    "RunRecord",
    "SyntheticDataset",
    "TrainConfig",
    "alignment_report",
    "broja_decompose",
    "brute_force_oracle",
    "cka",
    "empirical_pmf",
    "evaluate",
    "generate",
    "gradient_check",
    "hsic_linear",
    "info_nce",
    "mutual_information",
    "mutual_knn",
    "svcca",
    "sweep",
    "symmetric_align",
    "total_loss",
    "train",
]
