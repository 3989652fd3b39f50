"""Variational encoding and recovery circuits for small quantum memories."""

__version__ = "0.1.0"

from . import baselines, channels, circuits, fidelity, optimize, qmath, twodesign  # noqa: E402
from .channels import KrausChannel, NoiseSpec  # noqa: E402
from .circuits import ParamCircuit, build_ansatz_a, build_ansatz_b  # noqa: E402
from .fidelity import SchemeLayout, average_code_fidelity, repeated_recovery_fidelity  # noqa: E402
from .optimize import OptimizerConfig, TrainingResult, train_qvector  # noqa: E402

__all__ = [
    "KrausChannel",
    "NoiseSpec",
    "OptimizerConfig",
    "ParamCircuit",
    "SchemeLayout",
    "TrainingResult",
    "average_code_fidelity",
    "baselines",
    "build_ansatz_a",
    "build_ansatz_b",
    "channels",
    "circuits",
    "fidelity",
    "optimize",
    "qmath",
    "repeated_recovery_fidelity",
    "train_qvector",
    "twodesign",
]
