"""Residual CNN+GRU networks for flow-based network intrusion detection."""

__version__ = "0.1.0"

from .data import (
    EncodedDataset,
    EncoderModel,
    FoldPlan,
    apply_encoder,
    batch_iter,
    fit_encoder,
    make_folds,
    parse_csv,
    stratified_subsample,
)
from .estimator import FlowEncoder, NetClassifier
from .layers import Mode
from .metrics import ConfusionCounts, MetricsReport, compute_metrics, confusion
from .network import (
    NAMED_ARCHS,
    BlockSpec,
    Network,
    NetworkConfig,
    build_block,
    build_named,
    build_network,
)
from .tensor import Parameter, as_tensor
from .training import (
    TrainConfig,
    TrainHistory,
    evaluate,
    gradient_norm_probe,
    rmsprop_step,
    train,
)

__all__ = [
    "__version__",
    "EncodedDataset", "EncoderModel", "FoldPlan", "apply_encoder",
    "batch_iter", "fit_encoder", "make_folds", "parse_csv",
    "stratified_subsample",
    "FlowEncoder", "NetClassifier",
    "Mode",
    "ConfusionCounts", "MetricsReport", "compute_metrics", "confusion",
    "NAMED_ARCHS", "BlockSpec", "Network", "NetworkConfig", "build_block",
    "build_named", "build_network",
    "Parameter", "as_tensor",
    "TrainConfig", "TrainHistory", "evaluate", "gradient_norm_probe",
    "rmsprop_step", "train",
]
