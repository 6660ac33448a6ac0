"""Multi-label text classification with label-mask cloze templates.

Documents are prefixed with one bracketed state slot per label; a small
transformer encoder trained from scratch fills the slots, and sigmoid
reads at the slot positions yield per-label probabilities.  The package
covers synthetic data generation, training (with optional masked-token
pretraining), evaluation, and label-correlation/attention analysis, all
reproducible from a single seed.

The quickest entry points are :class:`LabelMaskTextClassifier` for the
sklearn-style API and the ``lmmtc`` command-line tool.
"""

from .data import Example, GenSpec, benchmark_spec, generate_synthetic
from .errors import (
    CapacityError,
    CheckpointFormatError,
    ConfigError,
    ContractError,
    DimensionError,
    JsonlParseError,
    LabelRangeError,
    LmmtcError,
    TrainingDivergedError,
    VocabularyError,
)
from .estimator import LabelMaskTextClassifier
from .inference import (
    Prediction,
    predict,
    predict_batch,
    predict_proba,
    predict_proba_batch,
    threshold_proba,
)
from .metrics import (
    MetricsReport,
    accuracy,
    full_report,
    hamming_loss,
    micro_f1,
    micro_jaccard,
)
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, pretrain_mlm, train
from .vocab import LabelSpace, Vocabulary, build_base_vocab, extend_with_label_tokens

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CheckpointFormatError",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Example",
    "GenSpec",
    "JsonlParseError",
    "LabelMaskTextClassifier",
    "LabelRangeError",
    "LabelSpace",
    "LmmtcError",
    "MetricsReport",
    "ModelConfig",
    "Prediction",
    "TrainConfig",
    "TrainingDivergedError",
    "Vocabulary",
    "VocabularyError",
    "accuracy",
    "benchmark_spec",
    "build_base_vocab",
    "extend_with_label_tokens",
    "full_report",
    "generate_synthetic",
    "hamming_loss",
    "load_checkpoint",
    "micro_f1",
    "micro_jaccard",
    "predict",
    "predict_batch",
    "predict_proba",
    "predict_proba_batch",
    "pretrain_mlm",
    "save_checkpoint",
    "threshold_proba",
    "train",
    "__version__",
]
