"""Scikit-learn style front end for the label-cloze classifier.

Wraps vocabulary building, template encoding, and the joint training
loop behind fit/predict so the model drops into sklearn pipelines and
model-selection utilities.  X is a sequence of raw text strings; y is a
binary indicator matrix of shape [n_samples, n_labels].
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .data import Example
from .errors import ContractError
from .inference import predict_proba_batch, threshold_proba
from .metrics import accuracy
from .model import ModelConfig
from .trainer import TrainConfig, train
from .vocab import LabelSpace, build_base_vocab, extend_with_label_tokens


def _check_texts(X) -> list:
    texts = list(X)
    if not texts:
        raise ContractError("X must contain at least one document")
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise ContractError(f"X[{i}] is {type(t).__name__}, expected str")
    return texts


def _check_indicator(y, n_rows: int) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 2:
        raise ContractError(f"y must be 2-d [n_samples, n_labels], got {arr.shape}")
    if arr.shape[0] != n_rows:
        raise ContractError(f"X has {n_rows} rows but y has {arr.shape[0]}")
    if not np.isin(arr, (0, 1)).all():
        raise ContractError("y must be a 0/1 indicator matrix")
    return arr.astype(np.int64)


class LabelMaskTextClassifier(ClassifierMixin, BaseEstimator):
    """Multi-label text classifier trained through label-state cloze slots.

    Each document is prefixed with one [LS]/[state]/[LE] triple per label;
    training jointly optimizes BCE on the label slots and masked-token
    cross-entropy, and prediction masks every slot and reads sigmoid
    probabilities at the state positions.

    Parameters mirror the model and training configs; ``label_names``
    fixes the label order (defaults to label_00, label_01, ...).
    """

    def __init__(
        self,
        strategy: str = "diff",
        d_model: int = 64,
        n_heads: int = 4,
        n_layers: int = 4,
        d_ffn: int = 256,
        max_len: int = 128,
        dropout: float = 0.1,
        learning_rate: float = 5e-5,
        batch_size: int = 16,
        epochs: int = 40,
        warmup_ratio: float = 0.1,
        mask_prob: float = 0.15,
        lambda_mlm: float = 0.05,
        weight_decay: float = 0.01,
        seed: int = 42,
        min_freq: int = 1,
        label_names=None,
    ):
        self.strategy = strategy
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.d_ffn = d_ffn
        self.max_len = max_len
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_ratio = warmup_ratio
        self.mask_prob = mask_prob
        self.lambda_mlm = lambda_mlm
        self.weight_decay = weight_decay
        self.seed = seed
        self.min_freq = min_freq
        self.label_names = label_names

    def fit(self, X, y):
        texts = _check_texts(X)
        labels = _check_indicator(y, len(texts))
        n_labels = labels.shape[1]

        if self.label_names is not None:
            if len(self.label_names) != n_labels:
                raise ContractError(
                    f"{len(self.label_names)} label names for "
                    f"{n_labels} label columns"
                )
            names = tuple(self.label_names)
        else:
            names = tuple(f"label_{i:02d}" for i in range(n_labels))
        self.label_space_ = LabelSpace(names)

        base = build_base_vocab(texts, min_freq=self.min_freq)
        self.vocab_ = extend_with_label_tokens(
            base, self.label_space_, self.strategy
        )
        self.model_config_ = ModelConfig(
            vocab_size=self.vocab_.size,
            n_labels=n_labels,
            strategy=self.strategy,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ffn=self.d_ffn,
            max_len=self.max_len,
            dropout=self.dropout,
        )
        train_cfg = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            warmup_ratio=self.warmup_ratio,
            mask_prob=self.mask_prob,
            lambda_mlm=self.lambda_mlm,
            weight_decay=self.weight_decay,
            seed=self.seed,
            strategy=self.strategy,
        )
        examples = [
            Example(id=f"fit-{i:05d}", text=t, labels=row.tolist())
            for i, (t, row) in enumerate(zip(texts, labels))
        ]
        result = train(
            examples, self.label_space_, self.vocab_,
            self.model_config_, train_cfg,
        )
        self.params_ = result.params
        self.history_ = result.history
        self.n_labels_ = n_labels
        return self

    def predict_proba(self, X) -> np.ndarray:
        """Per-label sigmoid probabilities, shape [n_samples, n_labels]."""
        check_is_fitted(self, "params_")
        return predict_proba_batch(
            self.params_, self.model_config_, self.vocab_,
            self.label_space_, _check_texts(X), self.batch_size,
        )

    def predict(self, X) -> np.ndarray:
        """Binary indicator matrix; probability > 0.5 predicts the label."""
        return threshold_proba(self.predict_proba(X))

    def score(self, X, y) -> float:
        """Subset accuracy: a document counts only if every label matches."""
        texts = _check_texts(X)
        return accuracy(_check_indicator(y, len(texts)), self.predict(texts))

    def _more_tags(self):
        return {"X_types": ["string"], "multilabel": True}
