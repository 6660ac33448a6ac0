"""Cloze inference: mask every label slot, read sigmoid probabilities.

The decision rule is strict: probability > 0.5 predicts positive, the
boundary itself is negative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, JsonlParseError
from .model import ModelConfig, forward, label_logits, stack_batch
from .template import encode_for_inference
from .vocab import LabelSpace, Vocabulary, tokenize

THRESHOLD = 0.5


@dataclass
class Prediction:
    proba: list  # length |L|, floats in (0, 1)
    labels: list  # length |L|, ints in {0, 1}; labels[i] == 1 iff proba[i] > 0.5


def _check_compat(config: ModelConfig, vocab: Vocabulary, label_space: LabelSpace):
    if config.strategy != vocab.strategy:
        raise ContractError(
            f"model strategy {config.strategy!r} != vocab strategy {vocab.strategy!r}"
        )
    if config.n_labels != label_space.size:
        raise ContractError(
            f"model has {config.n_labels} labels, label space has {label_space.size}"
        )
    if config.vocab_size != vocab.size:
        raise ContractError(
            f"model vocab size {config.vocab_size} != vocabulary size {vocab.size}"
        )


def predict_proba_encoded(params: dict, config: ModelConfig, encs) -> np.ndarray:
    """Probabilities [batch, |L|] for already-composed all-mask inputs."""
    ids, attn = stack_batch(encs, config.max_len, trim=True)
    with ad.no_grad():
        out = forward(params, config, ids, attn, train_mode=False)
        logits = label_logits(out, params, encs[0].label_state_positions)
        return ad.sigmoid(logits).data


def predict_proba_batch(
    params: dict,
    config: ModelConfig,
    vocab: Vocabulary,
    label_space: LabelSpace,
    texts,
    batch_size: int = 32,
) -> np.ndarray:
    """Probabilities [n, |L|] for raw text strings."""
    _check_compat(config, vocab, label_space)
    out = []
    for lo in range(0, len(texts), batch_size):
        encs = [
            encode_for_inference(
                tokenize(t), label_space.size, vocab, config.max_len
            )
            for t in texts[lo : lo + batch_size]
        ]
        out.append(predict_proba_encoded(params, config, encs))
    return np.concatenate(out) if out else np.zeros((0, label_space.size))


def predict_proba(params, config, vocab, label_space, text: str) -> np.ndarray:
    """Length-|L| probability vector for one document."""
    return predict_proba_batch(params, config, vocab, label_space, [text])[0]


def threshold_proba(proba: np.ndarray) -> np.ndarray:
    """Strictly-greater threshold; 0.5 itself maps to negative."""
    return (np.asarray(proba) > THRESHOLD).astype(np.int64)


def predict(params, config, vocab, label_space, text: str) -> Prediction:
    p = predict_proba(params, config, vocab, label_space, text)
    return Prediction(proba=p.tolist(), labels=threshold_proba(p).tolist())


def predict_batch(
    params, config, vocab, label_space, texts, batch_size: int = 32
) -> list:
    probs = predict_proba_batch(
        params, config, vocab, label_space, texts, batch_size
    )
    return [
        Prediction(proba=p.tolist(), labels=threshold_proba(p).tolist())
        for p in probs
    ]


def save_predictions_jsonl(path, example_ids, predictions):
    if len(example_ids) != len(predictions):
        raise ContractError(
            f"{len(example_ids)} ids for {len(predictions)} predictions"
        )
    with open(path, "w") as f:
        for ex_id, pred in zip(example_ids, predictions):
            rec = {"id": ex_id, "proba": pred.proba, "labels": pred.labels}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_predictions_jsonl(path):
    out = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise JsonlParseError(str(e), line_no=line_no) from e
            missing = {"id", "proba", "labels"} - set(rec)
            if missing:
                raise JsonlParseError(
                    f"prediction record missing {sorted(missing)}", line_no=line_no
                )
            out.append(rec)
    return out
