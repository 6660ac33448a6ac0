"""Joint-loss training loop, AdamW, LR schedule, and MLM pretraining.

Fine-tuning optimizes L = L_mtc + lambda * L_mlm per batch: BCE over all
label slots plus cross-entropy over whichever label slots were masked
this step.  Pretraining is plain text-token MLM with [MASKTXT].

Reproducibility: parameter init, label masking + epoch shuffling, and
dropout each consume their own PRNG stream, so a (seed, config, data)
triple fixes every checkpoint bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, JsonlParseError, TrainingDivergedError
from .model import (
    ModelConfig,
    forward,
    init_params,
    label_logits,
    mlm_logits,
    stack_batch,
)
from .rng import Prng
from .template import encode_for_training
from .vocab import (
    CLS,
    MASKTXT_ID,
    SEP,
    STRATEGIES,
    LabelSpace,
    Vocabulary,
    tokenize,
)


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 16
    epochs: int = 40
    warmup_ratio: float = 0.1
    mask_prob: float = 0.15
    lambda_mlm: float = 0.05  # serialized under the JSON key "lambda"
    weight_decay: float = 0.01
    seed: int = 42
    strategy: str = "diff"
    log_every_batches: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError(f"warmup_ratio must be in [0, 1], got {self.warmup_ratio}")
        if not 0.0 <= self.mask_prob <= 1.0:
            raise ConfigError(f"mask_prob must be in [0, 1], got {self.mask_prob}")
        if self.lambda_mlm < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lambda_mlm}")
        if self.batch_size < 1 or self.epochs < 1 or self.log_every_batches < 1:
            raise ConfigError("batch_size, epochs, log_every_batches must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown mask strategy: {self.strategy!r}")

    def to_dict(self) -> dict:
        d = {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "warmup_ratio": self.warmup_ratio,
            "mask_prob": self.mask_prob,
            "lambda": self.lambda_mlm,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "strategy": self.strategy,
            "log_every_batches": self.log_every_batches,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "lambda" in d:
            d["lambda_mlm"] = d.pop("lambda")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(f"bad train config: {e}") from e

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "TrainConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class LossBreakdown:
    step: int
    l_mtc: float
    l_mlm: float
    l_joint: float


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)  # LossBreakdown, steps increasing
    epochs: list = field(default_factory=list)  # per-epoch dicts

    def log_loss(self, entry: LossBreakdown):
        if self.losses and entry.step <= self.losses[-1].step:
            raise ContractError("loss log steps must be strictly increasing")
        self.losses.append(entry)

    def save(self, path):
        with open(path, "w") as f:
            for e in self.losses:
                rec = {
                    "kind": "loss",
                    "step": e.step,
                    "l_mtc": e.l_mtc,
                    "l_mlm": e.l_mlm,
                    "l_joint": e.l_joint,
                }
                f.write(json.dumps(rec, sort_keys=True) + "\n")
            for rec in self.epochs:
                f.write(json.dumps({"kind": "epoch", **rec}, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "TrainHistory":
        hist = cls()
        with open(path) as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise JsonlParseError(str(e), line_no=line_no) from e
                kind = rec.pop("kind", None)
                if kind == "loss":
                    try:
                        hist.log_loss(LossBreakdown(**rec))
                    except (TypeError, ContractError) as e:
                        raise JsonlParseError(str(e), line_no=line_no) from e
                elif kind == "epoch":
                    hist.epochs.append(rec)
                else:
                    raise JsonlParseError(f"unknown record kind {kind!r}", line_no=line_no)
        return hist


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def bce_loss(logits: Tensor, y_true) -> Tensor:
    """Mean stable-form BCE over every (example, label) cell."""
    return ad.bce_with_logits(logits, np.asarray(y_true, dtype=np.float64))


def mlm_ce_loss(logits: Tensor, targets) -> Tensor:
    """Mean cross-entropy at masked slots; 0 when nothing is masked."""
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        return Tensor(0.0)
    return ad.softmax_cross_entropy(logits, targets)


def joint_loss(l_mtc: Tensor, l_mlm: Tensor, lam: float) -> Tensor:
    """L = L_mtc + lam * L_mlm; lam == 0 returns L_mtc itself."""
    if lam < 0:
        raise ContractError(f"lambda must be >= 0, got {lam}")
    if lam == 0.0:
        return l_mtc
    return ad.add(l_mtc, ad.mul_const(l_mlm, lam))


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------


def adamw_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    betas=(0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
):
    """One in-place AdamW update; decoupled decay runs before the moments."""
    b1, b2 = betas
    param -= lr * weight_decay * param
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamW:
    """AdamW over a named parameter dict; step count shared across params."""

    def __init__(self, params: dict, weight_decay: float = 0.0,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in params.items()}

    def step(self, lr: float):
        self.t += 1
        for name, p in self.params.items():
            adamw_step(
                p.data, p.grad, self.m[name], self.v[name], self.t, lr,
                betas=self.betas, eps=self.eps, weight_decay=self.weight_decay,
            )

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


def lr_at(step: int, total_steps: int, warmup_ratio: float, base_lr: float) -> float:
    """Linear warmup to base_lr, then linear decay to 0 at total_steps."""
    if total_steps <= 0:
        raise ContractError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ContractError(f"step {step} outside [0, {total_steps}]")
    warmup = round(warmup_ratio * total_steps)
    if warmup > 0 and step < warmup:
        return base_lr * step / warmup
    if total_steps == warmup:
        return base_lr
    return base_lr * (total_steps - step) / (total_steps - warmup)


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: dict
    history: TrainHistory
    best_params: dict | None = None  # deep copy at the best dev micro-F1 epoch
    best_epoch: int | None = None


def _check_finite(l_joint, l_mtc, l_mlm, step, lr):
    if not math.isfinite(l_joint):
        raise TrainingDivergedError(step=step, lr=lr, l_mtc=l_mtc, l_mlm=l_mlm)


def _batches(order, batch_size):
    for lo in range(0, len(order), batch_size):
        yield order[lo : lo + batch_size]


def _masked_triplets(encs):
    """Flatten per-example masked slots into (batch_idx, pos_idx, targets)."""
    b_idx, p_idx, targets = [], [], []
    for i, e in enumerate(encs):
        b_idx.extend([i] * len(e.masked_positions))
        p_idx.extend(e.masked_positions)
        targets.extend(e.mlm_targets)
    return (
        np.asarray(b_idx, dtype=np.int64),
        np.asarray(p_idx, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
    )


def _snapshot(params: dict) -> dict:
    return {n: Tensor(p.data.copy(), requires_grad=True) for n, p in params.items()}


def train(
    examples,
    label_space: LabelSpace,
    vocab: Vocabulary,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    dev_examples=None,
    initial_params: dict | None = None,
    progress=None,
) -> TrainResult:
    """Fine-tune with the joint label-cloze objective.

    Per batch: sample label masks, render gold-with-mask templates,
    forward in train mode, BCE over all |L| slots + CE over the masked
    ones, backward, AdamW with the scheduled learning rate.  A loss
    breakdown is logged every log_every_batches steps, starting at 0.
    """
    examples = list(examples)
    if not examples:
        raise ContractError("training set is empty")
    for ex in examples:
        if len(ex.labels) != label_space.size:
            raise ContractError(
                f"example {ex.id!r} has {len(ex.labels)} labels, "
                f"expected {label_space.size}"
            )
    if vocab.strategy != train_cfg.strategy or model_cfg.strategy != train_cfg.strategy:
        raise ContractError("vocab, model, and train strategies must agree")

    init_rng = Prng.for_purpose(train_cfg.seed, "init")
    mask_rng = Prng.for_purpose(train_cfg.seed, "label-mask")
    drop_rng = Prng.for_purpose(train_cfg.seed, "dropout")

    params = initial_params if initial_params is not None else init_params(
        model_cfg, init_rng
    )
    opt = AdamW(params, weight_decay=train_cfg.weight_decay)
    texts = [tokenize(ex.text) for ex in examples]
    golds = [list(ex.labels) for ex in examples]

    n = len(examples)
    batches_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * batches_per_epoch
    history = TrainHistory()
    best_f1, best_params, best_epoch = -1.0, None, None

    step = 0
    for epoch in range(train_cfg.epochs):
        order = list(range(n))
        mask_rng.shuffle(order)
        masked_slots = 0
        for batch in _batches(order, train_cfg.batch_size):
            encs = [
                encode_for_training(
                    texts[i], golds[i], vocab, model_cfg.max_len,
                    train_cfg.mask_prob, mask_rng,
                )
                for i in batch
            ]
            ids, attn = stack_batch(encs, model_cfg.max_len, trim=True)
            out = forward(
                params, model_cfg, ids, attn, train_mode=True, rng=drop_rng
            )
            logits = label_logits(out, params, encs[0].label_state_positions)
            l_mtc = bce_loss(logits, [golds[i] for i in batch])
            b_idx, p_idx, targets = _masked_triplets(encs)
            l_mlm = mlm_ce_loss(
                mlm_logits(out, params, b_idx, p_idx), targets
            )
            l_joint = joint_loss(l_mtc, l_mlm, train_cfg.lambda_mlm)
            lr = lr_at(step, total_steps, train_cfg.warmup_ratio,
                       train_cfg.learning_rate)
            _check_finite(l_joint.item(), l_mtc.item(), l_mlm.item(), step, lr)
            if step % train_cfg.log_every_batches == 0:
                history.log_loss(LossBreakdown(
                    step=step, l_mtc=l_mtc.item(), l_mlm=l_mlm.item(),
                    l_joint=l_joint.item(),
                ))
            ad.backward(l_joint)
            opt.step(lr)
            opt.zero_grad()
            masked_slots += int(targets.size)
            step += 1

        epoch_rec = {
            "epoch": epoch,
            "masked_fraction": masked_slots / (n * label_space.size),
        }
        if dev_examples:
            from .inference import predict_proba_batch, threshold_proba
            from .metrics import full_report

            proba = predict_proba_batch(
                params, model_cfg, vocab, label_space,
                [ex.text for ex in dev_examples], train_cfg.batch_size,
            )
            rep = full_report(
                [ex.labels for ex in dev_examples], threshold_proba(proba)
            )
            epoch_rec["dev"] = rep.to_dict()
            if rep.micro_f1 > best_f1:
                best_f1, best_epoch = rep.micro_f1, epoch
                best_params = _snapshot(params)
        history.epochs.append(epoch_rec)
        if progress is not None:
            progress(epoch, epoch_rec)

    return TrainResult(
        params=params, history=history,
        best_params=best_params, best_epoch=best_epoch,
    )


def _mask_text_tokens(ids, n_real, mask_prob, rng):
    """Replace eligible text positions with [MASKTXT]; returns (ids, pos, tgt).

    Eligible positions are the text span between the [CLS] and the final
    [SEP]: indices 1 .. n_real-2.  One uniform draw per eligible token.
    """
    n_eligible = max(n_real - 2, 0)
    masked_ids = ids.copy()
    if n_eligible == 0:
        return masked_ids, [], []
    draws = rng.random_array((n_eligible,))
    pos, tgt = [], []
    for j in range(n_eligible):
        if draws[j] < mask_prob:
            p = 1 + j
            pos.append(p)
            tgt.append(int(ids[p]))
            masked_ids[p] = MASKTXT_ID
    return masked_ids, pos, tgt


def pretrain_mlm(
    corpus,
    vocab: Vocabulary,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    progress=None,
) -> TrainResult:
    """Text-token MLM warmup: [CLS] text [SEP], 15% of text masked.

    History rows carry l_mtc = 0 and l_joint = l_mlm (the objective is
    the bare cross-entropy; lambda does not scale it here).
    """
    corpus = list(corpus)
    if not corpus:
        raise ContractError("pretraining corpus is empty")

    init_rng = Prng.for_purpose(train_cfg.seed, "init")
    shuffle_rng = Prng.for_purpose(train_cfg.seed, "label-mask")
    text_rng = Prng.for_purpose(train_cfg.seed, "text-mask")
    drop_rng = Prng.for_purpose(train_cfg.seed, "dropout")

    params = init_params(model_cfg, init_rng)
    opt = AdamW(params, weight_decay=train_cfg.weight_decay)

    cls_id, sep_id = vocab.id_of(CLS), vocab.id_of(SEP)
    encoded = []
    for text in corpus:
        toks = vocab.encode(tokenize(text)[: model_cfg.max_len - 2])
        row = np.zeros(model_cfg.max_len, dtype=np.int64)
        row[0] = cls_id
        row[1 : 1 + len(toks)] = toks
        row[1 + len(toks)] = sep_id
        encoded.append((row, len(toks) + 2))

    n = len(corpus)
    batches_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * batches_per_epoch
    history = TrainHistory()

    step = 0
    for epoch in range(train_cfg.epochs):
        order = list(range(n))
        shuffle_rng.shuffle(order)
        masked_count = eligible_count = 0
        for batch in _batches(order, train_cfg.batch_size):
            longest = max(encoded[i][1] for i in batch)
            ids = np.zeros((len(batch), longest), dtype=np.int64)
            attn = np.zeros((len(batch), longest), dtype=np.int64)
            b_idx, p_idx, targets = [], [], []
            for r, i in enumerate(batch):
                row, n_real = encoded[i]
                masked, pos, tgt = _mask_text_tokens(
                    row[:longest], n_real, train_cfg.mask_prob, text_rng
                )
                ids[r] = masked
                attn[r, :n_real] = 1
                b_idx.extend([r] * len(pos))
                p_idx.extend(pos)
                targets.extend(tgt)
                masked_count += len(pos)
                eligible_count += max(n_real - 2, 0)
            out = forward(
                params, model_cfg, ids, attn, train_mode=True, rng=drop_rng
            )
            l_mlm = mlm_ce_loss(
                mlm_logits(
                    out, params,
                    np.asarray(b_idx, dtype=np.int64),
                    np.asarray(p_idx, dtype=np.int64),
                ),
                np.asarray(targets, dtype=np.int64),
            )
            lr = lr_at(step, total_steps, train_cfg.warmup_ratio,
                       train_cfg.learning_rate)
            _check_finite(l_mlm.item(), 0.0, l_mlm.item(), step, lr)
            if step % train_cfg.log_every_batches == 0:
                history.log_loss(LossBreakdown(
                    step=step, l_mtc=0.0, l_mlm=l_mlm.item(), l_joint=l_mlm.item(),
                ))
            if l_mlm.requires_grad:
                ad.backward(l_mlm)
            else:
                ad.active_tape().clear()
            opt.step(lr)
            opt.zero_grad()
            step += 1
        history.epochs.append({
            "epoch": epoch,
            "masked_fraction": masked_count / max(eligible_count, 1),
        })
        if progress is not None:
            progress(epoch, history.epochs[-1])
    return TrainResult(params=params, history=history)
