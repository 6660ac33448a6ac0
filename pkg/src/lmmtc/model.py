"""Toy transformer encoder with label and MLM heads.

Post-layer-norm residual blocks over learned token + absolute position
embeddings.  The label head reads label i's logit at that label's own
state-token position (a diagonal read over the cloze slots); the MLM
head scores masked positions over the extended vocabulary.

Checkpoints are a fixed binary format: magic "LMMTC1", a u16 version,
a u32 JSON-header length, the JSON header (config, seed, PRNG tag,
ordered array manifest), then raw little-endian float64 payloads in
manifest order.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    CheckpointFormatError,
    ConfigError,
    ContractError,
    VocabularyError,
)
from .rng import Prng
from .vocab import STRATEGIES

CHECKPOINT_MAGIC = b"LMMTC1"
CHECKPOINT_VERSION = 1

_NEG_INF = -1e30
_INIT_STD = 0.02


@dataclass
class ModelConfig:
    vocab_size: int
    n_labels: int
    strategy: str
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 4
    d_ffn: int = 256
    max_len: int = 128
    dropout: float = 0.1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown mask strategy: {self.strategy!r}")
        if min(self.d_model, self.n_heads, self.n_layers, self.d_ffn) < 1:
            raise ConfigError("model dimensions must be positive")
        if self.vocab_size < 5:
            raise ConfigError(f"vocab_size {self.vocab_size} smaller than specials")
        if self.n_labels < 1:
            raise ConfigError("need at least one label")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.max_len < 3 * self.n_labels + 3:
            raise ConfigError(
                f"max_len {self.max_len} cannot hold the template frame "
                f"({3 * self.n_labels + 3})"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(f"bad model config: {e}") from e


def param_manifest(config: ModelConfig) -> list:
    """Ordered (name, shape) pairs; fixes checkpoint payload order."""
    d, f = config.d_model, config.d_ffn
    out = [
        ("tok_emb", (config.vocab_size, d)),
        ("pos_emb", (config.max_len, d)),
        ("emb_ln.gamma", (d,)),
        ("emb_ln.beta", (d,)),
    ]
    for i in range(config.n_layers):
        p = f"layers.{i}"
        out += [
            (f"{p}.attn.wq", (d, d)),
            (f"{p}.attn.bq", (d,)),
            (f"{p}.attn.wk", (d, d)),
            (f"{p}.attn.bk", (d,)),
            (f"{p}.attn.wv", (d, d)),
            (f"{p}.attn.bv", (d,)),
            (f"{p}.attn.wo", (d, d)),
            (f"{p}.attn.bo", (d,)),
            (f"{p}.ln_attn.gamma", (d,)),
            (f"{p}.ln_attn.beta", (d,)),
            (f"{p}.ffn.w1", (d, f)),
            (f"{p}.ffn.b1", (f,)),
            (f"{p}.ffn.w2", (f, d)),
            (f"{p}.ffn.b2", (d,)),
            (f"{p}.ln_ffn.gamma", (d,)),
            (f"{p}.ln_ffn.beta", (d,)),
        ]
    out += [
        ("label_head.weight", (d, config.n_labels)),
        ("label_head.bias", (config.n_labels,)),
        ("mlm_head.weight", (d, config.vocab_size)),
        ("mlm_head.bias", (config.vocab_size,)),
    ]
    return out


def init_params(config: ModelConfig, rng: Prng) -> dict:
    """Gaussian(0, 0.02) weights; layer-norm gains 1; all biases 0.

    Gaussian draws happen in manifest order, so the stream position
    after init is a pure function of the config.
    """
    params = {}
    for name, shape in param_manifest(config):
        if name.endswith(".gamma"):
            data = np.ones(shape)
        elif name.endswith((".beta", ".bias")) or ".attn.b" in name or ".ffn.b" in name:
            data = np.zeros(shape)
        else:
            data = rng.normal_array(shape, mean=0.0, std=_INIT_STD)
        params[name] = Tensor(data, requires_grad=True)
    return params


@dataclass
class EncoderOutput:
    hidden: Tensor  # [batch, seq, d_model]
    attentions: list  # per layer: Tensor [batch, heads, seq, seq]


def stack_batch(batch, max_len: int, trim: bool = False):
    """Stack EncodedInputs into (ids, attn_mask) arrays.

    With trim, columns beyond the longest real sequence are dropped;
    pad keys are masked out of attention, so logits are unaffected.
    """
    ids = np.stack([e.ids for e in batch])
    attn = np.stack([e.attn_mask for e in batch])
    if ids.shape[1] != max_len:
        raise ContractError(
            f"inputs padded to {ids.shape[1]}, expected max_len={max_len}"
        )
    if trim:
        longest = int(attn.sum(axis=1).max())
        ids = np.ascontiguousarray(ids[:, :longest])
        attn = np.ascontiguousarray(attn[:, :longest])
    return ids, attn


def _dropout(x: Tensor, p: float, rng: Prng) -> Tensor:
    keep = rng.bernoulli_array(x.shape, 1.0 - p)
    return ad.mul_const(x, np.where(keep, 1.0 / (1.0 - p), 0.0))


def _linear(x2d: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x2d, w), b)


def forward(
    params: dict,
    config: ModelConfig,
    ids: np.ndarray,
    attn_mask: np.ndarray,
    train_mode: bool = False,
    rng: Prng | None = None,
) -> EncoderOutput:
    """Run the encoder; dropout is applied only in train_mode."""
    ids = np.asarray(ids)
    attn_mask = np.asarray(attn_mask)
    if ids.ndim != 2 or ids.shape != attn_mask.shape:
        raise ContractError(
            f"ids {ids.shape} and attn_mask {attn_mask.shape} must be equal 2-d shapes"
        )
    bsz, seq = ids.shape
    if seq > config.max_len:
        raise ContractError(f"sequence length {seq} exceeds max_len {config.max_len}")
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise VocabularyError(
            f"token id out of range [{ids.min()}, {ids.max()}] "
            f"for vocab of {config.vocab_size}"
        )
    use_dropout = train_mode and config.dropout > 0.0
    if use_dropout and rng is None:
        raise ContractError("train_mode with dropout needs a dropout Prng")

    d, h = config.d_model, config.n_heads
    dh = d // h
    # additive bias: 0 on real keys, -1e30 on pads, broadcast over heads/queries
    key_bias = (1.0 - attn_mask[:, None, None, :].astype(np.float64)) * _NEG_INF

    x = ad.add(
        ad.gather_rows(params["tok_emb"], ids),
        ad.gather_rows(params["pos_emb"], np.arange(seq)),
    )
    x = ad.layer_norm(x, params["emb_ln.gamma"], params["emb_ln.beta"])
    if use_dropout:
        x = _dropout(x, config.dropout, rng)

    attentions = []
    for i in range(config.n_layers):
        p = f"layers.{i}"
        x2d = ad.reshape(x, (bsz * seq, d))

        def heads(t2d):
            return ad.transpose(ad.reshape(t2d, (bsz, seq, h, dh)), (0, 2, 1, 3))

        q = heads(_linear(x2d, params[f"{p}.attn.wq"], params[f"{p}.attn.bq"]))
        k = heads(_linear(x2d, params[f"{p}.attn.wk"], params[f"{p}.attn.bk"]))
        v = heads(_linear(x2d, params[f"{p}.attn.wv"], params[f"{p}.attn.bv"]))
        scores = ad.mul_const(
            ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh)
        )
        probs = ad.softmax_rows(ad.add_const(scores, key_bias))
        attentions.append(probs)
        ctx = ad.reshape(
            ad.transpose(ad.matmul(probs, v), (0, 2, 1, 3)), (bsz * seq, d)
        )
        attn_out = _linear(ctx, params[f"{p}.attn.wo"], params[f"{p}.attn.bo"])
        attn_out = ad.reshape(attn_out, (bsz, seq, d))
        if use_dropout:
            attn_out = _dropout(attn_out, config.dropout, rng)
        x = ad.layer_norm(
            ad.add(x, attn_out),
            params[f"{p}.ln_attn.gamma"],
            params[f"{p}.ln_attn.beta"],
        )

        x2d = ad.reshape(x, (bsz * seq, d))
        ffn = _linear(
            ad.gelu(_linear(x2d, params[f"{p}.ffn.w1"], params[f"{p}.ffn.b1"])),
            params[f"{p}.ffn.w2"],
            params[f"{p}.ffn.b2"],
        )
        ffn = ad.reshape(ffn, (bsz, seq, d))
        if use_dropout:
            ffn = _dropout(ffn, config.dropout, rng)
        x = ad.layer_norm(
            ad.add(x, ffn),
            params[f"{p}.ln_ffn.gamma"],
            params[f"{p}.ln_ffn.beta"],
        )
    return EncoderOutput(hidden=x, attentions=attentions)


def label_logits(output: EncoderOutput, params: dict, positions) -> Tensor:
    """Logit of label i read at positions[i]: (O W_l + b_l) diagonal."""
    bsz, seq, d = output.hidden.shape
    n_labels = params["label_head.weight"].shape[1]
    positions = list(positions)
    if len(positions) != n_labels:
        raise ContractError(
            f"got {len(positions)} positions for {n_labels} labels"
        )
    if positions and (min(positions) < 0 or max(positions) >= seq):
        raise ContractError(f"state position out of range for seq {seq}")
    b_idx = np.repeat(np.arange(bsz), n_labels)
    t_idx = np.tile(np.asarray(positions, dtype=np.int64), bsz)
    rows = ad.reshape(
        ad.take_positions(output.hidden, b_idx, t_idx), (bsz, n_labels, d)
    )
    # diagonal of O W_l: contract each label's row with its own weight column
    wl_t = ad.transpose(params["label_head.weight"], (1, 0))
    return ad.add(ad.sum_last(ad.mul(rows, wl_t)), params["label_head.bias"])


def mlm_logits(output: EncoderOutput, params: dict, batch_idx, pos_idx) -> Tensor:
    """Vocabulary logits at each masked (example, position) pair."""
    vocab_size = params["mlm_head.weight"].shape[1]
    batch_idx = np.asarray(batch_idx, dtype=np.int64)
    pos_idx = np.asarray(pos_idx, dtype=np.int64)
    if batch_idx.shape != pos_idx.shape:
        raise ContractError("batch_idx and pos_idx must have equal length")
    if batch_idx.size == 0:
        return Tensor(np.zeros((0, vocab_size)))
    rows = ad.take_positions(output.hidden, batch_idx, pos_idx)
    return ad.add(ad.matmul(rows, params["mlm_head.weight"]), params["mlm_head.bias"])


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: dict, config: ModelConfig, path, seed: int | None = None):
    """Write params atomically in the fixed binary layout."""
    manifest = param_manifest(config)
    missing = [n for n, _ in manifest if n not in params]
    if missing:
        raise ContractError(f"params missing {len(missing)} arrays, first: {missing[0]}")
    header = {
        "config": config.to_dict(),
        "seed": seed,
        "prng": "pcg32",
        "manifest": [{"name": n, "shape": list(s)} for n, s in manifest],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    dirname = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<H", CHECKPOINT_VERSION))
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            for name, shape in manifest:
                arr = params[name].data
                if arr.shape != shape:
                    raise ContractError(
                        f"{name}: shape {arr.shape} does not match manifest {shape}"
                    )
                f.write(arr.astype("<f8").tobytes(order="C"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(f"bad magic bytes {magic!r}")
        raw = f.read(2)
        if len(raw) < 2:
            raise CheckpointFormatError("truncated before version")
        (version,) = struct.unpack("<H", raw)
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"unsupported checkpoint version {version}")
        raw = f.read(4)
        if len(raw) < 4:
            raise CheckpointFormatError("truncated before header length")
        (hlen,) = struct.unpack("<I", raw)
        blob = f.read(hlen)
        if len(blob) < hlen:
            raise CheckpointFormatError("truncated JSON header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointFormatError(f"unreadable JSON header: {e}") from e
        header["_payload_offset"] = 6 + 2 + 4 + hlen
        return header


def load_checkpoint(path):
    """Read (params, config); arrays come back bit-exact."""
    header = read_checkpoint_header(path)
    config = ModelConfig.from_dict(header["config"])
    manifest = param_manifest(config)
    stated = [(m["name"], tuple(m["shape"])) for m in header["manifest"]]
    if stated != manifest:
        raise CheckpointFormatError("manifest does not match the stored config")
    params = {}
    with open(path, "rb") as f:
        f.seek(header["_payload_offset"])
        for name, shape in manifest:
            n = int(np.prod(shape)) if shape else 1
            raw = f.read(8 * n)
            if len(raw) < 8 * n:
                raise CheckpointFormatError(f"truncated payload at {name}")
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
            params[name] = Tensor(arr, requires_grad=True)
        if f.read(1):
            raise CheckpointFormatError("trailing bytes after final array")
    return params, config


def checkpoint_seed(path) -> int | None:
    return read_checkpoint_header(path).get("seed")
