"""Label-correlation matrices and label-pair attention summaries.

Correlations are computed column-wise over a 0/1 label matrix; Spearman
is Pearson over average-tie ranks.  Zero-variance labels are flagged
degenerate and their entries forced to 0 so exports stay finite.

Attention summaries follow the read-out convention of the templates:
per example, average the heads of one layer, take the submatrix at the
|L| state-token positions, and accumulate by summation over examples
(a per-example mean is derivable from n_examples).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError
from .model import ModelConfig, forward, stack_batch
from .template import encode_for_inference
from .vocab import LabelSpace, Vocabulary, tokenize

PEARSON = "pearson"
SPEARMAN = "spearman"
METHODS = (PEARSON, SPEARMAN)


@dataclass
class CorrelationMatrix:
    values: np.ndarray  # [L, L], symmetric, entries in [-1, 1]
    method: str
    degenerate: list  # label indices whose column had zero variance


def _rank_with_average_ties(col: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    order = np.argsort(col, kind="stable")
    ranks = np.empty(len(col))
    sorted_vals = col[order]
    i = 0
    while i < len(col):
        j = i
        while j + 1 < len(col) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def correlation_matrix(y, method: str = PEARSON) -> CorrelationMatrix:
    """Pairwise column correlation of a label matrix (rows = examples)."""
    if method not in METHODS:
        raise ContractError(f"unknown correlation method {method!r}")
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"label matrix must be 2-d, got shape {arr.shape}")
    n, n_labels = arr.shape
    if n < 2:
        raise ContractError(f"need at least 2 rows to correlate, got {n}")
    if method == SPEARMAN:
        arr = np.column_stack(
            [_rank_with_average_ties(arr[:, j]) for j in range(n_labels)]
        )
    centered = arr - arr.mean(axis=0)
    cov = centered.T @ centered
    var = np.diag(cov).copy()
    degenerate = [int(i) for i in np.nonzero(var == 0.0)[0]]
    std = np.sqrt(var)
    std[var == 0.0] = 1.0  # placeholder; degenerate entries are zeroed below
    r = cov / np.outer(std, std)
    np.fill_diagonal(r, 1.0)
    for i in degenerate:
        r[i, :] = 0.0
        r[:, i] = 0.0
    np.clip(r, -1.0, 1.0, out=r)
    return CorrelationMatrix(values=r, method=method, degenerate=degenerate)


@dataclass
class AttentionSummary:
    per_layer: list  # one [L, L] float array per layer, summed over examples
    n_examples: int

    def normalized(self) -> list:
        """Per-example mean variant of each layer's matrix."""
        if self.n_examples == 0:
            raise ContractError("no examples accumulated")
        return [m / self.n_examples for m in self.per_layer]


def attention_summary(
    params: dict,
    config: ModelConfig,
    vocab: Vocabulary,
    label_space: LabelSpace,
    texts,
    batch_size: int = 32,
) -> AttentionSummary:
    """Head-averaged label-pair attention for every layer, summed over texts."""
    n_labels = label_space.size
    if config.n_labels != n_labels:
        raise ContractError(
            f"model has {config.n_labels} labels, label space has {n_labels}"
        )
    sums = [np.zeros((n_labels, n_labels)) for _ in range(config.n_layers)]
    count = 0
    for lo in range(0, len(texts), batch_size):
        encs = [
            encode_for_inference(tokenize(t), n_labels, vocab, config.max_len)
            for t in texts[lo : lo + batch_size]
        ]
        ids, attn = stack_batch(encs, config.max_len, trim=True)
        pos = np.asarray(encs[0].label_state_positions)
        with ad.no_grad():
            out = forward(params, config, ids, attn, train_mode=False)
        for k, probs in enumerate(out.attentions):
            head_mean = probs.data.mean(axis=1)  # [B, T, T]
            sub = head_mean[:, pos[:, None], pos[None, :]]  # [B, L, L]
            sums[k] += sub.sum(axis=0)
        count += len(encs)
    return AttentionSummary(per_layer=sums, n_examples=count)


def attention_label_matrix(
    params, config, vocab, label_space, texts, layer: int, batch_size: int = 32
) -> np.ndarray:
    """One layer's summed label-pair attention matrix."""
    if not 0 <= layer < config.n_layers:
        raise ContractError(
            f"layer {layer} out of range for {config.n_layers}-layer model"
        )
    summary = attention_summary(
        params, config, vocab, label_space, texts, batch_size
    )
    return summary.per_layer[layer]


def top_k_labels(values: np.ndarray, k: int) -> list:
    """Indices of the k labels with the highest max off-diagonal entry."""
    arr = np.asarray(values, dtype=np.float64)
    n = arr.shape[0]
    if arr.shape != (n, n):
        raise ContractError(f"expected a square matrix, got {arr.shape}")
    if not 1 <= k <= n:
        raise ContractError(f"k must be in 1..{n}, got {k}")
    off = arr.copy()
    np.fill_diagonal(off, -np.inf)
    scores = off.max(axis=1)
    ranked = sorted(range(n), key=lambda i: (-scores[i], i))
    return sorted(ranked[:k])


# ---------------------------------------------------------------------------
# heatmap export
# ---------------------------------------------------------------------------


def export_csv(matrix, row_names, col_names, path):
    """Header row of column names; each data row starts with its label.

    Floats are written as shortest round-trip decimals so that parsing
    the file reproduces the matrix bit-exactly.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"matrix must be 2-d, got shape {arr.shape}")
    n, m = arr.shape
    if len(row_names) != n or len(col_names) != m:
        raise ContractError("label name counts do not match the matrix")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("label," + ",".join(col_names) + "\n")
        for i in range(n):
            cells = ",".join(repr(float(v)) for v in arr[i])
            f.write(f"{row_names[i]},{cells}\n")


def parse_csv(path):
    """Inverse of export_csv: returns (matrix, row_names, col_names)."""
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines:
        raise ContractError(f"{path}: empty CSV")
    col_names = lines[0].split(",")[1:]
    row_names, rows = [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        row_names.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    return np.asarray(rows, dtype=np.float64), row_names, col_names


_LOW_COLOR = (247, 251, 255)
_HIGH_COLOR = (8, 48, 107)


def _lerp_color(t: float) -> str:
    rgb = tuple(
        round(lo + (hi - lo) * t) for lo, hi in zip(_LOW_COLOR, _HIGH_COLOR)
    )
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def export_svg(matrix, row_names, col_names, path, cell: int = 36):
    """Grid heatmap: one rect per cell at (left + j*cell, top + i*cell).

    Colors interpolate linearly from min to max; a constant matrix maps
    every cell to the midpoint color.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"matrix must be 2-d, got shape {arr.shape}")
    n, m = arr.shape
    if len(row_names) != n or len(col_names) != m:
        raise ContractError("label name counts do not match the matrix")
    left = 10 + 7 * max((len(s) for s in row_names), default=0)
    top = 10 + 7 * max((len(s) for s in col_names), default=0)
    width = left + m * cell + 10
    height = top + n * cell + 10
    lo, hi = float(arr.min()), float(arr.max())
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="11">'
    ]
    for j, name in enumerate(col_names):
        x = left + j * cell + cell // 2
        parts.append(
            f'<text x="{x}" y="{top - 6}" text-anchor="start" '
            f'transform="rotate(-60 {x} {top - 6})">{name}</text>'
        )
    for i, name in enumerate(row_names):
        y = top + i * cell + cell // 2 + 4
        parts.append(f'<text x="{left - 6}" y="{y}" text-anchor="end">{name}</text>')
    for i in range(n):
        for j in range(m):
            v = float(arr[i, j])
            t = 0.5 if hi == lo else (v - lo) / (hi - lo)
            parts.append(
                f'<rect x="{left + j * cell}" y="{top + i * cell}" '
                f'width="{cell}" height="{cell}" fill="{_lerp_color(t)}">'
                f"<title>{row_names[i]} / {col_names[j]}: {v:.6g}</title></rect>"
            )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(parts) + "\n")


def export_heatmap(matrix, row_names, col_names, path, fmt: str):
    if fmt == "csv":
        export_csv(matrix, row_names, col_names, path)
    elif fmt == "svg":
        export_svg(matrix, row_names, col_names, path)
    else:
        raise ContractError(f"unknown heatmap format {fmt!r}")
