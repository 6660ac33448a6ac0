"""Synthetic corpus generation, JSONL ingestion, and deterministic splits.

Label correlation is planted through always-co-active groups: when a
group's unit activates, every label in it switches on together, so the
empirical Pearson r of in-group pairs is exactly 1.  Each active label
contributes 2-4 of its own topic words; noise words pad the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError, ContractError, JsonlParseError, LabelRangeError
from .rng import Prng
from .vocab import LabelSpace


@dataclass
class Example:
    id: str
    text: str
    labels: list  # 0/1 bits, length |L|


@dataclass
class GenSpec:
    n_labels: int
    co_groups: list = field(default_factory=list)  # disjoint label-index groups
    activation_prob: object = 0.35  # scalar, or one float per unit
    topic_words_per_label: int = 4
    noise_vocab_size: int = 50
    doc_len_range: tuple = (15, 30)
    n_train: int = 2000
    n_test: int = 500
    seed: int = 42

    def __post_init__(self):
        if self.n_labels < 1:
            raise ConfigError("need at least one label")
        seen = set()
        for g in self.co_groups:
            for i in g:
                if not 0 <= i < self.n_labels:
                    raise ConfigError(f"group label index {i} out of range")
                if i in seen:
                    raise ConfigError(f"label {i} appears in two co-groups")
                seen.add(i)
        if self.topic_words_per_label < 2:
            raise ConfigError("each label needs at least two topic words")
        if self.noise_vocab_size < 1:
            raise ConfigError("noise vocabulary cannot be empty")
        lo, hi = self.doc_len_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"bad doc_len_range {self.doc_len_range}")
        if self.n_train < 1 or self.n_test < 0:
            raise ConfigError("need n_train >= 1 and n_test >= 0")
        probs = self.unit_probs()
        if not all(0.0 < p <= 1.0 for p in probs):
            raise ConfigError("activation probabilities must be in (0, 1]")

    def units(self) -> list:
        """Co-groups first, then each ungrouped label as a singleton."""
        grouped = {i for g in self.co_groups for i in g}
        singles = [[i] for i in range(self.n_labels) if i not in grouped]
        return [list(g) for g in self.co_groups] + singles

    def unit_probs(self) -> list:
        units = self.units()
        if isinstance(self.activation_prob, (int, float)):
            return [float(self.activation_prob)] * len(units)
        probs = [float(p) for p in self.activation_prob]
        if len(probs) != len(units):
            raise ConfigError(
                f"{len(probs)} activation probs for {len(units)} units"
            )
        return probs

    def to_dict(self) -> dict:
        return {
            "n_labels": self.n_labels,
            "co_groups": [list(g) for g in self.co_groups],
            "activation_prob": self.activation_prob,
            "topic_words_per_label": self.topic_words_per_label,
            "noise_vocab_size": self.noise_vocab_size,
            "doc_len_range": list(self.doc_len_range),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        d = dict(d)
        if "doc_len_range" in d:
            d["doc_len_range"] = tuple(d["doc_len_range"])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(f"bad generation spec: {e}") from e

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "GenSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def topic_word(label_idx: int, j: int) -> str:
    return f"t{label_idx}w{j}"


def _sample_bits(spec: GenSpec, units, probs, rng: Prng) -> list:
    """Activate units independently; resample until some label is on."""
    while True:
        bits = [0] * spec.n_labels
        for unit, p in zip(units, probs):
            if rng.random() < p:
                for i in unit:
                    bits[i] = 1
        if any(bits):
            return bits


def _sample_text(spec: GenSpec, bits, rng: Prng) -> str:
    words = []
    k_hi = min(4, spec.topic_words_per_label)
    for i, bit in enumerate(bits):
        if not bit:
            continue
        pool = [topic_word(i, j) for j in range(spec.topic_words_per_label)]
        rng.shuffle(pool)
        k = 2 + rng.below(k_hi - 1)  # 2..k_hi topic words, no repeats
        words.extend(pool[:k])
    lo, hi = spec.doc_len_range
    doc_len = lo + rng.below(hi - lo + 1)
    while len(words) < doc_len:
        words.append(f"noise{rng.below(spec.noise_vocab_size)}")
    rng.shuffle(words)
    return " ".join(words)


def generate_synthetic(spec: GenSpec):
    """Returns (train, test, label_space), all determined by spec.seed."""
    rng = Prng.for_purpose(spec.seed, "data-gen")
    label_space = LabelSpace(tuple(f"label_{i:02d}" for i in range(spec.n_labels)))
    units = spec.units()
    probs = spec.unit_probs()

    def make(prefix: str, count: int) -> list:
        out = []
        for n in range(count):
            bits = _sample_bits(spec, units, probs, rng)
            out.append(
                Example(
                    id=f"{prefix}-{n:05d}",
                    text=_sample_text(spec, bits, rng),
                    labels=bits,
                )
            )
        return out

    return make("train", spec.n_train), make("test", spec.n_test), label_space


def benchmark_spec(seed: int = 42) -> GenSpec:
    """The default evaluation benchmark: 12 labels, three planted pairs."""
    return GenSpec(
        n_labels=12,
        co_groups=[[0, 1], [4, 5], [8, 9]],
        n_train=2000,
        n_test=500,
        seed=seed,
    )


def save_jsonl(path, examples):
    """One {"id", "text", "labels": [active indices]} object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ex in examples:
            rec = {
                "id": ex.id,
                "text": ex.text,
                "labels": [i for i, b in enumerate(ex.labels) if b],
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_jsonl(path, label_space: LabelSpace) -> list:
    """Parse examples; label index lists become 0/1 vectors of length |L|."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise JsonlParseError(str(e), line_no=line_no) from e
            if not isinstance(rec, dict):
                raise JsonlParseError("expected a JSON object", line_no=line_no)
            missing = {"id", "text", "labels"} - set(rec)
            if missing:
                raise JsonlParseError(
                    f"record missing {sorted(missing)}", line_no=line_no
                )
            if not isinstance(rec["labels"], list):
                raise JsonlParseError('"labels" must be an array', line_no=line_no)
            bits = [0] * label_space.size
            for idx in rec["labels"]:
                if not isinstance(idx, int) or isinstance(idx, bool):
                    raise JsonlParseError(
                        f"label index {idx!r} is not an integer", line_no=line_no
                    )
                if not 0 <= idx < label_space.size:
                    raise LabelRangeError(
                        f"label index {idx} outside 0..{label_space.size - 1}",
                        line_no=line_no,
                    )
                bits[idx] = 1
            out.append(Example(id=str(rec["id"]), text=str(rec["text"]), labels=bits))
    return out


def split(examples, ratio: float, seed: int):
    """Seeded shuffle then prefix/suffix cut; both parts nonempty when n >= 2."""
    if not 0.0 < ratio < 1.0:
        raise ContractError(f"split ratio must be in (0, 1), got {ratio}")
    examples = list(examples)
    n = len(examples)
    order = list(range(n))
    Prng.for_purpose(seed, "data-gen").shuffle(order)
    n_a = round(ratio * n)
    if n >= 2:
        n_a = min(max(n_a, 1), n - 1)
    part_a = [examples[i] for i in order[:n_a]]
    part_b = [examples[i] for i in order[n_a:]]
    return part_a, part_b
