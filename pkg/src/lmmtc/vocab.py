"""Tokenization, vocabulary construction, and label-token extension.

The base vocabulary holds five fixed specials followed by corpus tokens.
Extending it appends the cloze label tokens: five per label under the
"diff" strategy (position-indexed names), or five shared tokens under
"same".  Extended vocabularies are immutable and safe to share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError, ContractError, VocabularyError

PAD, UNK, CLS, SEP, MASKTXT = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASKTXT]"
SPECIALS = (PAD, UNK, CLS, SEP, MASKTXT)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASKTXT_ID = range(5)

DIFF = "diff"
SAME = "same"
STRATEGIES = (DIFF, SAME)

# label-token kinds in their fixed id order within each label's block
LS, YES, NO, MASK, LE = "LS", "YES", "NO", "MASK", "LE"
_KIND_OFFSET = {LS: 0, YES: 1, NO: 2, MASK: 3, LE: 4}


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens."""
    return text.lower().split()


@dataclass(frozen=True)
class LabelSpace:
    """Ordered label names; index i is the stable id of label i."""

    names: tuple

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ContractError("label names must be unique")

    @property
    def size(self) -> int:
        return len(self.names)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(list(self.names), f, indent=0)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "LabelSpace":
        with open(path) as f:
            names = json.load(f)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ConfigError(f"{path}: expected a JSON array of label strings")
        return cls(tuple(names))


def label_token_name(kind: str, label_idx: int, strategy: str) -> str:
    """Token string for one label-token kind, e.g. ('YES', 0, 'diff') -> '[YES-1]'."""
    if strategy == DIFF:
        return f"[{kind}-{label_idx + 1}]"
    return f"[{kind}]"


@dataclass(frozen=True)
class Vocabulary:
    """Contiguous token ids: specials, corpus tokens, then label tokens."""

    tokens: tuple
    base_size: int
    strategy: str | None = None
    index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.tokens[:5] != SPECIALS:
            raise VocabularyError("first five token ids must be the base specials")
        if self.strategy is not None and self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown mask strategy: {self.strategy!r}")
        if not self.index:
            object.__setattr__(
                self, "index", {t: i for i, t in enumerate(self.tokens)}
            )
        if len(self.index) != len(self.tokens):
            raise VocabularyError("duplicate token strings in vocabulary")

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def extended(self) -> bool:
        return self.strategy is not None

    def id_of(self, token: str) -> int:
        """Id for a known token, [UNK] for anything else."""
        return self.index.get(token, UNK_ID)

    def encode(self, tokens) -> list[int]:
        idx = self.index
        return [idx.get(t, UNK_ID) for t in tokens]

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def state_token_id(self, kind: str, label_idx: int) -> int:
        """Id of one label token; label_idx is ignored under 'same'."""
        if self.strategy is None:
            raise ContractError("vocabulary has no label tokens yet")
        if self.strategy == DIFF:
            n_labels = (self.size - self.base_size) // 5
            if not 0 <= label_idx < n_labels:
                raise ContractError(
                    f"label index {label_idx} out of range for {n_labels} labels"
                )
            return self.base_size + 5 * label_idx + _KIND_OFFSET[kind]
        return self.base_size + _KIND_OFFSET[kind]

    def is_label_token(self, token_id: int) -> bool:
        return token_id >= self.base_size

    def save(self, path):
        payload = {
            "tokens": list(self.tokens),
            "base_size": self.base_size,
            "strategy": self.strategy,
        }
        with open(path, "w") as f:
            json.dump(payload, f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path) as f:
            payload = json.load(f)
        try:
            return cls(
                tokens=tuple(payload["tokens"]),
                base_size=int(payload["base_size"]),
                strategy=payload.get("strategy"),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"{path}: malformed vocabulary file: {e}") from e


def build_base_vocab(corpus, min_freq: int = 1) -> Vocabulary:
    """Corpus tokens with frequency >= min_freq, in first-appearance order."""
    if min_freq < 1:
        raise ContractError(f"min_freq must be >= 1, got {min_freq}")
    counts: dict[str, int] = {}
    order: list[str] = []
    for doc in corpus:
        for tok in tokenize(doc):
            if tok not in counts:
                counts[tok] = 0
                order.append(tok)
            counts[tok] += 1
    kept = [t for t in order if counts[t] >= min_freq]
    tokens = SPECIALS + tuple(kept)
    return Vocabulary(tokens=tokens, base_size=len(tokens))


def extend_with_label_tokens(
    vocab: Vocabulary, labels: LabelSpace, strategy: str
) -> Vocabulary:
    """Append cloze label tokens; base ids are unchanged."""
    if vocab.extended:
        raise ContractError("vocabulary already has label tokens")
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown mask strategy: {strategy!r}")
    new = []
    if strategy == DIFF:
        for i in range(labels.size):
            new.extend(label_token_name(k, i, DIFF) for k in (LS, YES, NO, MASK, LE))
    elif labels.size > 0:
        new.extend(label_token_name(k, 0, SAME) for k in (LS, YES, NO, MASK, LE))
    return Vocabulary(
        tokens=vocab.tokens + tuple(new),
        base_size=vocab.base_size,
        strategy=strategy,
    )
