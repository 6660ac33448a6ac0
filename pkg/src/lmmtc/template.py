"""Cloze template rendering and model-input composition.

A template is one start/state/end token triple per label, prefixed to
the document: [CLS] template [SEP] text [SEP] [PAD]...  The template is
never truncated; text is tail-truncated to fit max_len.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ContractError, VocabularyError
from .rng import Prng
from .vocab import (
    CLS,
    DIFF,
    LE,
    LS,
    MASK,
    NO,
    PAD_ID,
    SEP,
    UNK_ID,
    YES,
    Vocabulary,
    label_token_name,
)

# the three label states; gold bits map 1 -> "yes", 0 -> "no"
STATE_YES = "yes"
STATE_NO = "no"
STATE_MASK = "mask"
STATES = (STATE_YES, STATE_NO, STATE_MASK)

_STATE_KIND = {STATE_YES: YES, STATE_NO: NO, STATE_MASK: MASK}
_KIND_STATE = {YES: STATE_YES, NO: STATE_NO, MASK: STATE_MASK}


@dataclass
class EncodedInput:
    """One composed model input of exactly max_len ids."""

    ids: np.ndarray  # int64 [max_len]
    attn_mask: np.ndarray  # int64 [max_len], 1 = real token, monotone
    label_state_positions: list  # position of label i's state token
    masked_positions: list = field(default_factory=list)
    mlm_targets: list = field(default_factory=list)


def state_position(label_idx: int) -> int:
    """Index of label i's state token in the composed sequence."""
    return 3 * label_idx + 2


def render_template(states, strategy: str) -> list[str]:
    """One [LS][state][LE] triple per label, as token strings."""
    out = []
    for i, s in enumerate(states):
        if s not in STATES:
            raise ContractError(f"unknown label state: {s!r}")
        out.append(label_token_name(LS, i, strategy))
        out.append(label_token_name(_STATE_KIND[s], i, strategy))
        out.append(label_token_name(LE, i, strategy))
    return out


def parse_rendered_template(tokens, strategy: str) -> list[str]:
    """Inverse of render_template; validates the triple structure."""
    if len(tokens) % 3 != 0:
        raise ContractError(f"template length {len(tokens)} is not a multiple of 3")
    states = []
    for i in range(len(tokens) // 3):
        start, state_tok, end = tokens[3 * i : 3 * i + 3]
        if start != label_token_name(LS, i, strategy) or end != label_token_name(
            LE, i, strategy
        ):
            raise ContractError(f"label {i}: malformed triple {tokens[3*i:3*i+3]}")
        for kind in (YES, NO, MASK):
            if state_tok == label_token_name(kind, i, strategy):
                states.append(_KIND_STATE[kind])
                break
        else:
            raise ContractError(f"label {i}: unknown state token {state_tok!r}")
    return states


def compose_input(
    template, text_tokens, vocab: Vocabulary, max_len: int
) -> EncodedInput:
    """[CLS] template [SEP] text [SEP], padded or text-truncated to max_len."""
    if len(template) % 3 != 0:
        raise ContractError(f"template length {len(template)} is not a multiple of 3")
    n_labels = len(template) // 3
    frame = 3 * n_labels + 3  # [CLS], template, and both [SEP]s
    if frame > max_len:
        raise CapacityError(
            f"template for {n_labels} labels needs {frame} positions, max_len={max_len}"
        )
    for tok in template:
        if vocab.id_of(tok) == UNK_ID:
            raise VocabularyError(f"template token {tok!r} not in vocabulary")
    room = max_len - frame
    text_ids = vocab.encode(text_tokens[:room])
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[0] = vocab.id_of(CLS)
    ids[1 : 1 + 3 * n_labels] = vocab.encode(template)
    ids[1 + 3 * n_labels] = vocab.id_of(SEP)
    pos = 2 + 3 * n_labels
    ids[pos : pos + len(text_ids)] = text_ids
    ids[pos + len(text_ids)] = vocab.id_of(SEP)
    real = frame + len(text_ids)
    attn = np.zeros(max_len, dtype=np.int64)
    attn[:real] = 1
    return EncodedInput(
        ids=ids,
        attn_mask=attn,
        label_state_positions=[state_position(i) for i in range(n_labels)],
    )


def sample_label_masks(gold, p: float, rng: Prng, vocab: Vocabulary):
    """Independently mask each label's state with probability p.

    Returns (states, masked_label_indices, mlm_target_ids); targets are
    the gold state-token ids at the masked slots.  Draws one uniform per
    label, in label order, even for labels that end up unmasked.
    """
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"mask probability must be in [0, 1], got {p}")
    n = len(gold)
    draws = rng.random_array((n,)) if n else np.zeros(0)
    states, masked, targets = [], [], []
    for i, bit in enumerate(gold):
        if bit not in (0, 1):
            raise ContractError(f"label vector entries must be 0/1, got {bit!r}")
        gold_state = STATE_YES if bit else STATE_NO
        if draws[i] < p:
            states.append(STATE_MASK)
            masked.append(i)
            targets.append(vocab.state_token_id(_STATE_KIND[gold_state], i))
        else:
            states.append(gold_state)
    return states, masked, targets


def encode_for_training(
    text_tokens, gold, vocab: Vocabulary, max_len: int, mask_prob: float, rng: Prng
) -> EncodedInput:
    """Compose one training input with sampled label masking."""
    states, masked, targets = sample_label_masks(gold, mask_prob, rng, vocab)
    template = render_template(states, vocab.strategy)
    enc = compose_input(template, text_tokens, vocab, max_len)
    enc.masked_positions = [enc.label_state_positions[i] for i in masked]
    enc.mlm_targets = targets
    return enc


def encode_for_inference(
    text_tokens, n_labels: int, vocab: Vocabulary, max_len: int
) -> EncodedInput:
    """Compose one inference input with every label state masked."""
    template = render_template([STATE_MASK] * n_labels, vocab.strategy)
    enc = compose_input(template, text_tokens, vocab, max_len)
    enc.masked_positions = list(enc.label_state_positions)
    return enc
