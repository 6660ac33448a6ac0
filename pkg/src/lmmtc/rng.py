"""Deterministic PCG32 random number generation.

All randomness in this package flows through Prng so that a single run
seed reproduces every artifact bit for bit.  Each consumer gets its own
PCG32 stream, derived from the run seed plus a fixed per-purpose stream
id, so adding draws to one subsystem never perturbs another.

PCG32 is the reference xsh-rr 64/32 generator: a 64-bit LCG advanced by
``state * MULT + inc`` whose output is a xor-shifted, randomly rotated
32-bit window of the state.  The increment is ``(stream << 1) | 1``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractError

_MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1

# Fixed stream ids, one per purpose.  Never renumber: checkpoints and
# recorded runs depend on these assignments.
STREAMS = {
    "data-gen": 1,
    "init": 2,
    "label-mask": 3,
    "dropout": 4,
    "text-mask": 5,
}

# Block size for the precomputed LCG jump tables used by array draws.
_BLOCK = 1 << 14
_A_POWS: np.ndarray | None = None  # MULT**k mod 2**64 for k in [0, _BLOCK)
_GEO: np.ndarray | None = None     # sum_{j<k} MULT**j mod 2**64


def _jump_tables() -> tuple[np.ndarray, np.ndarray]:
    global _A_POWS, _GEO
    if _A_POWS is None:
        pows = np.ones(_BLOCK, dtype=np.uint64)
        pows[1:] = np.uint64(_MULT)
        with np.errstate(over="ignore"):
            pows = np.cumprod(pows)
            geo = np.zeros(_BLOCK, dtype=np.uint64)
            geo[1:] = np.cumsum(pows[:-1])
        _A_POWS, _GEO = pows, geo
    return _A_POWS, _GEO


class Prng:
    """A single PCG32 stream with scalar and vectorized draws.

    Scalar and array methods consume the identical underlying u32
    sequence, so mixing them is safe as long as call order is fixed.
    """

    def __init__(self, seed: int, stream: int, purpose: str = ""):
        self.purpose = purpose
        self.stream = stream
        self._inc = (((stream << 1) | 1)) & _MASK64
        self._state = 0
        self._step()
        self._state = (self._state + (seed & _MASK64)) & _MASK64
        self._step()

    @classmethod
    def for_purpose(cls, seed: int, purpose: str) -> "Prng":
        """Stream for one of the fixed purposes in STREAMS."""
        if purpose not in STREAMS:
            raise ContractError(f"unknown prng purpose {purpose!r}")
        return cls(seed, STREAMS[purpose], purpose)

    def _step(self):
        self._state = (self._state * _MULT + self._inc) & _MASK64

    # -- scalar draws ---------------------------------------------------

    def next_u32(self) -> int:
        old = self._state
        self._step()
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def random(self) -> float:
        """Uniform float64 in [0, 1) with 32 bits of resolution."""
        return self.next_u32() * 2.0**-32

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) via the PCG rejection method."""
        if bound <= 0:
            raise ContractError(f"bound must be positive, got {bound}")
        threshold = (-bound) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    # -- array draws ----------------------------------------------------

    def u32_array(self, n: int) -> np.ndarray:
        """The next n outputs as a uint32 array."""
        if n < 0:
            raise ContractError(f"n must be nonnegative, got {n}")
        out = np.empty(n, dtype=np.uint32)
        pows, geo = _jump_tables()
        filled = 0
        while filled < n:
            chunk = min(n - filled, _BLOCK)
            s0 = np.uint64(self._state)
            inc = np.uint64(self._inc)
            with np.errstate(over="ignore"):
                old = pows[:chunk] * s0 + geo[:chunk] * inc
                xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)).astype(
                    np.uint32
                )
                rot = (old >> np.uint64(59)).astype(np.uint32)
                out[filled : filled + chunk] = (xorshifted >> rot) | (
                    xorshifted << ((np.uint32(32) - rot) & np.uint32(31))
                )
                self._state = int(pows[chunk - 1] * s0 + geo[chunk - 1] * inc)
            self._step()
            filled += chunk
        return out

    def random_array(self, shape) -> np.ndarray:
        """Uniform float64 array in [0, 1)."""
        n = int(np.prod(shape)) if not np.isscalar(shape) else int(shape)
        vals = self.u32_array(n).astype(np.float64) * 2.0**-32
        return vals.reshape(shape)

    def normal_array(self, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Gaussian float64 array via Box-Muller.

        Consumes 2*ceil(n/2) uniforms regardless of parity, so the
        stream position after a call depends only on the element count.
        """
        n = int(np.prod(shape)) if not np.isscalar(shape) else int(shape)
        pairs = (n + 1) // 2
        if pairs == 0:
            return np.zeros(shape, dtype=np.float64)
        # shift into (0, 1] to keep log() finite
        u1 = (self.u32_array(pairs).astype(np.float64) + 1.0) * 2.0**-32
        u2 = self.u32_array(pairs).astype(np.float64) * 2.0**-32
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return (mean + std * out[:n]).reshape(shape)

    def bernoulli_array(self, shape, p: float) -> np.ndarray:
        """Boolean array, each entry True with probability p."""
        if not 0.0 <= p <= 1.0:
            raise ContractError(f"probability must be in [0, 1], got {p}")
        # u * 2^-32 < p  <=>  u < ceil(p * 2^32); p * 2^32 is an exact scale
        n = int(np.prod(shape)) if not np.isscalar(shape) else int(shape)
        thr = math.ceil(p * 2.0**32)
        u = self.u32_array(n)
        if thr > 0xFFFFFFFF:
            return np.ones(shape, dtype=bool)
        return (u < np.uint32(thr)).reshape(shape)
