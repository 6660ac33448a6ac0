"""Exception hierarchy for lmmtc.

Everything raised on purpose by this package derives from LmmtcError, so
callers (and the CLI) can distinguish domain failures from genuine bugs.
Most subclasses also derive from ValueError to stay friendly to generic
callers that catch the builtin.
"""


class LmmtcError(Exception):
    """Base class for all errors raised by lmmtc."""


class DimensionError(LmmtcError, ValueError):
    """Tensor shapes do not line up for the requested operation."""


class ContractError(LmmtcError, ValueError):
    """An argument violates a documented precondition."""


class CapacityError(LmmtcError, ValueError):
    """A sequence does not fit in the configured maximum length."""


class VocabularyError(LmmtcError, ValueError):
    """A token id falls outside the vocabulary."""


class ConfigError(LmmtcError, ValueError):
    """A configuration object is internally inconsistent."""


class CheckpointFormatError(LmmtcError, ValueError):
    """A checkpoint file has a bad magic, version, or is truncated."""


class JsonlParseError(LmmtcError, ValueError):
    """A JSONL line could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class LabelRangeError(JsonlParseError):
    """A label index in a data file is outside the label space."""


class TrainingDivergedError(LmmtcError):
    """Training produced a non-finite loss; carries step diagnostics."""

    def __init__(self, step: int, lr: float, l_mtc: float, l_mlm: float):
        super().__init__(
            f"non-finite loss at step {step} (lr={lr:.3e}, "
            f"l_mtc={l_mtc}, l_mlm={l_mlm})"
        )
        self.step = step
        self.lr = lr
        self.l_mtc = l_mtc
        self.l_mlm = l_mlm
