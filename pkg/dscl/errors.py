"""Exception types raised by the dscl package.

Each error carries the process exit code the CLI maps it to.
"""


class DsclError(Exception):
    """Base class for all dscl errors."""

    exit_code = 1


class ConfigError(DsclError, ValueError):
    """Invalid configuration, flag or parameter value."""

    exit_code = 2


class IoError(DsclError, OSError):
    """A file could not be read or written, or is malformed."""

    exit_code = 3


class NonFiniteLoss(DsclError, ArithmeticError):
    """Training produced a NaN/inf loss or gradient."""

    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ZeroVector(DsclError, ValueError):
    """Cannot normalize a (numerically) zero vector."""


class DimensionMismatch(DsclError, ValueError):
    """Operands disagree in dimension or temperature."""


class EmptyInput(DsclError, ValueError):
    """A reduction was asked for over no elements."""


class NoPositives(DsclError, ValueError):
    """An anchor has no other sample sharing its assigned label."""

    def __init__(self, anchor):
        super().__init__(f"anchor {anchor} has no positives in the batch")
        self.anchor = anchor


class NoNegatives(DsclError, ValueError):
    """An anchor has no sample with a different assigned label."""

    def __init__(self, anchor):
        super().__init__(f"anchor {anchor} has no negatives in the batch")
        self.anchor = anchor


class EmptyPositives(DsclError, ValueError):
    pass


class EmptyNegatives(DsclError, ValueError):
    pass


class MissingLatentLabels(DsclError, ValueError):
    """The operation needs latent (true) labels and the batch has none."""


class LengthMismatch(DsclError, ValueError):
    pass


class EmptyDistribution(DsclError, ValueError):
    pass


class SingleClassSplit(DsclError, ValueError):
    """The probe's training split contains fewer than two classes."""


class DegenerateBatch(DsclError, ValueError):
    """No usable multi-class batch could be drawn within the resample limit."""
