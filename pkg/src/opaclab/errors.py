"""Exception types raised across the package."""


class InputError(ValueError):
    """An argument has the wrong shape or an invalid value."""


class NumericError(ArithmeticError):
    """A loss or gradient became non-finite.

    ``name`` identifies the offending quantity (e.g. ``"q_loss"``).
    """

    def __init__(self, name: str, message: str = ""):
        self.name = name
        super().__init__(f"{name}: {message or 'non-finite value'}")


class BufferStateError(RuntimeError):
    """Sampling from an empty replay buffer."""


class ConfigError(ValueError):
    """Invalid experiment or environment configuration."""


class AlignmentError(ValueError):
    """Run files disagree on their checkpoint steps."""
