"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration.

    ``key`` names the offending configuration key and ``line`` the line of
    the configuration file it came from, when known.
    """

    def __init__(self, message, key=None, line=None):
        self.reason = message
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where += f"[{key}]"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where} {message}".strip())


class GridError(ValueError):
    """A field, packet or history does not fit the lattice it is used on."""


class TimeLabelError(ValueError):
    """Two slices that must share a time label do not."""


class DegenerateChannelError(ArithmeticError):
    """Overlap between initial and final state is too small to normalize by."""


class CausalCharacterError(ValueError):
    """A four-vector does not have the causal character an operation requires."""

    def __init__(self, message, causal_class):
        self.causal_class = causal_class
        super().__init__(f"{message} (causal class: {causal_class})")


class StagnationError(ArithmeticError):
    """Density vanishes at a point where a velocity is requested."""


class IncompleteEnsembleError(ValueError):
    """Born averaging requested over a channel set that is not complete."""
