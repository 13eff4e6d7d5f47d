"""Exception hierarchy shared by all gastridge modules."""


class GastridgeError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(GastridgeError, ValueError):
    """A physical or numerical parameter is outside its admissible domain."""


class ConfigError(GastridgeError, ValueError):
    """A configuration file or section is malformed."""


class DomainError(GastridgeError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class SaturationError(GastridgeError, RuntimeError):
    """A surface concentration left the open interval (0, c_max)."""

    def __init__(self, electrode, time, concentration, c_max, index=None):
        self.electrode = electrode
        self.time = time
        self.concentration = concentration
        self.c_max = c_max
        self.index = index
        where = f"t={time:g} s" if index is None else f"sample {index} (t={time:g} s)"
        super().__init__(
            f"{electrode} electrode surface concentration {concentration:.6g} "
            f"outside (0, {c_max:g}) at {where}"
        )


class AlignmentError(GastridgeError, ValueError):
    """Two time series that must share timestamps do not."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class ParseError(GastridgeError, ValueError):
    """A data file violates its schema."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NormalizationError(GastridgeError, ValueError):
    """A regression signal cannot be z-scored."""


class FeatureEvaluationError(GastridgeError, FloatingPointError):
    """A basis function produced a non-finite value."""

    def __init__(self, descriptor_id, row):
        self.descriptor_id = descriptor_id
        self.row = row
        super().__init__(f"descriptor {descriptor_id} is non-finite at row {row}")


class DivergenceError(GastridgeError, FloatingPointError):
    """A free-running error simulation blew up."""

    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(f"recursive error model diverged at step {step} (|e|={abs(value):.3g} V)")


class GenerationError(GastridgeError, RuntimeError):
    """The surrogate reference generator could not produce a trace."""
