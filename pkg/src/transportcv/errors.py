"""Exception types shared across the package."""


class TransportCVError(Exception):
    """Base class for all package errors."""


class ParameterError(TransportCVError, ValueError):
    """A parameter is outside its admissible range or a required constant is missing."""


class UnsupportedModelError(TransportCVError, TypeError):
    """The operation needs a potential-form model and this model only defines a drift."""


class ConfigError(TransportCVError, ValueError):
    """A configuration file failed to parse or validate."""


class BlowUpError(TransportCVError, FloatingPointError):
    """A trajectory produced a non-finite state.

    Carries enough context to locate the event: which step, which replica (when
    known), and the offending state.
    """

    def __init__(self, message, step=None, replica=None, state=None):
        super().__init__(message)
        self.step = step
        self.replica = replica
        self.state = state

    def __str__(self):
        base = super().__str__()
        bits = []
        if self.replica is not None:
            bits.append(f"replica={self.replica}")
        if self.step is not None:
            bits.append(f"step={self.step}")
        return f"{base} ({', '.join(bits)})" if bits else base
