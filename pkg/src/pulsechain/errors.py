"""Exception types raised across pulsechain."""


class PulseChainError(Exception):
    """Base class for all pulsechain errors."""


class NonMonotoneSchedule(PulseChainError, ValueError):
    """A noisy schedule has a non-positive segment duration."""


class InvalidAmplitude(PulseChainError, ValueError):
    """A transfer amplitude exceeds unit modulus."""


class DegenerateWidth(PulseChainError, ValueError):
    """A distribution was requested with zero width."""


class ParameterOutOfRange(PulseChainError, ValueError):
    pass


class EigenFailure(PulseChainError, ArithmeticError):
    """The symmetric eigensolver did not converge."""


class AllSamplesRejected(PulseChainError, RuntimeError):
    """Every Monte Carlo draw produced a non-monotone schedule."""


class ConfigError(PulseChainError, ValueError):
    pass
