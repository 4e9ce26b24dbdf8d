"""Exception types raised across the package."""


class NomaAirlinkError(Exception):
    """Base class for all package errors."""


class DomainError(NomaAirlinkError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NonConvergence(NomaAirlinkError, ArithmeticError):
    """Adaptive quadrature exhausted its budget above tolerance."""


class OutOfRange(NomaAirlinkError, ValueError):
    """Inversion target outside the range of the function on the interval."""


class RankError(NomaAirlinkError, ValueError):
    """User rank inconsistent with the population size or decoding order."""


class RegimeError(NomaAirlinkError, ValueError):
    """Count regime not supported by the requested distribution."""


class DegeneratePartition(NomaAirlinkError, ValueError):
    """Region boundary coincides with a stationary point of the beam kernel."""


class InfeasiblePowerSplit(NomaAirlinkError, ValueError):
    """Weak-user target unreachable at any SNR with the given power split."""


class ConfigError(NomaAirlinkError):
    """Base for scenario configuration problems."""


class ParseError(ConfigError, ValueError):
    """Scenario file could not be parsed."""


class ValidationError(ConfigError, ValueError):
    """Scenario parsed but violates an invariant."""
