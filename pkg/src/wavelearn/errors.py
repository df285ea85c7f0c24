"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class NumericalError(ArithmeticError):
    """A computation produced NaN/Inf or a factorization failed."""
