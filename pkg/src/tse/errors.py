"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An input lies outside the physical domain of the operation."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


class ContractError(ValueError):
    """A caller violated an API precondition (shape/emptiness/etc.)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
