"""Error types shared across the toolkit."""


class ConfigurationError(ValueError):
    """Invalid system configuration or unsupported parameter combination."""


class CapacityError(RuntimeError):
    """A requested enumeration or grid exceeds the configured size cap."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition (infeasible design, bad shape)."""


class SpecValidationError(ValueError):
    """An experiment spec file failed schema validation."""


class IllConditionedChannelError(RuntimeError):
    """Channel matrix too close to singular for the requested design."""
