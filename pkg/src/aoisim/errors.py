"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """Scenario configuration is invalid or geometrically infeasible."""


class PreconditionError(ValueError):
    """A caller violated a documented operation precondition."""


class InterfaceError(ValueError):
    """Malformed data crossed a module boundary (wrong length, bad id)."""


class SchemaError(ValueError):
    """A metrics file does not match the expected schema version."""


class AggregationGroupError(ValueError):
    """Parameter averaging was requested across incompatible networks."""
