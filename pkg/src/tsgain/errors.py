"""Exception types shared across the package."""


class ConfigError(Exception):
    """Scenario configuration is missing, malformed, or inconsistent."""


class AssumptionError(Exception):
    """A structural plant assumption (e.g. positive-definite CB symmetric part) fails."""


class TraceFormatError(Exception):
    """A trace CSV is structurally invalid or violates record invariants."""
