"""Shared exception types."""


class GraphFormatError(ValueError):
    """An input graph violates the JSON schema or a structural invariant."""


class SizeGuardError(ValueError):
    """An exhaustive computation would exceed its feasibility guard."""


class StateError(RuntimeError):
    """A chain state is internally inconsistent (signals a bug, not bad input)."""
