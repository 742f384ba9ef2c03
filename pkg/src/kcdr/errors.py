"""Exceptions that callers are expected to catch and act on."""


class OracleBudgetError(RuntimeError):
    """Brute-force enumeration would exceed the configured combination budget."""


class ConstraintInfeasibleError(RuntimeError):
    """No assignment satisfies the constraint at any radius."""


class EmptyStreamError(RuntimeError):
    """A query was issued against a stream whose net weight is zero."""


class AllLevelsFailedError(RuntimeError):
    """Every guess level overflowed its cell budget or failed to decode."""


class SamplerDecodeError(RuntimeError):
    """A sketch held data but no bucket decoded to a single item."""
