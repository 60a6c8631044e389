"""Exception hierarchy shared by all modules."""


class CostShareError(Exception):
    """Base class for all errors raised by this package."""


class DisjointnessViolation(CostShareError):
    """An item identifier appears in more than one player's universe."""


class NotNormalized(CostShareError):
    """A set function assigns a nonzero value to the empty set."""


class NotMonotone(CostShareError):
    """A set function decreases on some superset; args carry the witness."""


class ScopeViolation(CostShareError):
    """A function was queried or defined on items outside its scope."""


class SizeLimit(CostShareError):
    """The requested computation exceeds the enumeration guard."""


class UnsupportedClass(CostShareError):
    """The requested structural class cannot be decided (e.g. XOS tables)."""


class InvalidTieBreak(CostShareError):
    """symmetric_prefix tie-breaking requested on a non-symmetric instance."""


class UnknownName(CostShareError):
    """Unknown counterexample name."""


class InternalConsistencyError(CostShareError):
    """A guaranteed property failed at run time (e.g. a negative payment)."""
