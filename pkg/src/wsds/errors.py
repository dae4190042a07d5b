"""Error taxonomy shared by the whole library."""


class ContractViolation(ValueError):
    """An argument broke a documented precondition (bad width, key out of range, ...)."""


class OccurrenceRangeError(ValueError):
    """A select-style query asked for an occurrence that does not exist.

    Distinct from IndexError: positions out of bounds raise IndexError,
    occurrence counts out of range raise this.
    """


class ArchiveFormatError(ValueError):
    """A serialized structure is corrupt, truncated, or has an unknown version."""
