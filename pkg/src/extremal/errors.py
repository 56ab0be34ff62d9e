"""Exception types shared across the package."""


class CapacityError(ValueError):
    """Instance exceeds what an exact enumeration can handle."""


class FitError(RuntimeError):
    """The scaling fit has no admissible solution."""


class InvalidStateError(RuntimeError):
    """Operation requested on an object in an unusable state (e.g. empty heap)."""
