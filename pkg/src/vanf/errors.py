"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI lives in ``vanf.cli``: usage errors map to 1,
validation errors to 2, check failures to 3.
"""


class VanfError(Exception):
    """Base class for all package errors."""


class ValidationError(VanfError):
    """Invalid input: bad config values, malformed files, contract violations."""


class ShapeError(ValidationError):
    """Array shape mismatch; message carries both offending shapes."""

    def __init__(self, op: str, *shapes) -> None:
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, self.shapes))}")


class TapeConsumedError(VanfError):
    """backward() called twice on the same tape."""


class CheckpointError(ValidationError):
    """Corrupt or mismatched checkpoint; names the failing record."""

    def __init__(self, message: str, record: str | None = None) -> None:
        self.record = record
        if record is not None:
            message = f"{message} (record: {record!r})"
        super().__init__(message)


class CheckFailure(VanfError):
    """A numerical self-check (e.g. gradcheck) exceeded its tolerance."""
