"""Exception taxonomy shared across the package."""

from __future__ import annotations


class FoliationError(Exception):
    """Base class for all package-specific errors."""


class ParseError(FoliationError):
    """Syntax or format error in an expression or foliation file.

    Carries the raw ``message`` plus optional 1-based ``line``/``column``
    so callers (the file loader, the CLI) can re-anchor the location.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(self._render())

    def _render(self) -> str:
        loc = []
        if self.line is not None:
            loc.append(f"line {self.line}")
        if self.column is not None:
            loc.append(f"column {self.column}")
        if loc:
            return f"{self.message} ({', '.join(loc)})"
        return self.message


class UnknownVariableError(ParseError):
    """An identifier in an expression is not a declared variable."""

    def __init__(self, name: str, line: int | None = None, column: int | None = None):
        self.name = name
        super().__init__(f"unknown variable '{name}'", line=line, column=column)


class ArityError(FoliationError):
    """Dimension/length mismatch between objects that must agree."""


class BudgetError(FoliationError):
    """A degree or step budget was exceeded; the answer is *not* truncated."""


class BlowUpError(FoliationError):
    """A trajectory left the configured domain box.

    ``time`` is the signed elapsed time (from the start of the word) at
    which the escape was detected.
    """

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} (t = {time:.6g})")


class PreconditionError(FoliationError):
    """An operation's stated precondition does not hold for the inputs."""


class NotLinearError(PreconditionError):
    """Operation requires every generator to be a linear vector field."""


class NotFixedPointError(PreconditionError):
    """The given point is not a fixed point of the required fields."""
