"""Shared exception types.

The CLI maps these onto its exit-code contract, so library code should
raise the most specific class that applies.
"""


class NslError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(NslError):
    """Syntax error in a program, example file, task file, or prediction file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)


class UnsafeRuleError(ParseError):
    """A rule uses a variable outside its positive body."""

    def __init__(self, variable: str, rule_text: str = "", line: int | None = None,
                 column: int | None = None):
        self.variable = variable
        detail = f" in rule '{rule_text}'" if rule_text else ""
        super().__init__(f"unsafe variable {variable}{detail}", line, column)


class StratificationError(NslError):
    """The program recurses through negation; no unique answer set is guaranteed."""


class ResourceLimitError(NslError):
    """A configured cap (grounding, candidate space, enumeration) was exceeded."""


class InfeasibleTaskError(NslError):
    """No hypothesis can cover every infinite-penalty example."""
