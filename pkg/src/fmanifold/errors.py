"""Exception hierarchy."""

from __future__ import annotations


class FmanError(Exception):
    """Base class for all errors raised by the package."""


class EvaluationError(FmanError):
    """A field could not be evaluated (domain violation, singular matrix...)."""

    def __init__(self, message: str, point=None, expression: str | None = None):
        self.message = message
        self.point = None if point is None else tuple(float(x) for x in point)
        self.expression = expression
        super().__init__(self._render())

    def _render(self) -> str:
        text = self.message
        if self.expression is not None:
            text += f" in '{self.expression}'"
        if self.point is not None:
            text += f" at {self.point}"
        return text

    def at(self, point=None, expression: str | None = None) -> "EvaluationError":
        return EvaluationError(
            self.message,
            point if point is not None else self.point,
            expression if expression is not None else self.expression,
        )


class ExprSyntaxError(FmanError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnknownIdentifierError(FmanError):
    def __init__(self, name: str, line: int, column: int):
        self.name = name
        self.line = line
        self.column = column
        super().__init__(f"unknown identifier '{name}' (line {line}, column {column})")


class SpecError(FmanError):
    """Invalid specification file; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InapplicableSuiteError(FmanError):
    pass


class ConstructionError(FmanError):
    """A degree-by-degree series construction hit an inconsistent system."""

    def __init__(self, message: str, degree: int | None = None, residual: float | None = None):
        self.degree = degree
        self.residual = residual
        super().__init__(message)
