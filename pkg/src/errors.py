"""Exception hierarchy shared by every SymPar module."""

from typing import Optional


class SymParError(Exception):
    """Base class for all errors raised by the package."""


class DSLError(SymParError):
    """A diagnostic about an environment program, with its source position."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message)


class ParseError(DSLError):
    pass


class ProgramValidationError(DSLError):
    pass


class InterpreterError(SymParError):
    pass


class FuelExhaustedError(InterpreterError):
    pass


class EvaluationError(InterpreterError):
    pass


class FormulaError(SymParError):
    pass


class SolverError(SymParError):
    pass


class SolverProcessError(SolverError):
    """The external solver could not be spawned or its pipes failed."""


class SolverReplyError(SolverError):
    """The external solver answered with something we cannot read."""


class NonlinearError(SolverError):
    """The internal backend was asked to reason exactly about a nonlinear atom."""


class PartitionInvariantError(SymParError):
    """Point location found zero or several parts: the partition is not total and disjoint."""


class BenchmarkNotFoundError(SymParError):
    pass


class ExperimentConfigError(SymParError):
    pass
