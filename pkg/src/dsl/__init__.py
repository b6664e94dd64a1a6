from .ast import Action, Program, StateVar
from .interpreter import Interpreter, StepResult, concrete_step
from .parser import parse, parse_condition, parse_file
from .printer import format_condition, print_program

__all__ = [
    "Action",
    "Program",
    "StateVar",
    "Interpreter",
    "StepResult",
    "concrete_step",
    "parse",
    "parse_condition",
    "parse_file",
    "format_condition",
    "print_program",
]
