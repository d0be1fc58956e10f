"""Signal temporal logic formulas with their parser and trace semantics."""

from driverbound.stl.formula import (
    Always, And, Eventually, Formula, Implies, Label, Not, Or, Param, Predicate,
    TrueF, UnboundParameterError, Until, alw, conj, ev, pred, to_document,
    to_string,
)
from driverbound.stl.parser import STLSyntaxError, parse
from driverbound.stl.semantics import (
    EmptyWindowError, robustness, robustness_signal, satisfies,
)

__all__ = [
    "Always", "And", "EmptyWindowError", "Eventually", "Formula", "Implies",
    "Label", "Not", "Or", "Param", "Predicate", "STLSyntaxError", "TrueF",
    "UnboundParameterError", "Until", "alw", "conj", "ev", "parse", "pred",
    "robustness", "robustness_signal", "satisfies", "to_document", "to_string",
]
