"""Abstract syntax of (parametric) signal temporal logic formulas.

Nodes are frozen dataclasses, so structural equality and hashing come for
free.  ``str(formula)`` produces the concrete syntax accepted by
:func:`driverbound.stl.parse`.
"""

import math
from dataclasses import dataclass

COMPARATORS = ("<", "<=", ">", ">=", "==")


class UnboundParameterError(KeyError):
    pass


@dataclass(frozen=True)
class Param:
    """A named, not yet valued, scale parameter."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Label:
    """A discrete traffic-light literal (``G``, ``Y`` or ``R``)."""

    value: str

    def __str__(self):
        return self.value


def _num(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _check_interval(lo, hi):
    if not (lo >= 0 and hi >= lo):
        raise ValueError(f"invalid interval [{lo}, {hi}]: need 0 <= lo <= hi")
    if math.isinf(lo):
        raise ValueError("interval lower bound must be finite")


class Formula:
    """Base class of all formula nodes."""

    def children(self):
        return ()

    def parameters(self):
        """Names of free parameters, in first-occurrence order."""
        seen = {}
        stack = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Predicate) and isinstance(node.rhs, Param):
                seen.setdefault(node.rhs.name, None)
            stack.extend(reversed(node.children()))
        return tuple(seen)

    def bind(self, bindings):
        """Replace parameters named in ``bindings`` by their values."""
        return _bind(self, dict(bindings))

    def depth(self):
        return 1 + max((c.depth() for c in self.children()), default=0)

    def __str__(self):
        return to_string(self)

    # Operator sugar for building formulas in code.
    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __rshift__(self, other):
        return Implies(self, other)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class Predicate(Formula):
    signal: str
    op: str
    rhs: object  # float | Param | Label

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")
        if isinstance(self.rhs, Label):
            if self.op != "==":
                raise ValueError("discrete labels only support '=='")
        elif not isinstance(self.rhs, Param):
            object.__setattr__(self, "rhs", float(self.rhs))


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Always(Formula):
    lo: float
    hi: float
    arg: Formula

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        _check_interval(self.lo, self.hi)

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Eventually(Formula):
    lo: float
    hi: float
    arg: Formula

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        _check_interval(self.lo, self.hi)

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Until(Formula):
    lo: float
    hi: float
    left: Formula
    right: Formula

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        _check_interval(self.lo, self.hi)

    def children(self):
        return (self.left, self.right)


def _bind(node, b):
    if isinstance(node, Predicate):
        if isinstance(node.rhs, Param) and node.rhs.name in b:
            return Predicate(node.signal, node.op, float(b[node.rhs.name]))
        return node
    if isinstance(node, TrueF):
        return node
    if isinstance(node, Not):
        return Not(_bind(node.arg, b))
    if isinstance(node, (And, Or, Implies)):
        return type(node)(_bind(node.left, b), _bind(node.right, b))
    if isinstance(node, (Always, Eventually)):
        return type(node)(node.lo, node.hi, _bind(node.arg, b))
    if isinstance(node, Until):
        return Until(node.lo, node.hi, _bind(node.left, b), _bind(node.right, b))
    raise TypeError(f"not a formula node: {node!r}")


_BINOP = {And: "and", Or: "or", Implies: "=>"}
_TEMPORAL = {Always: "alw_", Eventually: "ev_"}


def to_string(node):
    """Fully parenthesized concrete syntax; re-parses to an equal AST."""
    if isinstance(node, TrueF):
        return "true"
    if isinstance(node, Predicate):
        rhs = node.rhs if isinstance(node.rhs, (Param, Label)) else _num(node.rhs)
        return f"({node.signal} {node.op} {rhs})"
    if isinstance(node, Not):
        return f"not {to_string(node.arg)}"
    if type(node) in _BINOP:
        return f"({to_string(node.left)} {_BINOP[type(node)]} {to_string(node.right)})"
    if type(node) in _TEMPORAL:
        return f"{_TEMPORAL[type(node)]}[{_num(node.lo)},{_num(node.hi)}] {to_string(node.arg)}"
    if isinstance(node, Until):
        return (f"({to_string(node.left)} until_[{_num(node.lo)},{_num(node.hi)}] "
                f"{to_string(node.right)})")
    raise TypeError(f"not a formula node: {node!r}")


def to_document(node):
    """Concrete syntax including a ``param`` header when needed."""
    params = node.parameters()
    body = to_string(node)
    return f"param {', '.join(params)};\n{body}" if params else body


# Convenience constructors, mostly for tests and templates.
def pred(signal, op, rhs):
    if isinstance(rhs, str):
        rhs = Label(rhs) if signal == "s_TL" else Param(rhs)
    return Predicate(signal, op, rhs)


def alw(lo, hi, arg):
    return Always(lo, hi, arg)


def ev(lo, hi, arg):
    return Eventually(lo, hi, arg)


def conj(*args):
    out = args[0]
    for a in args[1:]:
        out = And(out, a)
    return out
