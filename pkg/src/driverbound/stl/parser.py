"""Recursive-descent parser for the textual formula syntax.

Grammar (lowest precedence first)::

    document := ('param' IDENT (',' IDENT)* ';')* expr
    expr     := disj ('=>' expr)?
    disj     := conj ('or' conj)*
    conj     := until ('and' until)*
    until    := unary ('until_' interval unary)?
    unary    := 'not' unary | ('alw_' | 'ev_') interval unary | atom
    atom     := 'true' | '(' expr ')' | IDENT CMP (NUMBER | IDENT)
    interval := '[' NUMBER ',' (NUMBER | 'inf') ']'

Parameters are bare identifiers on the right of a comparison.  When a
``param`` header is present, every such identifier must be declared in it.
"""

import math
import re

from driverbound.stl.formula import (
    Always, And, Eventually, Implies, Label, Not, Or, Param, Predicate, TrueF,
    Until,
)
from driverbound.trace import CHANNELS, LIGHT_LABELS


class STLSyntaxError(ValueError):
    def __init__(self, msg, line, col):
        super().__init__(f"{msg} (line {line}, column {col})")
        self.line = line
        self.col = col


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?|\.[0-9]+(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|=>|<|>|\(|\)|\[|\]|,|;|-)
""", re.VERBOSE)

_KEYWORDS = {"param", "not", "and", "or", "true", "alw_", "ev_", "until_", "inf"}


def _tokenize(text):
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            nl = value.count("\n")
            if nl:
                line += nl
                line_start = pos + value.rfind("\n") + 1
        else:
            if kind == "ident" and value in _KEYWORDS:
                kind = value
            elif kind == "op":
                kind = value
            tokens.append((kind, value, line, col))
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text, signals):
        self.toks = _tokenize(text)
        self.i = 0
        self.signals = set(signals)
        self.declared = None

    def peek(self):
        return self.toks[self.i][0]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.toks[self.i]
        return STLSyntaxError(msg, tok[2], tok[3])

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            shown = tok[1] or "end of input"
            raise self.error(f"expected {kind!r}, found {shown!r}", tok)
        return tok

    def document(self):
        while self.peek() == "param":
            self.next()
            if self.declared is None:
                self.declared = set()
            self.declared.add(self.expect("ident")[1])
            while self.peek() == ",":
                self.next()
                self.declared.add(self.expect("ident")[1])
            self.expect(";")
        node = self.expr()
        if self.peek() != "eof":
            raise self.error(f"unexpected {self.toks[self.i][1]!r}")
        return node

    def expr(self):
        left = self.disj()
        if self.peek() == "=>":
            self.next()
            return Implies(left, self.expr())
        return left

    def disj(self):
        node = self.conj()
        while self.peek() == "or":
            self.next()
            node = Or(node, self.conj())
        return node

    def conj(self):
        node = self.until()
        while self.peek() == "and":
            self.next()
            node = And(node, self.until())
        return node

    def until(self):
        left = self.unary()
        if self.peek() == "until_":
            tok = self.next()
            lo, hi = self.interval(tok)
            return Until(lo, hi, left, self.unary())
        return left

    def unary(self):
        kind = self.peek()
        if kind == "not":
            self.next()
            return Not(self.unary())
        if kind in ("alw_", "ev_"):
            tok = self.next()
            lo, hi = self.interval(tok)
            cls = Always if kind == "alw_" else Eventually
            return cls(lo, hi, self.unary())
        return self.atom()

    def interval(self, op_tok):
        self.expect("[")
        lo = self.number()
        self.expect(",")
        if self.peek() == "inf":
            self.next()
            hi = math.inf
        else:
            hi = self.number()
        self.expect("]")
        if lo < 0:
            raise self.error(f"negative interval bound {lo}", op_tok)
        if hi < lo:
            raise self.error(f"inverted interval [{lo}, {hi}]", op_tok)
        return lo, hi

    def number(self):
        sign = 1.0
        if self.peek() == "-":
            self.next()
            sign = -1.0
        if self.peek() == "inf":
            self.next()
            return sign * math.inf
        return sign * float(self.expect("num")[1])

    def atom(self):
        tok = self.toks[self.i]
        if tok[0] == "true":
            self.next()
            return TrueF()
        if tok[0] == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        if tok[0] == "ident":
            return self.predicate()
        raise self.error(f"unexpected {tok[1] or 'end of input'!r}")

    def predicate(self):
        sig_tok = self.next()
        signal = sig_tok[1]
        if signal not in self.signals:
            raise self.error(f"unknown signal {signal!r}", sig_tok)
        op_tok = self.next()
        if op_tok[0] not in ("<", "<=", ">", ">=", "=="):
            raise self.error(f"expected comparator, found {op_tok[1]!r}", op_tok)
        op = op_tok[0]
        rhs_tok = self.toks[self.i]
        if signal == "s_TL":
            self.expect("ident")
            if rhs_tok[1] not in LIGHT_LABELS or op != "==":
                raise self.error("s_TL only supports '== G|Y|R'", rhs_tok)
            return Predicate(signal, op, Label(rhs_tok[1]))
        if rhs_tok[0] == "ident":
            self.next()
            name = rhs_tok[1]
            if self.declared is not None and name not in self.declared:
                raise self.error(f"undeclared parameter {name!r}", rhs_tok)
            return Predicate(signal, op, Param(name))
        return Predicate(signal, op, self.number())


def parse(text, signals=CHANNELS):
    """Parse formula text into an AST (see module docstring for the grammar)."""
    return _Parser(text, signals).document()
