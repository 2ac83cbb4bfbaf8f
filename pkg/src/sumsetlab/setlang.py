"""A small language for one-dimensional integer sets.

``parse`` turns text into a :class:`SetExpr` tree, ``to_text`` prints a tree
back in canonical form, and ``evaluate`` materializes a tree on a
``[1, N]`` window.

Grammar (LL(1))::

    set    := term (('|' | '&' | '\\') term)*          left to right
    term   := 'interval(' int ',' int ')'
            | 'ap(' int ',' int ',' int ')'             start, step, count
            | 'mod(' int ',' '{' int (',' int)* '}' ')'
            | 'sum(' set ',' set ')'
            | 'dilate(' set ',' int ')' | 'erode(' set ',' int ')'
            | 'union(' ident '=' int '..' int ',' set ')'
            | 'family(' ident (',' ident '=' int)* ')' ('.' ident)?
            | '!(' set ')'
            | '(' set ')'
    int    := sum of products of unary terms; '^' is right-associative and
              binds tighter than unary minus; '!' is postfix factorial
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union as TUnion

import numpy as np

from .errors import DSLSyntaxError, EvalError, EvalOverflow, UnknownFamily, WrongConvention
from .families import FAMILY_NAMES, FamilySpec, generate
from .lattice import Convention, LatticeSet, Window, make_set
from .morphology import dilate_cube, erode_cube, sumset

MAX_BITS = 4096
MAX_FACTORIAL = 500
MAX_ITERATIONS = 10**6


# -- integer expressions ---------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Neg:
    operand: "IntExpr"


@dataclass(frozen=True)
class Fact:
    operand: "IntExpr"


IntExpr = TUnion[Num, Var, BinOp, Neg, Fact]


# -- set expressions -------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: IntExpr
    hi: IntExpr


@dataclass(frozen=True)
class ArithProg:
    start: IntExpr
    step: IntExpr
    count: IntExpr


@dataclass(frozen=True)
class ModResidues:
    modulus: IntExpr
    residues: tuple


@dataclass(frozen=True)
class Union:
    left: "SetExpr"
    right: "SetExpr"


@dataclass(frozen=True)
class Intersect:
    left: "SetExpr"
    right: "SetExpr"


@dataclass(frozen=True)
class Difference:
    left: "SetExpr"
    right: "SetExpr"


@dataclass(frozen=True)
class Complement:
    body: "SetExpr"


@dataclass(frozen=True)
class Sum:
    left: "SetExpr"
    right: "SetExpr"


@dataclass(frozen=True)
class Dilate:
    body: "SetExpr"
    radius: IntExpr


@dataclass(frozen=True)
class Erode:
    body: "SetExpr"
    radius: IntExpr


@dataclass(frozen=True)
class IndexedUnion:
    var: str
    lo: IntExpr
    hi: IntExpr
    body: "SetExpr"


@dataclass(frozen=True)
class FamilyRef:
    name: str
    params: tuple = ()
    part: str | None = None


SetExpr = TUnion[Interval, ArithProg, ModResidues, Union, Intersect, Difference, Complement,
                 Sum, Dilate, Erode, IndexedUnion, FamilyRef]

_BINARY = {"|": Union, "&": Intersect, "\\": Difference}
_BINARY_SYM = {cls: sym for sym, cls in _BINARY.items()}


# -- lexer -------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<range>\.\.)
  | (?P<punct>[(),{}=|&\\!+\-*^.])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, punct, range, eof
    text: str
    pos: int


def _describe(kind: str, text: str) -> str:
    if kind == "num":
        return "integer"
    if kind == "ident":
        return "identifier"
    if kind == "eof":
        return "end of input"
    return repr(text)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._lex(text)
        self.i = 0

    # tokens
    def _lex(self, text: str) -> list[Token]:
        out = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                self._fail(pos, f"unexpected character {text[pos]!r}", ["a token"])
            kind = m.lastgroup
            if kind != "ws":
                out.append(Token("punct" if kind == "range" else kind, m.group(), pos))
            pos = m.end()
        out.append(Token("eof", "", len(text)))
        return out

    def _fail(self, pos: int, message: str, expected) -> None:
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1)
        raise DSLSyntaxError(message, pos, line, col, sorted(set(expected)))

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def _unexpected(self, expected) -> None:
        t = self.tok
        self._fail(t.pos, f"unexpected {_describe(t.kind, t.text)}", expected)

    def _eat(self, text: str) -> Token:
        t = self.tok
        if t.kind in ("punct", "ident") and t.text == text:
            self.i += 1
            return t
        self._unexpected([repr(text)])

    def _peek_is(self, text: str) -> bool:
        return self.tok.kind in ("punct", "ident") and self.tok.text == text

    def _ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self._unexpected(["identifier"])
        self.i += 1
        return t.text

    # sets
    def parse(self) -> SetExpr:
        e = self.set_expr()
        if self.tok.kind != "eof":
            self._unexpected(["'|'", "'&'", "'\\'", "end of input"])
        return e

    def set_expr(self) -> SetExpr:
        left = self.term()
        while self.tok.kind == "punct" and self.tok.text in _BINARY:
            cls = _BINARY[self.tok.text]
            self.i += 1
            left = cls(left, self.term())
        return left

    _TERM_START = ["'interval'", "'ap'", "'mod'", "'sum'", "'dilate'", "'erode'", "'union'",
                   "'family'", "'!'", "'('"]

    def term(self) -> SetExpr:
        t = self.tok
        if t.kind == "punct" and t.text == "!":
            self.i += 1
            self._eat("(")
            body = self.set_expr()
            self._eat(")")
            return Complement(body)
        if t.kind == "punct" and t.text == "(":
            self.i += 1
            body = self.set_expr()
            self._eat(")")
            return body
        if t.kind != "ident":
            self._unexpected(self._TERM_START)
        name = t.text
        handler = getattr(self, f"_term_{name}", None)
        if handler is None:
            self._unexpected(self._TERM_START)
        self.i += 1
        self._eat("(")
        node = handler()
        self._eat(")")
        if isinstance(node, FamilyRef) and self._peek_is("."):
            self.i += 1
            node = FamilyRef(node.name, node.params, self._ident())
        return node

    def _term_interval(self):
        lo = self.int_expr()
        self._eat(",")
        return Interval(lo, self.int_expr())

    def _term_ap(self):
        a = self.int_expr()
        self._eat(",")
        b = self.int_expr()
        self._eat(",")
        return ArithProg(a, b, self.int_expr())

    def _term_mod(self):
        m = self.int_expr()
        self._eat(",")
        self._eat("{")
        res = [self.int_expr()]
        while self._peek_is(","):
            self.i += 1
            res.append(self.int_expr())
        self._eat("}")
        return ModResidues(m, tuple(res))

    def _term_sum(self):
        a = self.set_expr()
        self._eat(",")
        return Sum(a, self.set_expr())

    def _term_dilate(self):
        a = self.set_expr()
        self._eat(",")
        return Dilate(a, self.int_expr())

    def _term_erode(self):
        a = self.set_expr()
        self._eat(",")
        return Erode(a, self.int_expr())

    def _term_union(self):
        var = self._ident()
        self._eat("=")
        lo = self.int_expr()
        self._eat("..")
        hi = self.int_expr()
        self._eat(",")
        return IndexedUnion(var, lo, hi, self.set_expr())

    def _term_family(self):
        name = self._ident()
        params = []
        while self._peek_is(","):
            self.i += 1
            key = self._ident()
            self._eat("=")
            params.append((key, self.int_expr()))
        return FamilyRef(name, tuple(params))

    # integers
    _INT_START = ["integer", "identifier", "'('", "'-'"]

    def int_expr(self) -> IntExpr:
        left = self.product()
        while self.tok.kind == "punct" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.product())
        return left

    def product(self) -> IntExpr:
        left = self.unary()
        while self._peek_is("*"):
            self.i += 1
            left = BinOp("*", left, self.unary())
        return left

    def unary(self) -> IntExpr:
        if self._peek_is("-"):
            self.i += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> IntExpr:
        base = self.postfix()
        if self._peek_is("^"):
            self.i += 1
            return BinOp("^", base, self.unary())
        return base

    def postfix(self) -> IntExpr:
        e = self.atom()
        # '!' followed by '(' starts a complement, never a factorial
        while self._peek_is("!") and not (self.tokens[self.i + 1].kind == "punct"
                                          and self.tokens[self.i + 1].text == "("):
            self.i += 1
            e = Fact(e)
        return e

    def atom(self) -> IntExpr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(int(t.text))
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if t.kind == "punct" and t.text == "(":
            self.i += 1
            e = self.int_expr()
            self._eat(")")
            return e
        self._unexpected(self._INT_START)


def parse(text: str) -> SetExpr:
    """Parse DSL text; raises :class:`DSLSyntaxError` with the offending position."""
    return _Parser(text).parse()


def parse_int(text: str) -> IntExpr:
    p = _Parser(text)
    e = p.int_expr()
    if p.tok.kind != "eof":
        p._unexpected(["end of input"])
    return e


# -- printer -------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2}
_NEG, _POW, _POST, _ATOM = 3, 4, 5, 6


def _int_prec(e: IntExpr) -> int:
    if isinstance(e, BinOp):
        return _POW if e.op == "^" else _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG
    if isinstance(e, Fact):
        return _POST
    return _ATOM


def _wrap(e: IntExpr, need: int) -> str:
    s = int_to_text(e)
    return f"({s})" if _int_prec(e) < need else s


def int_to_text(e: IntExpr) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _NEG)
    if isinstance(e, Fact):
        return _wrap(e.operand, _POST) + "!"
    if e.op == "^":
        return f"{_wrap(e.left, _POST)}^{_wrap(e.right, _NEG)}"
    p = _PREC[e.op]
    sep = "*" if e.op == "*" else f" {e.op} "
    return f"{_wrap(e.left, p)}{sep}{_wrap(e.right, p + 1)}"


def to_text(e: SetExpr) -> str:
    """Canonical text; ``parse(to_text(e)) == e`` for every tree."""
    if isinstance(e, Interval):
        return f"interval({int_to_text(e.lo)}, {int_to_text(e.hi)})"
    if isinstance(e, ArithProg):
        return f"ap({int_to_text(e.start)}, {int_to_text(e.step)}, {int_to_text(e.count)})"
    if isinstance(e, ModResidues):
        res = ", ".join(int_to_text(r) for r in e.residues)
        return f"mod({int_to_text(e.modulus)}, {{{res}}})"
    if isinstance(e, (Union, Intersect, Difference)):
        right = to_text(e.right)
        if isinstance(e.right, (Union, Intersect, Difference)):
            right = f"({right})"
        return f"{to_text(e.left)} {_BINARY_SYM[type(e)]} {right}"
    if isinstance(e, Complement):
        return f"!({to_text(e.body)})"
    if isinstance(e, Sum):
        return f"sum({to_text(e.left)}, {to_text(e.right)})"
    if isinstance(e, Dilate):
        return f"dilate({to_text(e.body)}, {int_to_text(e.radius)})"
    if isinstance(e, Erode):
        return f"erode({to_text(e.body)}, {int_to_text(e.radius)})"
    if isinstance(e, IndexedUnion):
        return (f"union({e.var}={int_to_text(e.lo)}..{int_to_text(e.hi)}, "
                f"{to_text(e.body)})")
    if isinstance(e, FamilyRef):
        args = "".join(f", {k}={int_to_text(v)}" for k, v in e.params)
        tail = f".{e.part}" if e.part else ""
        return f"family({e.name}{args}){tail}"
    raise TypeError(f"not a set expression: {e!r}")


# -- evaluation ----------------------------------------------------------------

def _check_size(value: int, e) -> int:
    if value.bit_length() > MAX_BITS:
        raise EvalOverflow(int_to_text(e), f"value exceeds {MAX_BITS} bits")
    return value


def eval_int(e: IntExpr, env: Mapping[str, int] | None = None) -> int:
    env = env or {}
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise EvalError(f"unbound variable {e.name!r}")
        return env[e.name]
    if isinstance(e, Neg):
        return -eval_int(e.operand, env)
    if isinstance(e, Fact):
        n = eval_int(e.operand, env)
        if n < 0:
            raise EvalError(f"factorial of negative number in {int_to_text(e)}")
        if n > MAX_FACTORIAL:
            raise EvalOverflow(int_to_text(e), f"factorial argument above {MAX_FACTORIAL}")
        return math.factorial(n)
    a, b = eval_int(e.left, env), eval_int(e.right, env)
    if e.op == "+":
        return _check_size(a + b, e)
    if e.op == "-":
        return _check_size(a - b, e)
    if e.op == "*":
        if a.bit_length() + b.bit_length() > MAX_BITS + 1:
            raise EvalOverflow(int_to_text(e), f"product exceeds {MAX_BITS} bits")
        return _check_size(a * b, e)
    if b < 0:
        raise EvalError(f"negative exponent in {int_to_text(e)}")
    if abs(a) > 1 and b * (abs(a).bit_length() - 1) > MAX_BITS:
        raise EvalOverflow(int_to_text(e), f"power exceeds {MAX_BITS} bits")
    return _check_size(a**b, e)


class _Evaluator:
    def __init__(self, window: Window):
        if window.convention is not Convention.CLASSICAL:
            raise WrongConvention("set expressions evaluate on Classical1D windows")
        self.w = window
        self.iterations = 0
        self._families: dict = {}

    def bits(self, e: SetExpr, env: dict) -> np.ndarray:
        w = self.w
        if isinstance(e, Interval):
            lo, hi = eval_int(e.lo, env), eval_int(e.hi, env)
            out = np.zeros(w.shape, dtype=bool)
            lo, hi = max(lo, w.low), min(hi, w.high)
            if lo <= hi:
                out[lo - w.low:hi - w.low + 1] = True
            return out
        if isinstance(e, ArithProg):
            return self._ap(eval_int(e.start, env), eval_int(e.step, env), eval_int(e.count, env))
        if isinstance(e, ModResidues):
            m = eval_int(e.modulus, env)
            if m < 1:
                raise EvalError("modulus must be positive")
            res = sorted({eval_int(r, env) % m for r in e.residues})
            if m > w.high:
                # coordinates are positive, so x mod m = x
                return np.isin(w.axis_coords(), [r for r in res if r <= w.high])
            table = np.zeros(m, dtype=bool)
            table[res] = True
            return table[w.axis_coords() % m]
        if isinstance(e, (Union, Intersect, Difference)):
            a, b = self.bits(e.left, env), self.bits(e.right, env)
            if isinstance(e, Union):
                return a | b
            if isinstance(e, Intersect):
                return a & b
            return a & ~b
        if isinstance(e, Complement):
            return ~self.bits(e.body, env)
        if isinstance(e, Sum):
            a = make_set(w, self.bits(e.left, env))
            b = make_set(w, self.bits(e.right, env))
            return sumset(a, b).bits
        if isinstance(e, (Dilate, Erode)):
            r = eval_int(e.radius, env)
            body = make_set(w, self.bits(e.body, env))
            op = dilate_cube if isinstance(e, Dilate) else erode_cube
            return op(body, r).bits
        if isinstance(e, IndexedUnion):
            lo, hi = eval_int(e.lo, env), eval_int(e.hi, env)
            if lo > hi:
                raise EvalError(f"empty range {lo}..{hi} in union over {e.var}")
            self.iterations += hi - lo + 1
            if self.iterations > MAX_ITERATIONS:
                raise EvalOverflow(to_text(e), f"more than {MAX_ITERATIONS} union iterations")
            acc = np.zeros(w.shape, dtype=bool)
            inner = dict(env)
            for v in range(lo, hi + 1):
                inner[e.var] = v
                acc |= self.bits(e.body, inner)
            return acc
        if isinstance(e, FamilyRef):
            return self._family(e, env)
        raise TypeError(f"not a set expression: {e!r}")

    def _ap(self, start: int, step: int, count: int) -> np.ndarray:
        w = self.w
        out = np.zeros(w.shape, dtype=bool)
        if count <= 0:
            return out
        if step == 0:
            if w.low <= start <= w.high:
                out[start - w.low] = True
            return out
        # indices i in [0, count) with start + i*step inside the window
        lo_v, hi_v = (w.low - start, w.high - start) if step > 0 else (start - w.high, start - w.low)
        s = abs(step)
        i_lo = max(0, -(-lo_v // s))
        i_hi = min(count - 1, hi_v // s)
        if i_lo <= i_hi:
            vals = start + step * np.arange(i_lo, i_hi + 1, dtype=np.int64)
            out[vals - w.low] = True
        return out

    def _family(self, e: FamilyRef, env: dict) -> np.ndarray:
        if e.name not in FAMILY_NAMES:
            raise UnknownFamily(e.name)
        params = tuple((k, eval_int(v, env)) for k, v in e.params)
        key = (e.name, params)
        if key not in self._families:
            self._families[key] = generate(FamilySpec(e.name, params), self.w)
        parts = self._families[key]
        part = e.part or "A"
        if part not in parts:
            raise EvalError(f"family {e.name} has parts {sorted(parts)}, not {part!r}")
        return parts[part].bits


def evaluate(e: SetExpr | str, window: Window) -> LatticeSet:
    """Materialize an expression (or DSL text) on a ``[1, N]`` window."""
    if isinstance(e, str):
        e = parse(e)
    ev = _Evaluator(window)
    return make_set(window, ev.bits(e, {}))
