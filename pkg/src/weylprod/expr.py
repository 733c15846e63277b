"""Analytic scalar fields on R^n: parsing, printing, evaluation and exact
symbolic partial derivatives.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' integer)? | '-' factor
    atom   := number | ident | func '(' expr ')' | '(' expr ')'
    func   := exp | ln | sin | cos
    ident  := 'x' digit+

Variables are 1-based (``x1`` .. ``xn``). Only integer exponents are allowed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

FUNCS = ("exp", "ln", "sin", "cos")


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, msg: str, offset: int, src: str = ""):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset
        self.src = src


class DomainError(ExprError, ArithmeticError):
    def __init__(self, msg: str, point=None):
        where = "" if point is None else f" at point {tuple(float(v) for v in point)}"
        super().__init__(msg + where)
        self.point = None if point is None else tuple(point)


# -- AST ---------------------------------------------------------------------


class Node:
    __slots__ = ()

    def children(self) -> tuple["Node", ...]:
        return ()


@dataclass(frozen=True)
class Num(Node):
    value: float

    def __hash__(self):
        return hash(("num", self.value))


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based

    def __hash__(self):
        return hash(("var", self.index))


@dataclass(frozen=True)
class Neg(Node):
    arg: Node
    _h: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("neg", self.arg)))

    def __hash__(self):
        return self._h

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * /
    left: Node
    right: Node
    _h: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash((self.op, self.left, self.right)))

    def __hash__(self):
        return self._h

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    _h: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("^", self.base, self.exponent)))

    def __hash__(self):
        return self._h

    def children(self):
        return (self.base,)


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node
    _h: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash((self.name, self.arg)))

    def __hash__(self):
        return self._h

    def children(self):
        return (self.arg,)


ZERO = Num(0.0)
ONE = Num(1.0)


def _is_num(node: Node, value: float | None = None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


# Smart constructors: constant folding and 0/1 identities only.


def add(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return BinOp("-", a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return neg(b)
    if _is_num(b, -1.0):
        return neg(a)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if isinstance(b, Num):
        a, b = b, a
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    if _is_num(b, 1.0):
        return a
    if _is_num(a, 0.0) and not _is_num(b, 0.0):
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def power(a: Node, k: int) -> Node:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Num) and (a.value != 0.0 or k > 0):
        try:
            return Num(a.value**k)
        except OverflowError:
            pass
    return Pow(a, k)


def func(name: str, a: Node) -> Node:
    if isinstance(a, Num):
        if name == "exp" and a.value == 0.0:
            return ONE
        if name == "ln" and a.value == 1.0:
            return ZERO
        if name == "sin" and a.value == 0.0:
            return ZERO
        if name == "cos" and a.value == 0.0:
            return ONE
    return Func(name, a)


# -- differentiation -----------------------------------------------------------


@lru_cache(maxsize=200_000)
def _d(node: Node, var: int) -> Node:
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == var else ZERO
    if isinstance(node, Neg):
        return neg(_d(node.arg, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a, var), _d(b, var)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule
        if _is_num(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(node, Pow):
        du = _d(node.base, var)
        if _is_num(du, 0.0):
            return ZERO
        k = node.exponent
        return mul(mul(Num(float(k)), power(node.base, k - 1)), du)
    if isinstance(node, Func):
        du = _d(node.arg, var)
        if _is_num(du, 0.0):
            return ZERO
        u = node.arg
        if node.name == "exp":
            return mul(node, du)
        if node.name == "ln":
            return div(du, u)
        if node.name == "sin":
            return mul(func("cos", u), du)
        if node.name == "cos":
            return neg(mul(func("sin", u), du))
    raise TypeError(f"unknown node {node!r}")


def variables(node: Node) -> frozenset[int]:
    out: set[int] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n.index)
        stack.extend(n.children())
    return frozenset(out)


# -- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(v: float) -> str:
    if not math.isfinite(v):
        raise ExprError(f"cannot print non-finite constant {v}")
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_str(node: Node) -> str:
    """Print ``node`` so that parsing the result yields an AST-equal tree."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Func):
        return f"{node.name}({to_str(node.arg)})"
    if isinstance(node, Pow):
        base = node.base
        s = to_str(base)
        if not (isinstance(base, (Var, Func)) or (isinstance(base, Num) and base.value >= 0)):
            s = f"({s})"
        return f"{s}^{node.exponent}"
    if isinstance(node, Neg):
        arg = node.arg
        s = to_str(arg)
        if isinstance(arg, BinOp) or isinstance(arg, Num):
            s = f"({s})"
        return f"-{s}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        ls, rs = to_str(node.left), to_str(node.right)
        if isinstance(node.left, BinOp) and _PREC[node.left.op] < p:
            ls = f"({ls})"
        if isinstance(node.right, BinOp) and _PREC[node.right.op] <= p:
            rs = f"({rs})"
        return f"{ls} {node.op} {rs}"
    raise TypeError(f"unknown node {node!r}")


# -- parsing -------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos == len(src):
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", len(src[:pos].encode()), src)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    toks.append(("end", "", len(src.encode())))
    return toks


class _Parser:
    def __init__(self, src: str, nvars: int):
        self.src = src
        self.nvars = nvars
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "end":
            got = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, got {got}", off, self.src)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", off, self.src)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        kind, text, off = self.peek()
        if kind == "op" and text == "-":
            self.take()
            arg = self.factor()
            return Num(-arg.value) if isinstance(arg, Num) else Neg(arg)
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            sign = 1
            if self.peek()[1] == "-" and self.peek()[0] == "op":
                self.take()
                sign = -1
            kind, text, off = self.take()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be an integer literal", off, self.src)
            return Pow(base, sign * int(text))
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "id":
            if text in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            m = re.fullmatch(r"x(\d+)", text)
            if m is None:
                raise ParseError(f"unknown identifier {text!r}", off, self.src)
            idx = int(m.group(1))
            if idx < 1 or idx > self.nvars:
                raise ParseError(
                    f"variable {text} out of range (nvars={self.nvars})", off, self.src
                )
            return Var(idx)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        got = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {got}", off, self.src)


# -- evaluation ----------------------------------------------------------------


def _eval(node: Node, x: Sequence[float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index - 1])
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0.0:
            raise DomainError("division by zero", x)
        return a / b
    if isinstance(node, Pow):
        a = _eval(node.base, x)
        if a == 0.0 and node.exponent < 0:
            raise DomainError("division by zero", x)
        return a**node.exponent
    if isinstance(node, Func):
        a = _eval(node.arg, x)
        if node.name == "ln":
            if a <= 0.0:
                raise DomainError(f"ln of nonpositive argument {a}", x)
            return math.log(a)
        if node.name == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                raise DomainError("exp overflow", x) from None
        return math.sin(a) if node.name == "sin" else math.cos(a)
    raise TypeError(f"unknown node {node!r}")


# -- code generation -----------------------------------------------------------


def _codegen(roots: Sequence[Node], name: str = "_jet") -> Callable[[Sequence[float]], list]:
    """Compile ``roots`` into one scalar function with common subexpressions shared.

    Domain violations surface as :class:`DomainError`.
    """
    names: dict[Node, str] = {}
    lines: list[str] = []

    def emit(node: Node) -> str:
        if isinstance(node, Num):
            return f"({node.value!r})" if node.value < 0 else repr(node.value)
        if isinstance(node, Var):
            return f"x[{node.index - 1}]"
        if node in names:
            return names[node]
        if isinstance(node, Neg):
            code = f"-{emit(node.arg)}"
        elif isinstance(node, BinOp):
            a, b = emit(node.left), emit(node.right)
            code = f"{a} {node.op} {b}"
        elif isinstance(node, Pow):
            code = f"{emit(node.base)} ** {node.exponent}"
        elif isinstance(node, Func):
            fn = "log" if node.name == "ln" else node.name
            code = f"_m.{fn}({emit(node.arg)})"
        else:
            raise TypeError(node)
        var = f"t{len(names)}"
        names[node] = var
        lines.append(f"    {var} = {code}")
        return var

    outs = [emit(r) for r in roots]
    src = f"def {name}(x):\n" + "\n".join(lines) + f"\n    return [{', '.join(outs)}]\n"
    ns: dict = {"_m": math}
    exec(compile(src, f"<{name}>", "exec"), ns)
    raw = ns[name]

    def fn(x):
        try:
            return raw(x)
        except ZeroDivisionError:
            raise DomainError("division by zero", x) from None
        except ValueError as exc:  # math.log domain
            raise DomainError(f"math domain error ({exc})", x) from None
        except OverflowError:
            raise DomainError("overflow", x) from None

    fn.source = src  # type: ignore[attr-defined]
    return fn


# -- public field type -----------------------------------------------------------


class ScalarField:
    """An analytic scalar field on R^nvars given by an expression tree.

    Immutable; ``diff`` returns a new field.
    """

    __slots__ = ("ast", "nvars", "_jets")

    def __init__(self, ast: Node, nvars: int):
        if nvars < 1:
            raise ExprError("nvars must be positive")
        used = variables(ast)
        if used and max(used) > nvars:
            raise ExprError(f"variable x{max(used)} out of range (nvars={nvars})")
        object.__setattr__(self, "ast", ast)
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "_jets", {})

    def __setattr__(self, key, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def constant(cls, value: float, nvars: int) -> "ScalarField":
        return cls(Num(float(value)), nvars)

    def __str__(self) -> str:
        return to_str(self.ast)

    def __repr__(self) -> str:
        return f"ScalarField({to_str(self.ast)!r}, nvars={self.nvars})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ScalarField) and self.nvars == other.nvars and self.ast == other.ast

    def __hash__(self):
        return hash((self.ast, self.nvars))

    def variables(self) -> frozenset[int]:
        """1-based indices of the variables that occur in the expression."""
        return variables(self.ast)

    def is_zero(self) -> bool:
        return _is_num(self.ast, 0.0)

    def diff(self, var: int) -> "ScalarField":
        if not 1 <= var <= self.nvars:
            raise ExprError(f"variable index {var} out of range (nvars={self.nvars})")
        return ScalarField(_d(self.ast, var), self.nvars)

    def eval(self, point: Sequence[float]) -> float:
        if len(point) != self.nvars:
            raise ExprError(f"point has length {len(point)}, expected {self.nvars}")
        return _eval(self.ast, point)

    __call__ = eval

    def jet(self, point: Sequence[float], order: int = 2):
        """Value, gradient and (for order >= 2) Hessian at ``point``.

        The derivative expressions are built and compiled once per order.
        """
        fn = self._jets.get(order)
        if fn is None:
            fn = self._build_jet(order)
            self._jets[order] = fn
        if len(point) != self.nvars:
            raise ExprError(f"point has length {len(point)}, expected {self.nvars}")
        vals = fn(point)
        n = self.nvars
        out = [vals[0], np.array(vals[1 : n + 1], dtype=float)]
        if order >= 2:
            hess = np.empty((n, n))
            k = n + 1
            for i in range(n):
                for j in range(i, n):
                    hess[i, j] = hess[j, i] = vals[k]
                    k += 1
            out.append(hess)
        return tuple(out)

    def _build_jet(self, order: int):
        n = self.nvars
        roots = [self.ast]
        firsts = [_d(self.ast, i + 1) for i in range(n)]
        roots += firsts
        if order >= 2:
            for i in range(n):
                for j in range(i, n):
                    roots.append(_d(firsts[i], j + 1))
        return _codegen(roots)


def parse(src: str, nvars: int) -> ScalarField:
    """Parse ``src`` into a field on R^nvars.

    Raises
    ------
    ParseError
        On syntax errors, unknown identifiers or out-of-range variables; the
        byte offset of the offending token is in ``err.offset``.
    """
    if not src or not src.strip():
        raise ParseError("empty expression", 0, src)
    return ScalarField(_Parser(src, nvars).parse(), nvars)


def var(index: int, nvars: int) -> ScalarField:
    return ScalarField(Var(index), nvars)
