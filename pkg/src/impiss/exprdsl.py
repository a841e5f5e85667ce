"""Small expression language for flow maps, jump maps, measures and rates.

Grammar (precedence from loose to tight)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

Built-in functions: abs, sign, exp, ln, sqrt, min, max, if_le.
``if_le(a, b, x, y)`` is ``x`` when ``a <= b`` and ``y`` otherwise; only the
selected branch is evaluated.  ``sign(0) == 0``.

Expressions are immutable trees.  ``compile_expr`` turns a tree into a plain
Python function over positional floats; the tree walker ``evaluate`` and the
compiled function perform the same IEEE operations in the same order, so
their results agree bit for bit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Sequence, Tuple, Union

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "IfLe",
    "ExprSyntaxError", "UnknownIdentifier", "DomainError", "NonFiniteResult",
    "parse", "evaluate", "to_text", "compile_expr", "compile_vector",
    "free_vars", "substitute", "FUNCTIONS",
]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ValueError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class DomainError(ArithmeticError):
    """Raised when an operation leaves its real domain (ln of a negative,
    division by zero, non-integer power of a negative base)."""


class NonFiniteResult(DomainError):
    """The result is NaN, typically produced by inf - inf after overflow."""


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg, abs, sign, exp, ln, sqrt
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^ min max
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class IfLe:
    lhs: "Expr"
    rhs: "Expr"
    then: "Expr"
    other: "Expr"


Expr = Union[Const, Var, Unary, Binary, IfLe]

FUNCTIONS: Dict[str, int] = {
    "abs": 1, "sign": 1, "exp": 1, "ln": 1, "sqrt": 1,
    "min": 2, "max": 2, "if_le": 4,
}
CONSTANTS = {"pi": math.pi}


# ------------------------------------------------------------ numeric kernels
# Shared by the tree walker and by compiled code.


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _pow(a: float, b: float) -> float:
    if a < 0.0 and b != math.floor(b):
        raise DomainError(f"non-integer power {b!r} of negative base {a!r}")
    if a == 0.0 and b < 0.0:
        raise DomainError("zero raised to a negative power")
    try:
        return a ** b
    except OverflowError:
        if a < 0.0 and int(b) % 2 == 1:
            return -math.inf
        return math.inf


def _ln(a: float) -> float:
    if a <= 0.0:
        raise DomainError(f"ln of non-positive value {a!r}")
    return math.log(a)


def _sqrt(a: float) -> float:
    if a < 0.0:
        raise DomainError(f"sqrt of negative value {a!r}")
    return math.sqrt(a)


def _exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _sign(a: float) -> float:
    if a > 0.0:
        return 1.0
    if a < 0.0:
        return -1.0
    return 0.0


def _min(a: float, b: float) -> float:
    return a if a <= b else b


def _max(a: float, b: float) -> float:
    return a if a >= b else b


_UNARY = {"abs": abs, "sign": _sign, "exp": _exp, "ln": _ln, "sqrt": _sqrt}
_BINFN = {"min": _min, "max": _max}


# ----------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        out.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            shown = val if kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {value!r}, found {shown!r}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownIdentifier(val, pos)
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[val]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{val} expects {arity} argument(s), got {len(args)}", pos)
                if arity == 1:
                    return Unary(val, args[0])
                if arity == 2:
                    return Binary(val, args[0], args[1])
                return IfLe(*args)
            if val in self.variables:
                return Var(val)
            if val in CONSTANTS:
                return Const(CONSTANTS[val])
            raise UnknownIdentifier(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        shown = val if kind != "end" else "end of input"
        raise ExprSyntaxError(f"unexpected token {shown!r}", pos)


def parse(text: str, variables: Sequence[str]) -> Expr:
    """Parse ``text`` with the declared variable names."""
    return _Parser(text, variables).parse()


# ------------------------------------------------------------------ evaluate


def _eval(node: Expr, env: Mapping[str, float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise UnknownIdentifier(node.name, -1) from None
    if isinstance(node, Unary):
        a = _eval(node.arg, env)
        if node.op == "neg":
            return -a
        return _UNARY[node.op](a)
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return _div(a, b)
        if op == "^":
            return _pow(a, b)
        return _BINFN[op](a, b)
    if isinstance(node, IfLe):
        if _eval(node.lhs, env) <= _eval(node.rhs, env):
            return _eval(node.then, env)
        return _eval(node.other, env)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Expr, env: Mapping[str, float]) -> float:
    """Evaluate with IEEE doubles.  NaN results raise ``NonFiniteResult``."""
    v = _eval(node, env)
    if v != v:
        raise NonFiniteResult("expression evaluated to NaN")
    return v


# ------------------------------------------------------------------- printer

_INFIX = {"+", "-", "*", "/", "^"}


def to_text(node: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(node, Const):
        v = node.value
        if v == math.pi:
            return "pi"
        if v < 0 or math.isinf(v) or v != v:
            raise ValueError(f"constant {v!r} has no literal form")
        return repr(float(v))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text(node.arg)})"
        return f"{node.op}({to_text(node.arg)})"
    if isinstance(node, Binary):
        if node.op in _INFIX:
            return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
        return f"{node.op}({to_text(node.left)}, {to_text(node.right)})"
    if isinstance(node, IfLe):
        parts = ", ".join(to_text(x) for x in (node.lhs, node.rhs, node.then, node.other))
        return f"if_le({parts})"
    raise TypeError(f"not an expression node: {node!r}")


def free_vars(node: Expr) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Unary):
        return free_vars(node.arg)
    if isinstance(node, Binary):
        return free_vars(node.left) | free_vars(node.right)
    return free_vars(node.lhs) | free_vars(node.rhs) | free_vars(node.then) | free_vars(node.other)


def substitute(node: Expr, repl: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    if isinstance(node, Var):
        return repl.get(node.name, node)
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.arg, repl))
    if isinstance(node, Binary):
        return Binary(node.op, substitute(node.left, repl), substitute(node.right, repl))
    return IfLe(*(substitute(x, repl) for x in (node.lhs, node.rhs, node.then, node.other)))


# ------------------------------------------------------------------- compile


def _py(node: Expr, names: Mapping[str, str]) -> str:
    if isinstance(node, Const):
        return repr(node.value) if math.isfinite(node.value) else f"float({str(node.value)!r})"
    if isinstance(node, Var):
        if node.name not in names:
            raise UnknownIdentifier(node.name, -1)
        return names[node.name]
    if isinstance(node, Unary):
        a = _py(node.arg, names)
        if node.op == "neg":
            return f"(-{a})"
        return f"_{node.op}({a})"
    if isinstance(node, Binary):
        a, b = _py(node.left, names), _py(node.right, names)
        op = node.op
        if op in ("+", "-", "*"):
            return f"({a} {op} {b})"
        if op == "/":
            return f"_div({a}, {b})"
        if op == "^":
            return f"_pow({a}, {b})"
        return f"_{op}({a}, {b})"
    if isinstance(node, IfLe):
        return (f"({_py(node.then, names)} if {_py(node.lhs, names)} <= "
                f"{_py(node.rhs, names)} else {_py(node.other, names)})")
    raise TypeError(f"not an expression node: {node!r}")


_NAMESPACE = {
    "_div": _div, "_pow": _pow, "_ln": _ln, "_sqrt": _sqrt, "_exp": _exp,
    "_sign": _sign, "_abs": abs, "_min": _min, "_max": _max,
    "NonFiniteResult": NonFiniteResult,
}


def _build(body_exprs: Sequence[Expr], args: Sequence[str], vector: bool) -> Callable:
    names = {a: f"a{i}" for i, a in enumerate(args)}
    params = ", ".join(names[a] for a in args)
    lines = [f"def _fn({params}):"]
    outs = []
    for j, e in enumerate(body_exprs):
        lines.append(f"    v{j} = {_py(e, names)}")
        lines.append(f"    if v{j} != v{j}: raise NonFiniteResult('NaN in component {j}')")
        outs.append(f"v{j}")
    if vector:
        lines.append(f"    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})")
    else:
        lines.append(f"    return {outs[0]}")
    ns = dict(_NAMESPACE)
    exec("\n".join(lines), ns)  # source is generated from the AST only
    return ns["_fn"]


def compile_expr(node: Expr, args: Sequence[str]) -> Callable[..., float]:
    """Compile to ``fn(*values)`` taking floats in the order of ``args``."""
    return _build([node], args, vector=False)


def compile_vector(nodes: Sequence[Expr], args: Sequence[str]) -> Callable[..., Tuple[float, ...]]:
    """Compile several expressions sharing one argument list into one function
    returning a tuple."""
    return _build(list(nodes), args, vector=True)
