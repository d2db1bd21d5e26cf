"""Integer constraint expressions over tuning parameters.

Grammar (whitespace is insignificant)::

    expr   := or
    or     := and ("||" and)*
    and    := cmp ("&&" cmp)*
    cmp    := sum (("==" | "!=" | "<=" | ">=" | "<" | ">") sum)?
    sum    := term (("+" | "-") term)*
    term   := factor (("*" | "/" | "%") factor)*
    factor := "!" factor | "(" expr ")" | integer | identifier

Values are Python ints. Comparisons and logical operators yield 1 or 0, so
``(A > 2) * 4`` is a legal integer expression. Division truncates toward zero
and the remainder takes the sign of the dividend.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Callable, Union

from .errors import ConstraintSyntaxError, DivisionByZero, UnknownParameter

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[<>+\-*/%!()])
    """,
    re.VERBOSE,
)

_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "op", "bad" or "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            tokens.append(Token("bad", text[pos], pos))
            pos += 1
            continue
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# --- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Name:
    id: str

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Not:
    operand: "Node"

    def __str__(self) -> str:
        return f"!{_wrap(self.operand)}"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} {self.op} {_wrap(self.right)}"


Node = Union[Num, Name, Not, BinOp]


def _wrap(node: Node) -> str:
    return f"({node})" if isinstance(node, BinOp) else str(node)


def identifiers(node: Node) -> set[str]:
    if isinstance(node, Name):
        return {node.id}
    if isinstance(node, Not):
        return identifiers(node.operand)
    if isinstance(node, BinOp):
        return identifiers(node.left) | identifiers(node.right)
    return set()


# --- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, expected: Iterable[str]):
        raise ConstraintSyntaxError(self.text, self.tok.pos, sorted(set(expected)))

    def accept(self, *ops: str) -> str | None:
        if self.tok.kind == "op" and self.tok.text in ops:
            self.i += 1
            return self.tokens[self.i - 1].text
        return None

    def parse(self) -> Node:
        node = self.or_()
        if self.tok.kind != "end":
            # Everything that could have continued the expression.
            self.fail(["||", "&&", *_CMP_OPS, "+", "-", "*", "/", "%", "end of input"])
        return node

    def or_(self) -> Node:
        node = self.and_()
        while self.accept("||"):
            node = BinOp("||", node, self.and_())
        return node

    def and_(self) -> Node:
        node = self.cmp()
        while self.accept("&&"):
            node = BinOp("&&", node, self.cmp())
        return node

    def cmp(self) -> Node:
        node = self.sum()
        op = self.accept(*_CMP_OPS)
        if op:
            node = BinOp(op, node, self.sum())
        return node

    def sum(self) -> Node:
        node = self.term()
        while op := self.accept("+", "-"):
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while op := self.accept("*", "/", "%"):
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        tok = self.tok
        if self.accept("!"):
            return Not(self.factor())
        if self.accept("("):
            node = self.or_()
            if not self.accept(")"):
                self.fail([")", "||", "&&", *_CMP_OPS, "+", "-", "*", "/", "%"])
            return node
        if tok.kind == "int":
            self.i += 1
            return Num(int(tok.text))
        if tok.kind == "ident":
            self.i += 1
            return Name(tok.text)
        self.fail(["integer", "identifier", "(", "!"])


# --- evaluation -------------------------------------------------------------


def _tdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _tmod(a: int, b: int) -> int:
    return a - b * _tdiv(a, b)


def evaluate(node: Node, env: Mapping[str, int]) -> int:
    """Tree-walking evaluator; the reference semantics for compiled expressions."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        return env[node.id]
    if isinstance(node, Not):
        return int(not evaluate(node.operand, env))
    op = node.op
    if op == "&&":
        return int(bool(evaluate(node.left, env)) and bool(evaluate(node.right, env)))
    if op == "||":
        return int(bool(evaluate(node.left, env)) or bool(evaluate(node.right, env)))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op in ("/", "%"):
        if b == 0:
            raise DivisionByZero(str(node))
        return _tdiv(a, b) if op == "/" else _tmod(a, b)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise AssertionError(op)


def _div(a, b, where):
    if b == 0:
        raise DivisionByZero(where)
    return _tdiv(a, b)


def _mod(a, b, where):
    if b == 0:
        raise DivisionByZero(where)
    return _tmod(a, b)


def _to_python(node: Node, slots: dict[str, str]) -> str:
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, Name):
        return slots[node.id]
    if isinstance(node, Not):
        return f"(0 if {_to_python(node.operand, slots)} else 1)"
    a = _to_python(node.left, slots)
    b = _to_python(node.right, slots)
    op = node.op
    if op == "&&":
        return f"(1 if ({a}) and ({b}) else 0)"
    if op == "||":
        return f"(1 if ({a}) or ({b}) else 0)"
    if op in ("/", "%"):
        fn = "_div" if op == "/" else "_mod"
        return f"{fn}({a}, {b}, {str(node)!r})"
    if op in _CMP_OPS:
        return f"(1 if ({a}) {op} ({b}) else 0)"
    return f"({a} {op} {b})"


def compile_positional(node: Node, names: tuple[str, ...]) -> Callable[..., int]:
    """Compile ``node`` to a Python function taking ``names`` positionally.

    The generated source only ever contains integer literals, operators and
    the private helpers above, so ``eval`` here cannot execute user text.
    """
    slots = {n: f"_{i}" for i, n in enumerate(names)}
    args = ", ".join(slots[n] for n in names)
    src = f"lambda {args}: {_to_python(node, slots)}"
    return eval(src, {"_div": _div, "_mod": _mod, "__builtins__": {}})


class Expression:
    """A parsed expression bound to a fixed set of parameter names."""

    def __init__(self, text: str, known: Iterable[str] | None = None):
        if not text or not text.strip():
            raise ConstraintSyntaxError(text, 0, ["expression"])
        self.text = text
        self.ast = _Parser(text).parse()
        used = identifiers(self.ast)
        if known is not None:
            known = set(known)
            for name in sorted(used):
                if name not in known:
                    raise UnknownParameter(name)
        self.names: tuple[str, ...] = tuple(sorted(used))
        self._fn = compile_positional(self.ast, self.names)

    def value(self, env: Mapping[str, int]) -> int:
        return self._fn(*[env[n] for n in self.names])

    def evaluate(self, env: Mapping[str, int]) -> int:
        return evaluate(self.ast, env)

    def __call__(self, env: Mapping[str, int]) -> bool:
        return bool(self.value(env))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.text!r})"

    def __str__(self) -> str:
        return self.text


class Constraint(Expression):
    """A boolean constraint; ``constraint(config)`` is True when satisfied."""


def parse_constraint(text: str, space=None) -> Constraint:
    known = None if space is None else space.names
    return Constraint(text, known)


def evaluate_constraint(expr: Constraint, config: Mapping[str, int]) -> bool:
    return bool(evaluate(expr.ast, config))
