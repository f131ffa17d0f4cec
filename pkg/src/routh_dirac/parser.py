"""Potential and constraint expressions, and command-line key=value parsing.

Grammar (standard precedence, ``^`` right-associative)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

with FUNC one of sin, cos, exp, ln, sqrt.
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from . import autodiff
from .errors import ParseError, PotentialDomainError

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")

_FUNCTION_IMPL = {
    "sin": autodiff.sin,
    "cos": autodiff.cos,
    "exp": autodiff.exp,
    "ln": autodiff.log,
    "sqrt": autodiff.sqrt,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}

logger = logging.getLogger("routh_dirac.parser")


# expression tree ---------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


# tokenizer and parser ----------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if not match:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(
                f"Unexpected character {text[start]!r}",
                _byte_offset(text, start),
                {"number", "identifier", "(", "-", "+"},
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _byte_offset(text, start)))
        pos = match.end()
    tokens.append(_Token("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _at(self, text: str) -> bool:
        return self.current.kind == "op" and self.current.text == text

    def _expect(self, text: str) -> None:
        if not self._at(text):
            raise ParseError(f"Unexpected {self._describe()}", self.current.offset, {text})
        self._advance()

    def _describe(self) -> str:
        token = self.current
        return "end of input" if token.kind == "end" else f"token {token.text!r}"

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "end":
            raise ParseError(
                f"Unexpected {self._describe()}", self.current.offset, {"+", "-", "*", "/", "^", "end of input"}
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._at("+") or self._at("-"):
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self._at("*") or self._at("/"):
            op = self._advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self._at("-"):
            self._advance()
            return Neg(self.unary())
        if self._at("+"):
            self._advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self._at("^"):
            self._advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Num(float(token.text))
        if token.kind == "ident":
            self._advance()
            if token.text in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(token.text, arg)
            if self._at("("):
                raise ParseError(f"Unknown function {token.text!r}", token.offset, set(FUNCTIONS))
            return Var(token.text)
        if self._at("("):
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        raise ParseError(
            f"Unexpected {self._describe()}", token.offset, {"number", "identifier", "(", "-", "+"}
        )


# evaluation --------------------------------------------------------------------


def _is_zero(x: Any) -> bool:
    return autodiff.value(x) == 0


def evaluate(node: Node, env: Mapping[str, Any]) -> Any:
    """Evaluate on floats or dual numbers; domain violations raise PotentialDomainError."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name not in env:
            raise KeyError(f"No value for variable '{node.name}'")
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        return _FUNCTION_IMPL[node.fn](evaluate(node.arg, env))
    left = evaluate(node.left, env)
    if node.op == "^" and isinstance(node.right, Num):
        return autodiff.power(left, node.right.value)
    right = evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if _is_zero(right):
            raise PotentialDomainError("Division by zero")
        return left / right
    return autodiff.power(left, right)


def variables(node: Node) -> Tuple[str, ...]:
    found: List[str] = []

    def walk(n: Node) -> None:
        if isinstance(n, Var):
            if n.name not in found:
                found.append(n.name)
        elif isinstance(n, Neg):
            walk(n.operand)
        elif isinstance(n, Call):
            walk(n.arg)
        elif isinstance(n, BinOp):
            walk(n.left)
            walk(n.right)

    walk(node)
    return tuple(sorted(found))


# symbolic derivative -----------------------------------------------------------


def _num(x: float) -> Node:
    return Neg(Num(-x)) if x < 0 else Num(float(x))


def _const(node: Node) -> Optional[float]:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Num):
        return -node.operand.value
    return None


def _add(a: Node, b: Node) -> Node:
    if _const(a) == 0:
        return b
    if _const(b) == 0:
        return a
    if isinstance(b, Neg):
        return _sub(a, b.operand)
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _const(b) == 0:
        return a
    if _const(a) == 0:
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Node) -> Node:
    c = _const(a)
    if c is not None:
        return _num(-c)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _mul(a: Node, b: Node) -> Node:
    ca, cb = _const(a), _const(b)
    if ca == 0 or cb == 0:
        return Num(0.0)
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca is not None and cb is not None:
        return _num(ca * cb)
    return BinOp("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _const(a) == 0:
        return Num(0.0)
    if _const(b) == 1:
        return a
    return BinOp("/", a, b)


def _pow(a: Node, b: Node) -> Node:
    cb = _const(b)
    if cb == 0:
        return Num(1.0)
    if cb == 1:
        return a
    return BinOp("^", a, b)


def derivative(node: Node, name: str) -> Node:
    """Exact derivative tree with respect to variable ``name``."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == name else 0.0)
    if isinstance(node, Neg):
        return _neg(derivative(node.operand, name))
    if isinstance(node, Call):
        inner = derivative(node.arg, name)
        if _const(inner) == 0:
            return Num(0.0)
        outer = {
            "sin": lambda a: Call("cos", a),
            "cos": lambda a: _neg(Call("sin", a)),
            "exp": lambda a: Call("exp", a),
            "ln": lambda a: _div(Num(1.0), a),
            "sqrt": lambda a: _div(Num(1.0), _mul(Num(2.0), Call("sqrt", a))),
        }[node.fn](node.arg)
        return _mul(outer, inner)
    a, b = node.left, node.right
    da, db = derivative(a, name), derivative(b, name)
    if node.op == "+":
        return _add(da, db)
    if node.op == "-":
        return _sub(da, db)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if node.op == "/":
        return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Num(2.0)))
    # power
    if name not in variables(b):
        if _const(da) == 0:
            return Num(0.0)
        cb = _const(b)
        lowered = _num(cb - 1) if cb is not None else _sub(b, Num(1.0))
        return _mul(_mul(b, _pow(a, lowered)), da)
    # a^b (b' ln a + b a' / a)
    return _mul(node, _add(_mul(db, Call("ln", a)), _div(_mul(b, da), a)))


# printing ----------------------------------------------------------------------


def _format_number(x: float) -> str:
    if math.isfinite(x) and x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _precedence(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _PRECEDENCE["neg"]
    return _PRECEDENCE["atom"]


def to_string(node: Node) -> str:
    """Infix text that parses back to the same tree."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        if _precedence(node.operand) < _PRECEDENCE["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    prec = _PRECEDENCE[node.op]
    left, right = to_string(node.left), to_string(node.right)
    if node.op == "^":
        if _precedence(node.left) <= prec:
            left = f"({left})"
        if _precedence(node.right) < _PRECEDENCE["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _precedence(node.left) < prec:
        left = f"({left})"
    if _precedence(node.right) <= prec and not isinstance(node.right, Neg):
        right = f"({right})"
    return f"{left} {node.op} {right}"


# public wrapper ----------------------------------------------------------------


@dataclass(frozen=True)
class PotentialExpr:
    """A parsed expression over named variables."""

    tree: Node
    text: str = ""

    @property
    def variables(self) -> Tuple[str, ...]:
        return variables(self.tree)

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        result = evaluate(self.tree, env)
        real = autodiff.value(result)
        if isinstance(real, float) and not math.isfinite(real):
            raise PotentialDomainError(f"Expression '{self}' is not finite at {dict(env)}")
        return result

    def __call__(self, **env: Any) -> Any:
        return self.evaluate(env)

    def derivative(self, name: str) -> "PotentialExpr":
        tree = derivative(self.tree, name)
        return PotentialExpr(tree, to_string(tree))

    def __str__(self) -> str:
        return to_string(self.tree)


def parse_potential(text: str) -> PotentialExpr:
    if not text or not text.strip():
        raise ParseError("Empty expression", 0, {"number", "identifier", "(", "-", "+"})
    tree = _Parser(text).parse()
    logger.debug(f"Parsed '{text}' as {to_string(tree)}")
    return PotentialExpr(tree, text)


def univariate(expr: PotentialExpr, name: str) -> PotentialExpr:
    """Check that ``expr`` mentions no variable other than ``name``."""
    extra = [v for v in expr.variables if v != name]
    if extra:
        raise ValueError(f"Potential '{expr.text}' must depend on '{name}' only, found {extra}")
    return expr


# command-line key=value pairs --------------------------------------------------


def _coerce(value: str) -> Any:
    if value.lower() == "true":
        return True
    if value.lower() == "false":
        return False
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    if "," in value:
        parts = [p.strip() for p in value.split(",")]
        try:
            return [float(p) for p in parts]
        except ValueError:
            return value
    return value


def _unquote(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in ("'", '"'):
        return text[1:-1]
    return text


def parse_key_value_pairs(values_list: Optional[List[str]]) -> Dict[str, Any]:
    """Parse ``key=value`` overrides; comma-separated numbers become float lists."""
    result: Dict[str, Any] = {}
    if not values_list:
        return result

    for item in values_list:
        if "=" not in item:
            logger.warning(f"Ignoring malformed parameter '{item}' (expected format: key=value)")
            continue
        key, value = item.split("=", 1)
        key = _unquote(key.strip())
        value = _unquote(value.strip())
        if not key:
            logger.warning(f"Ignoring parameter with empty name '{item}'")
            continue
        result[key] = _coerce(value)

    return result
