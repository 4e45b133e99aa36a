"""Small total expression language for assigner bodies and validator predicates.

Grammar (precedence from loosest to tightest):

    expr     := "if" expr "then" expr "else" expr | or_expr
    or_expr  := and_expr ("or" and_expr)*
    and_expr := not_expr ("and" not_expr)*
    not_expr := "not" not_expr | cmp
    cmp      := sum (("=="|"!="|"<="|">="|"<"|">") sum)?
    sum      := term (("+"|"-") term)*
    term     := unary (("*"|"/"|"%") unary)*
    unary    := "-" unary | primary
    primary  := number | string | true | false | null | name | name "(" args ")" | "(" expr ")"

Built-in calls: abs, min, max, round, floor, len, concat. Evaluation is
sandboxed and total: unbound names, type mismatches, and division by zero
raise EvalError, never arbitrary exceptions. Booleans are strict (and/or/not
and if-conditions require bool operands); there is no truthiness.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class ExprSyntaxError(ValueError):
    """Raised while parsing an expression string."""


class EvalError(ValueError):
    """Raised while evaluating: unbound name, type mismatch, division by zero."""


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Lit:
    value: object


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Logic:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    orelse: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expression = object

_KEYWORDS = {"if", "then", "else", "and", "or", "not", "true", "false", "null"}
_BUILTINS = {"abs", "min", "max", "round", "floor", "len", "concat"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op>==|!=|<=|>=|[+\-*/%<>(),])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ExprSyntaxError(f"bad character {text[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append((kind, m.group()))
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, value: str) -> bool:
        kind, text = self.peek()
        if text == value and kind in ("op", "name"):
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> None:
        if not self.accept(value):
            kind, text = self.peek()
            raise ExprSyntaxError(f"expected {value!r}, got {text or 'end of input'!r}")

    def parse(self):
        node = self.expr()
        kind, text = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r} after expression")
        return node

    def expr(self):
        if self.accept("if"):
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            orelse = self.expr()
            return If(cond, then, orelse)
        return self.or_expr()

    def or_expr(self):
        node = self.and_expr()
        while self.accept("or"):
            node = Logic("or", node, self.and_expr())
        return node

    def and_expr(self):
        node = self.not_expr()
        while self.accept("and"):
            node = Logic("and", node, self.not_expr())
        return node

    def not_expr(self):
        if self.accept("not"):
            return Not(self.not_expr())
        return self.cmp()

    def cmp(self):
        node = self.sum()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.accept(op):
                right = self.sum()
                for again in ("==", "!=", "<=", ">=", "<", ">"):
                    if self.peek()[1] == again:
                        raise ExprSyntaxError("chained comparisons are not supported")
                return Binary(op, node, right)
        return node

    def sum(self):
        node = self.term()
        while True:
            if self.accept("+"):
                node = Binary("+", node, self.term())
            elif self.accept("-"):
                node = Binary("-", node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            if self.accept("*"):
                node = Binary("*", node, self.unary())
            elif self.accept("/"):
                node = Binary("/", node, self.unary())
            elif self.accept("%"):
                node = Binary("%", node, self.unary())
            else:
                return node

    def unary(self):
        if self.accept("-"):
            return Unary("-", self.unary())
        return self.primary()

    def primary(self):
        kind, text = self.next()
        if kind == "number":
            if "." in text or "e" in text or "E" in text:
                return Lit(float(text))
            return Lit(int(text))
        if kind == "string":
            return Lit(_unescape(text))
        if kind == "name":
            if text == "true":
                return Lit(True)
            if text == "false":
                return Lit(False)
            if text == "null":
                return Lit(None)
            if text in _KEYWORDS:
                raise ExprSyntaxError(f"unexpected keyword {text!r}")
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                self.next()
                args = []
                if not self.accept(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                    self.expect(")")
                if text not in _BUILTINS:
                    raise ExprSyntaxError(f"unknown function {text!r}")
                return Call(text, tuple(args))
            return Ref(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}")


def _unescape(quoted: str) -> str:
    body = quoted[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def parse_expression(text: str) -> Expression:
    return _Parser(_tokenize(text)).parse()


# ---------------------------------------------------------------- evaluation


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _need_num(v, what: str):
    if not _is_num(v):
        raise EvalError(f"{what} requires a number, got {type(v).__name__}")
    return v


def _need_bool(v, what: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"{what} requires a boolean, got {type(v).__name__}")
    return v


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if v is None:
        return "null"
    return repr(v) if isinstance(v, float) else str(v)


def eval_expression(expr: Expression, env: dict) -> object:
    """Evaluate an AST (or expression string) against a name environment."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    return _eval(expr, env)


def _eval(node, env: dict):
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, Ref):
        if node.name not in env:
            raise EvalError(f"unbound field {node.name!r}")
        return env[node.name]
    if isinstance(node, Unary):
        return -_need_num(_eval(node.operand, env), "unary '-'")
    if isinstance(node, Not):
        return not _need_bool(_eval(node.operand, env), "'not'")
    if isinstance(node, Logic):
        left = _need_bool(_eval(node.left, env), f"{node.op!r}")
        if node.op == "and" and not left:
            return False
        if node.op == "or" and left:
            return True
        return _need_bool(_eval(node.right, env), f"{node.op!r}")
    if isinstance(node, If):
        if _need_bool(_eval(node.cond, env), "'if' condition"):
            return _eval(node.then, env)
        return _eval(node.orelse, env)
    if isinstance(node, Binary):
        return _binary(node.op, _eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Call):
        return _call(node.name, [_eval(a, env) for a in node.args])
    raise EvalError(f"unknown expression node {type(node).__name__}")


def _binary(op: str, a, b):
    if op == "+":
        if isinstance(a, str) and isinstance(b, str):
            return a + b
        return _need_num(a, "'+'") + _need_num(b, "'+'")
    if op == "-":
        return _need_num(a, "'-'") - _need_num(b, "'-'")
    if op == "*":
        return _need_num(a, "'*'") * _need_num(b, "'*'")
    if op == "/":
        _need_num(a, "'/'")
        _need_num(b, "'/'")
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    if op == "%":
        _need_num(a, "'%'")
        _need_num(b, "'%'")
        if b == 0:
            raise EvalError("division by zero")
        return a % b
    if op in ("==", "!="):
        equal = _values_equal(a, b)
        return equal if op == "==" else not equal
    # ordering comparisons: both numbers or both strings
    if _is_num(a) and _is_num(b):
        pass
    elif isinstance(a, str) and isinstance(b, str):
        pass
    else:
        raise EvalError(
            f"{op!r} requires two numbers or two strings, got "
            f"{type(a).__name__} and {type(b).__name__}"
        )
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise EvalError(f"unknown operator {op!r}")


def _values_equal(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if _is_num(a) and _is_num(b):
        return a == b
    if type(a) is type(b):
        return a == b
    return False


def _call(name: str, args: list):
    if name == "abs":
        _expect_arity(name, args, 1)
        return abs(_need_num(args[0], "abs()"))
    if name in ("min", "max"):
        if not args:
            raise EvalError(f"{name}() needs at least one argument")
        if all(_is_num(a) for a in args):
            return min(args) if name == "min" else max(args)
        if all(isinstance(a, str) for a in args):
            return min(args) if name == "min" else max(args)
        raise EvalError(f"{name}() requires all numbers or all strings")
    if name == "round":
        if len(args) == 1:
            return round(_need_num(args[0], "round()"))
        _expect_arity(name, args, 2)
        digits = args[1]
        if not isinstance(digits, int) or isinstance(digits, bool):
            raise EvalError("round() digits must be an integer")
        return round(_need_num(args[0], "round()"), digits)
    if name == "floor":
        _expect_arity(name, args, 1)
        return math.floor(_need_num(args[0], "floor()"))
    if name == "len":
        _expect_arity(name, args, 1)
        if isinstance(args[0], (str, list)):
            return len(args[0])
        raise EvalError(f"len() requires a string or list, got {type(args[0]).__name__}")
    if name == "concat":
        return "".join(_render(a) for a in args)
    raise EvalError(f"unknown function {name!r}")


def _expect_arity(name: str, args: list, count: int) -> None:
    if len(args) != count:
        raise EvalError(f"{name}() takes {count} argument(s), got {len(args)}")


def field_refs(expr: Expression) -> set[str]:
    """All field names referenced by an expression (or expression string)."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    out: set[str] = set()
    _collect_refs(expr, out)
    return out


def _collect_refs(node, out: set[str]) -> None:
    if isinstance(node, Ref):
        out.add(node.name)
    elif isinstance(node, Unary):
        _collect_refs(node.operand, out)
    elif isinstance(node, Not):
        _collect_refs(node.operand, out)
    elif isinstance(node, (Binary, Logic)):
        _collect_refs(node.left, out)
        _collect_refs(node.right, out)
    elif isinstance(node, If):
        _collect_refs(node.cond, out)
        _collect_refs(node.then, out)
        _collect_refs(node.orelse, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_refs(a, out)
