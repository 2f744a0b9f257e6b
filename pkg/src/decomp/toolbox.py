"""Deterministic tools the planner can route subproblems to.

The only built-in is the calculator: an exact-rational arithmetic evaluator.
No floats anywhere on the evaluation path; every intermediate is a Fraction,
so results that look like money stay exact.

Grammar (precedence encoded in the rule nesting):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | '-' factor | '(' expr ')'

The lexer accepts the unicode operator spellings (−, ×, ÷) alongside ASCII
and strips thousands-commas inside number literals.  Offsets in errors are
byte offsets into the UTF-8 encoding of the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Union


class ToolboxError(Exception):
    pass


class LexError(ToolboxError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class ParseError(ToolboxError):
    def __init__(self, position: int, message: str):
        super().__init__(f"{message} at byte {position}")
        self.position = position


class DivisionByZero(ToolboxError):
    def __init__(self) -> None:
        super().__init__("division by zero")


class UnknownTool(ToolboxError):
    def __init__(self, tool_id: str):
        super().__init__(f"unknown tool: {tool_id}")


NUMBER = "num"
# Unicode spellings normalize to these kinds during lexing.
_OPERATOR_KINDS = {
    "+": "+",
    "-": "-",
    "−": "-",  # −
    "*": "*",
    "×": "*",  # ×
    "/": "/",
    "÷": "/",  # ÷
    "(": "(",
    ")": ")",
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int
    value: Fraction | None = None


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Neg, BinOp]


def _digit(ch: str) -> bool:
    # ASCII only; str.isdigit() admits characters Fraction cannot parse
    return "0" <= ch <= "9"


def tokenize(text: str, partial: bool = False) -> list[Token]:
    """Lex text into tokens.  With partial=True, stop silently at the first
    bad character instead of raising; span extraction leans on that."""
    tokens: list[Token] = []
    i = 0
    byte_pos = 0
    n = len(text)

    def byte_len(s: str) -> int:
        return len(s.encode("utf-8"))

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            byte_pos += byte_len(ch)
            i += 1
            continue
        if ch in _OPERATOR_KINDS:
            tokens.append(Token(_OPERATOR_KINDS[ch], ch, byte_pos))
            byte_pos += byte_len(ch)
            i += 1
            continue
        if _digit(ch) or (ch == "." and i + 1 < n and _digit(text[i + 1])):
            start_i, start_byte = i, byte_pos
            seen_dot = False
            while i < n:
                c = text[i]
                if _digit(c):
                    i += 1
                elif c == "," and not seen_dot and _digit(text[i - 1]) and i + 1 < n and _digit(text[i + 1]):
                    # thousands separator, stripped below
                    i += 1
                elif c == "." and not seen_dot:
                    if i + 1 < n and _digit(text[i + 1]):
                        seen_dot = True
                        i += 1
                    else:
                        break
                else:
                    break
            literal = text[start_i:i]
            value = Fraction(literal.replace(",", ""))
            tokens.append(Token(NUMBER, literal, start_byte, value))
            byte_pos = start_byte + byte_len(literal)
            continue
        if partial:
            return tokens
        raise LexError(byte_pos, f"unexpected character {ch!r}")
    return tokens


def parse(tokens: list[Token]) -> Expr:
    """Recursive-descent parse of a complete token stream."""
    if not tokens:
        raise ParseError(0, "empty expression")
    end = tokens[-1].offset + len(tokens[-1].text.encode("utf-8"))
    pos = 0

    def peek() -> Token | None:
        return tokens[pos] if pos < len(tokens) else None

    def take() -> Token:
        nonlocal pos
        tok = peek()
        if tok is None:
            raise ParseError(end, "unexpected end of expression")
        pos += 1
        return tok

    def parse_expr() -> Expr:
        node = parse_term()
        while (tok := peek()) is not None and tok.kind in ("+", "-"):
            take()
            node = BinOp(tok.kind, node, parse_term())
        return node

    def parse_term() -> Expr:
        node = parse_factor()
        while (tok := peek()) is not None and tok.kind in ("*", "/"):
            take()
            node = BinOp(tok.kind, node, parse_factor())
        return node

    def parse_factor() -> Expr:
        tok = take()
        if tok.kind == NUMBER:
            assert tok.value is not None
            return Num(tok.value)
        if tok.kind == "-":
            return Neg(parse_factor())
        if tok.kind == "(":
            inner = parse_expr()
            closing = peek()
            if closing is None or closing.kind != ")":
                raise ParseError(
                    closing.offset if closing else end, "unbalanced parenthesis"
                )
            take()
            return inner
        raise ParseError(tok.offset, f"unexpected token {tok.text!r}")

    tree = parse_expr()
    extra = peek()
    if extra is not None:
        raise ParseError(extra.offset, f"trailing input {extra.text!r}")
    return tree


def eval_tree(tree: Expr) -> Fraction:
    if isinstance(tree, Num):
        return tree.value
    if isinstance(tree, Neg):
        return -eval_tree(tree.operand)
    left = eval_tree(tree.left)
    right = eval_tree(tree.right)
    if tree.op == "+":
        return left + right
    if tree.op == "-":
        return left - right
    if tree.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZero()
    return left / right


def eval_expr(text: str) -> Fraction:
    """Evaluate an arithmetic expression exactly."""
    return eval_tree(parse(tokenize(text)))


def render_value(value: Fraction) -> str:
    """Canonical text for a rational: integer when whole, else the shortest
    exact decimal, else reduced p/q when the decimal would not terminate."""
    if value.denominator == 1:
        return str(value.numerator)
    rest = value.denominator
    twos = fives = 0
    while rest % 2 == 0:
        rest //= 2
        twos += 1
    while rest % 5 == 0:
        rest //= 5
        fives += 1
    if rest != 1:
        return f"{value.numerator}/{value.denominator}"
    places = max(twos, fives)
    scaled = abs(value.numerator) * 10**places // value.denominator
    digits = str(scaled).rjust(places + 1, "0")
    whole, frac = digits[:-places], digits[-places:].rstrip("0")
    sign = "-" if value.numerator < 0 else ""
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


_SPAN_STARTS = "(-−."


def first_expression(text: str) -> tuple[Fraction, str]:
    """Find the first expression-like span in free text: scanning left to
    right, the first start position that yields any parse wins, and from that
    start the longest token prefix that parses as a complete expression is
    taken.  Returns (value, matched span text)."""
    for start in range(len(text)):
        ch = text[start]
        if not (_digit(ch) or ch in _SPAN_STARTS):
            continue
        tokens = tokenize(text[start:], partial=True)
        for length in range(len(tokens), 0, -1):
            try:
                tree = parse(tokens[:length])
            except ParseError:
                continue
            last = tokens[length - 1]
            span_bytes = last.offset + len(last.text.encode("utf-8"))
            span = text[start:].encode("utf-8")[:span_bytes].decode("utf-8")
            return eval_tree(tree), span
    raise ParseError(0, "no arithmetic expression found")


def _run_calculator(input_text: str) -> "ToolResult":
    value, span = first_expression(input_text)
    return ToolResult(tool_id="calculator", text=render_value(value), value=value)


@dataclass(frozen=True)
class ToolResult:
    tool_id: str
    text: str
    value: Fraction | None = None


class Toolbox:
    """Dispatch table from tool id to native implementation."""

    _NATIVE: dict[str, Callable[[str], ToolResult]] = {
        "calculator": _run_calculator,
    }

    def __init__(self, enabled: Iterable[str] = ("calculator",)):
        self._tools: dict[str, Callable[[str], ToolResult]] = {}
        for tool_id in enabled:
            if tool_id not in self._NATIVE:
                raise UnknownTool(tool_id)
            self._tools[tool_id] = self._NATIVE[tool_id]

    def tool_ids(self) -> list[str]:
        return sorted(self._tools)

    def invoke(self, tool_id: str, input_text: str) -> ToolResult:
        if tool_id not in self._tools:
            raise UnknownTool(tool_id)
        return self._tools[tool_id](input_text)
