"""Expression language for the auxiliary and potential profiles.

A closed arithmetic grammar over one real variable ``x`` with complex
constants, parsed into an immutable AST.  Evaluation produces a second
order jet (value, first and second derivative) by forward-mode
differentiation, so profile derivatives carry no finite-difference
noise.  The grammar is documented in docs/expression-grammar.ebnf.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass

from .errors import GenqmError

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "NonIntegerExponentError",
    "EvaluationError",
    "Literal",
    "Constant",
    "Variable",
    "Negate",
    "BinaryOp",
    "Power",
    "Call",
    "Jet2",
    "parse",
    "to_source",
    "eval_jet",
    "FUNCTION_NAMES",
    "CONSTANT_NAMES",
]

FUNCTION_NAMES = ("exp", "sin", "cos", "sinh", "cosh", "tanh", "sqrt")
CONSTANT_NAMES = ("pi", "i")

# Arguments this close to the negative real axis are treated as on the
# sqrt branch cut and rejected.
SQRT_BRANCH_TOL = 1e-12


class ExprError(GenqmError):
    pass


class ExprSyntaxError(ExprError):
    """Parse failure; carries the byte offset into the source text."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"syntax error at offset {offset}: {message}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, offset: int, name: str):
        ExprError.__init__(
            self, f"unknown identifier '{name}' at offset {offset}"
        )
        self.offset = offset
        self.name = name


class NonIntegerExponentError(ExprSyntaxError):
    def __init__(self, offset: int):
        ExprError.__init__(
            self,
            f"exponent at offset {offset} must be an integer literal "
            "(optionally signed)",
        )
        self.offset = offset


class EvaluationError(ExprError):
    """Runtime failure of eval_jet; carries the offending point."""

    def __init__(self, x: float, message: str):
        super().__init__(f"evaluation failed at x={x!r}: {message}")
        self.x = x


# ---------------------------------------------------------------------------
# AST nodes (immutable, structural equality)


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Constant:
    name: str  # 'pi' or 'i'


@dataclass(frozen=True)
class Variable:
    pass


@dataclass(frozen=True)
class Negate:
    operand: "ExprAst"


@dataclass(frozen=True)
class BinaryOp:
    op: str  # '+', '-', '*', '/'
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Power:
    base: "ExprAst"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAst"


ExprAst = Literal | Constant | Variable | Negate | BinaryOp | Power | Call


@dataclass(frozen=True)
class Jet2:
    """Value and first two derivatives of an expression at one point."""

    value: complex
    d1: complex
    d2: complex


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)

_INT_RE = re.compile(r"\d+\Z")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'number' | 'ident' | 'op' | 'end'
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # only whitespace remains, or an illegal character
            rest = source[pos:]
            stripped = rest.lstrip()
            if not stripped:
                break
            at = pos + (len(rest) - len(stripped))
            raise ExprSyntaxError(at, f"unexpected character {stripped[0]!r}")
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
#
#   expr     = term { ('+'|'-') term }
#   term     = factor { ('*'|'/') factor }
#   factor   = '-' factor | power
#   power    = atom { '^' exponent }        exponent = ['-'] integer
#   atom     = number | 'x' | 'pi' | 'i' | func '(' expr ')' | '(' expr ')'


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(
                tok.offset, f"expected '{text}', found {self._describe(tok)}"
            )
        self.advance()

    @staticmethod
    def _describe(tok: _Token) -> str:
        return "end of input" if tok.kind == "end" else repr(tok.text)

    def parse(self) -> ExprAst:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(
                tok.offset, f"unexpected trailing input {self._describe(tok)}"
            )
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinaryOp(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinaryOp(op, node, self.factor())
        return node

    def factor(self) -> ExprAst:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Negate(self.factor())
        return self.power()

    def power(self) -> ExprAst:
        node = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            node = Power(node, self.exponent())
        return node

    def exponent(self) -> int:
        sign = 1
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            sign = -1
            tok = self.peek()
        if tok.kind != "number":
            raise ExprSyntaxError(
                tok.offset, f"expected integer exponent, found {self._describe(tok)}"
            )
        if not _INT_RE.match(tok.text):
            raise NonIntegerExponentError(tok.offset)
        self.advance()
        return sign * int(tok.text)

    def atom(self) -> ExprAst:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Literal(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name == "x":
                return Variable()
            if name in CONSTANT_NAMES:
                return Constant(name)
            if name in FUNCTION_NAMES:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(name, arg)
            raise UnknownIdentifierError(tok.offset, name)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(
            tok.offset, f"expected an operand, found {self._describe(tok)}"
        )


def parse(source: str) -> ExprAst:
    """Parse an expression into an AST.

    Raises ExprSyntaxError (with byte offset), UnknownIdentifierError or
    NonIntegerExponentError on malformed input.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError(0, "empty expression")
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Serialization.  Parenthesization follows operator precedence so that
# parse(to_source(ast)) is structurally identical to ast.

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node: ExprAst) -> int:
    if isinstance(node, BinaryOp):
        return _PREC_ADD if node.op in "+-" else _PREC_MUL
    if isinstance(node, Negate):
        return _PREC_NEG
    if isinstance(node, Power):
        return _PREC_POW
    return _PREC_ATOM


def to_source(node: ExprAst) -> str:
    """Render an AST back to grammar-conforming text.

    For any tree the parser can produce, parse(to_source(tree)) is
    structurally identical to it.  Hand-built trees that have no grammar
    spelling (e.g. a negative Literal, which the grammar writes as
    Negate of a nonnegative Literal) evaluate identically but reparse
    into the grammar's shape.
    """
    if isinstance(node, Literal):
        return repr(node.value)
    if isinstance(node, Constant):
        return node.name
    if isinstance(node, Variable):
        return "x"
    if isinstance(node, Negate):
        inner = to_source(node.operand)
        if _prec(node.operand) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinaryOp):
        level = _prec(node)
        left = to_source(node.left)
        if _prec(node.left) < level:
            left = f"({left})"
        right = to_source(node.right)
        # same-precedence binary operators associate left
        if _prec(node.right) <= level:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Power):
        base = to_source(node.base)
        if _prec(node.base) < _PREC_POW:
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Forward-mode second-order evaluation

_Triple = tuple[complex, complex, complex]


def _jet(node: ExprAst, x: float) -> _Triple:
    if isinstance(node, Literal):
        return complex(node.value), 0j, 0j
    if isinstance(node, Constant):
        return (complex(math.pi) if node.name == "pi" else 1j), 0j, 0j
    if isinstance(node, Variable):
        return complex(x), 1 + 0j, 0j
    if isinstance(node, Negate):
        v, d1, d2 = _jet(node.operand, x)
        return -v, -d1, -d2
    if isinstance(node, BinaryOp):
        f0, f1, f2 = _jet(node.left, x)
        g0, g1, g2 = _jet(node.right, x)
        if node.op == "+":
            return f0 + g0, f1 + g1, f2 + g2
        if node.op == "-":
            return f0 - g0, f1 - g1, f2 - g2
        if node.op == "*":
            return f0 * g0, f1 * g0 + f0 * g1, f2 * g0 + 2 * f1 * g1 + f0 * g2
        if g0 == 0:
            raise EvaluationError(x, "division by zero")
        v0 = f0 / g0
        v1 = (f1 - v0 * g1) / g0
        v2 = (f2 - 2 * v1 * g1 - v0 * g2) / g0
        return v0, v1, v2
    if isinstance(node, Power):
        u0, u1, u2 = _jet(node.base, x)
        n = node.exponent
        if n == 0:
            return 1 + 0j, 0j, 0j
        if n < 0 and u0 == 0:
            raise EvaluationError(x, f"zero base raised to power {n}")
        if n == 1:
            return u0, u1, u2
        pnm2 = u0 ** (n - 2)
        pnm1 = pnm2 * u0
        return (
            pnm1 * u0,
            n * pnm1 * u1,
            n * (n - 1) * pnm2 * u1 * u1 + n * pnm1 * u2,
        )
    if isinstance(node, Call):
        u0, u1, u2 = _jet(node.arg, x)
        try:
            h0, h1, h2 = _call_derivatives(node.func, u0, x)
        except (OverflowError, ValueError) as exc:
            raise EvaluationError(x, f"{node.func}: {exc}") from exc
        return h0, h1 * u1, h2 * u1 * u1 + h1 * u2
    raise TypeError(f"not an AST node: {node!r}")


def _call_derivatives(func: str, u: complex, x: float) -> _Triple:
    """Value, first and second derivative of a builtin at argument u."""
    if func == "exp":
        e = cmath.exp(u)
        return e, e, e
    if func == "sin":
        s, c = cmath.sin(u), cmath.cos(u)
        return s, c, -s
    if func == "cos":
        s, c = cmath.sin(u), cmath.cos(u)
        return c, -s, -c
    if func == "sinh":
        s, c = cmath.sinh(u), cmath.cosh(u)
        return s, c, s
    if func == "cosh":
        s, c = cmath.sinh(u), cmath.cosh(u)
        return c, s, c
    if func == "tanh":
        t = cmath.tanh(u)
        sech2 = 1 - t * t
        return t, sech2, -2 * t * sech2
    if func == "sqrt":
        if u.real < 0 and abs(u.imag) <= SQRT_BRANCH_TOL:
            raise EvaluationError(
                x, f"sqrt argument {u!r} lies on the negative real axis"
            )
        if u == 0:
            raise EvaluationError(x, "sqrt derivative singular at 0")
        s = cmath.sqrt(u)
        return s, 1 / (2 * s), -1 / (4 * s * u)
    raise EvaluationError(x, f"unknown function {func!r}")


def eval_jet(ast: ExprAst, x: float) -> Jet2:
    """Evaluate an expression and its first two derivatives at real x."""
    xf = float(x)
    if not math.isfinite(xf):
        raise EvaluationError(xf, "evaluation point must be finite")
    try:
        v, d1, d2 = _jet(ast, xf)
    except ZeroDivisionError as exc:
        raise EvaluationError(xf, "division by zero") from exc
    return Jet2(v, d1, d2)
