"""
Coordinate expression language used for vector-field coefficients and
function-family components.

Grammar (the contract for every spec file):

    expr    := term  (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" INTEGER)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    NUMBER  := digits ["." digits] [("e"|"E") ["+"|"-"] digits] | "." digits [...]
    INTEGER := digits
    NAME    := one of the declared coordinate names
    FUNC    := "sin" | "cos" | "exp" | "sqrt" | "abs" | "hstep"

"^" binds tighter than unary minus, which binds tighter than "*" and "/".
Exponents are non-negative integer literals up to 64; chained powers need parentheses.
Polynomial degree is capped at 64 and nesting depth at 200 levels; both are syntax errors.
Decimal literals are converted to exact rationals at parse time.

hstep(t) is 0 for t <= 0 and exp(-1/t) for t > 0: smooth, not analytic at 0.
"""

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple

from .errors import BackendError, EvalDomainError, ExprSyntaxError, InputError, UnknownIdentifierError


def hstep(t: float) -> float:
    if t <= 0:
        return 0.0
    return math.exp(-1.0 / t)


def _checked_sqrt(t: float) -> float:
    if t < 0:
        raise ValueError("sqrt of negative")
    return math.sqrt(t)


BUILTINS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "sqrt": _checked_sqrt,
    "abs": abs,
    "hstep": hstep,
}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")

# precedence levels used by to_text
_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


# ---------------------------------------------------------------------------
# Tree nodes
# ---------------------------------------------------------------------------

class Node:
    precedence = _ATOM

    def _float(self, point: Sequence[float]) -> float:
        raise NotImplementedError

    def _exact(self, point: Sequence[Fraction]) -> Fraction:
        raise NotImplementedError

    def _poly(self, nvars: int) -> Optional["PolyForm"]:
        raise NotImplementedError

    def _text(self) -> str:
        raise NotImplementedError

    def _names(self) -> Iterator[str]:
        return iter(())


@dataclass(frozen=True)
class Num(Node):
    value: Fraction

    def _float(self, point):
        try:
            return float(self.value)
        except OverflowError:
            raise EvalDomainError("literal out of float range", self._text())

    def _exact(self, point):
        return self.value

    def _poly(self, nvars):
        return PolyForm.constant(self.value, nvars)

    def _text(self):
        return _number_text(self.value)


@dataclass(frozen=True)
class Var(Node):
    name: str
    index: int

    def _float(self, point):
        return float(point[self.index])

    def _exact(self, point):
        return Fraction(point[self.index])

    def _poly(self, nvars):
        return PolyForm.variable(self.index, nvars)

    def _text(self):
        return self.name

    def _names(self):
        yield self.name


@dataclass(frozen=True)
class Neg(Node):
    operand: Node
    precedence = _NEG

    def _float(self, point):
        return -self.operand._float(point)

    def _exact(self, point):
        return -self.operand._exact(point)

    def _poly(self, nvars):
        inner = self.operand._poly(nvars)
        return None if inner is None else -inner

    def _text(self):
        return "-" + _wrap(self.operand, _NEG)

    def _names(self):
        return self.operand._names()


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    @property
    def precedence(self):
        return _ADD if self.op in "+-" else _MUL

    def _float(self, point):
        a = self.left._float(point)
        b = self.right._float(point)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0:
            raise EvalDomainError("division by zero", self._text())
        return a / b

    def _exact(self, point):
        a = self.left._exact(point)
        b = self.right._exact(point)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0:
            raise EvalDomainError("division by zero", self._text())
        return a / b

    def _poly(self, nvars):
        a = self.left._poly(nvars)
        b = self.right._poly(nvars)
        if a is None or b is None:
            return None
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        # only division by a nonzero constant stays polynomial
        if not b.is_constant or b.constant_value == 0:
            return None
        return a * PolyForm.constant(1 / b.constant_value, nvars)

    def _text(self):
        level = self.precedence
        return f"{_wrap(self.left, level)}{self.op}{_wrap(self.right, level + 1)}"

    def _names(self):
        yield from self.left._names()
        yield from self.right._names()


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    precedence = _POW

    def _float(self, point):
        b = self.base._float(point)
        try:
            return b ** self.exponent
        except OverflowError:
            raise EvalDomainError("overflow in power", self._text())

    def _exact(self, point):
        return self.base._exact(point) ** self.exponent

    def _poly(self, nvars):
        inner = self.base._poly(nvars)
        return None if inner is None else inner ** self.exponent

    def _text(self):
        return f"{_wrap(self.base, _ATOM)}^{self.exponent}"

    def _names(self):
        return self.base._names()


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def _float(self, point):
        t = self.arg._float(point)
        try:
            return BUILTINS[self.func](t)
        except (ValueError, OverflowError) as exc:
            raise EvalDomainError(f"{self.func} domain error: {exc}", self._text())

    def _exact(self, point):
        raise BackendError(f"{self.func}() has no exact evaluation", {"subexpr": self._text()})

    def _poly(self, nvars):
        return None

    def _text(self):
        return f"{self.func}({self.arg._text()})"

    def _names(self):
        return self.arg._names()


def _wrap(node: Node, minimum: int) -> str:
    text = node._text()
    return f"({text})" if node.precedence < minimum else text


def _number_text(value: Fraction) -> str:
    if value < 0:
        return f"(-{_number_text(-value)})"
    if value.denominator == 1:
        return str(value.numerator)
    # exact decimal when the denominator has only the prime factors 2 and 5
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"({value.numerator}/{value.denominator})"
    digits = max(twos, fives)
    scaled = value.numerator * 10**digits // value.denominator
    whole, frac = divmod(scaled, 10**digits)
    return f"{whole}.{frac:0{digits}d}"


# ---------------------------------------------------------------------------
# Public expression wrapper
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    """A parsed coordinate expression bound to its declared coordinates"""

    tree: Node
    coords: Tuple[str, ...]
    source: str = field(default="", compare=False)

    def __str__(self) -> str:
        return to_text(self)


def eval_float(e: Expr, point: Sequence[float]) -> float:
    if len(point) != len(e.coords):
        raise InputError(f"point has {len(point)} values, expected {len(e.coords)}")
    return e.tree._float(point)


def eval_exact(e: Expr, point: Sequence[Fraction]) -> Fraction:
    """Exact rational evaluation; only the polynomial sub-language is supported"""
    if len(point) != len(e.coords):
        raise InputError(f"point has {len(point)} values, expected {len(e.coords)}")
    return e.tree._exact(point)


def to_poly(e: Expr) -> Optional["PolyForm"]:
    """Return the polynomial form of e, or None when e is not a polynomial"""
    poly = e.tree._poly(len(e.coords))
    if poly is None:
        return None
    return PolyForm(e.coords, poly.terms)


def is_polynomial(e: Expr) -> bool:
    return to_poly(e) is not None


def to_text(e: Expr) -> str:
    return e.tree._text()


def variables(e: Expr) -> Set[str]:
    return set(e.tree._names())


# ---------------------------------------------------------------------------
# Polynomials over Q
# ---------------------------------------------------------------------------

Monomial = Tuple[int, ...]


@dataclass(frozen=True)
class PolyForm:
    coords: Tuple[str, ...]
    terms: Tuple[Tuple[Monomial, Fraction], ...]

    @classmethod
    def from_dict(cls, coords: Sequence[str], terms: Dict[Monomial, Fraction]) -> "PolyForm":
        kept = sorted(((mono, Fraction(c)) for mono, c in terms.items() if c != 0), reverse=True)
        return cls(tuple(coords), tuple(kept))

    @classmethod
    def constant(cls, value: Fraction, nvars: int) -> "PolyForm":
        return cls.from_dict(_anon(nvars), {(0,) * nvars: Fraction(value)})

    @classmethod
    def variable(cls, index: int, nvars: int) -> "PolyForm":
        mono = tuple(1 if i == index else 0 for i in range(nvars))
        return cls.from_dict(_anon(nvars), {mono: Fraction(1)})

    def as_dict(self) -> Dict[Monomial, Fraction]:
        return dict(self.terms)

    @property
    def is_constant(self) -> bool:
        return all(sum(mono) == 0 for mono, _ in self.terms)

    @property
    def constant_value(self) -> Fraction:
        return self.as_dict().get((0,) * len(self.coords), Fraction(0))

    @property
    def degree(self) -> int:
        return max((sum(mono) for mono, _ in self.terms), default=0)

    def __neg__(self) -> "PolyForm":
        return PolyForm(self.coords, tuple((mono, -c) for mono, c in self.terms))

    def __add__(self, other: "PolyForm") -> "PolyForm":
        total = self.as_dict()
        for mono, c in other.terms:
            total[mono] = total.get(mono, Fraction(0)) + c
        return PolyForm.from_dict(self.coords, total)

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self + (-other)

    def __mul__(self, other: "PolyForm") -> "PolyForm":
        product: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                mono = tuple(a + b for a, b in zip(m1, m2))
                product[mono] = product.get(mono, Fraction(0)) + c1 * c2
        return PolyForm.from_dict(self.coords, product)

    def __pow__(self, exponent: int) -> "PolyForm":
        result = PolyForm(self.coords, (((0,) * len(self.coords), Fraction(1)),))
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def evaluate(self, point: Sequence[Fraction]) -> Fraction:
        total = Fraction(0)
        for mono, c in self.terms:
            term = c
            for value, power in zip(point, mono):
                if power:
                    term *= Fraction(value) ** power
            total += term
        return total

    def to_expr(self) -> Expr:
        tree: Optional[Node] = None
        for mono, c in self.terms:
            factors: List[Node] = []
            magnitude = abs(c)
            if magnitude != 1 or not any(mono):
                num: Node = Num(Fraction(magnitude.numerator))
                if magnitude.denominator != 1:
                    num = BinOp("/", num, Num(Fraction(magnitude.denominator)))
                factors.append(num)
            for index, power in enumerate(mono):
                if power == 0:
                    continue
                var = Var(self.coords[index], index)
                factors.append(var if power == 1 else Pow(var, power))
            term = factors[0]
            for factor in factors[1:]:
                term = BinOp("*", term, factor)
            if tree is None:
                tree = Neg(term) if c < 0 else term
            else:
                tree = BinOp("-" if c < 0 else "+", tree, term)
        if tree is None:
            tree = Num(Fraction(0))
        return Expr(tree, self.coords)


def _anon(nvars: int) -> Tuple[str, ...]:
    return tuple(f"_{i}" for i in range(nvars))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if not match or match.lastgroup is None:
            offset = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[offset]!r}", offset, text)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Precedence-climbing parser; binding powers mirror the grammar above"""

    BINDING = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
    UNARY = 25
    MAX_DEPTH = 200
    MAX_EXPONENT = 64
    MAX_DEGREE = 64
    MAX_LITERAL = 1000
    MAX_DIGITS = 900

    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = {name: i for i, name in enumerate(coords)}
        self.tokens = _tokenize(text)
        self.pos = 0
        self.nesting = 0
        # (tree depth, degree bound) per node id; evaluation recurses once per level
        self.shapes: Dict[int, Tuple[int, int]] = {}

    @property
    def token(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[_Token] = None) -> ExprSyntaxError:
        tok = tok or self.token
        if tok.kind == "end":
            return ExprSyntaxError("unexpected end of input", tok.offset, self.text)
        return ExprSyntaxError(message, tok.offset, self.text)

    def parse(self) -> Node:
        node = self.expression(0)
        if self.token.kind != "end":
            raise self.error(f"unexpected {self.token.text!r}")
        return node

    def shape(self, node: Node) -> Tuple[int, int]:
        return self.shapes.get(id(node), (1, 1 if isinstance(node, Var) else 0))

    def build(self, tok: _Token, node: Node, *children: Node) -> Node:
        shapes = [self.shape(child) for child in children]
        depth = 1 + max(d for d, _ in shapes)
        if depth > self.MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", tok.offset, self.text)
        degrees = [g for _, g in shapes]
        if isinstance(node, Pow):
            degree = degrees[0] * node.exponent
        elif isinstance(node, Call):
            degree = 0
        elif isinstance(node, BinOp) and node.op in "+-":
            degree = max(degrees)
        else:
            degree = sum(degrees)
        if degree > self.MAX_DEGREE:
            raise ExprSyntaxError(f"polynomial degree above {self.MAX_DEGREE}", tok.offset, self.text)
        self.shapes[id(node)] = (depth, degree)
        return node

    def expression(self, rbp: int) -> Node:
        start = self.token
        self.nesting += 1
        if self.nesting > self.MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", start.offset, self.text)
        left = self.prefix()
        while self.token.kind == "op" and rbp < self.BINDING.get(self.token.text, 0):
            left = self.infix(self.advance(), left)
        self.nesting -= 1
        return left

    def prefix(self) -> Node:
        tok = self.advance()
        if tok.kind == "number":
            return Num(self.literal(tok))
        if tok.kind == "name":
            return self.name(tok)
        if tok.text == "-":
            operand = self.expression(self.UNARY)
            return self.build(tok, Neg(operand), operand)
        if tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        raise self.error(f"unexpected {tok.text!r}", tok)

    def literal(self, tok: _Token) -> Fraction:
        if len(tok.text) > self.MAX_LITERAL:
            raise self.error("number literal out of range", tok)
        mantissa, _, exponent = tok.text.lower().partition("e")
        # bounds the digits of the value, so to_text output re-parses
        if len(mantissa) + abs(int(exponent or 0)) > self.MAX_DIGITS:
            raise self.error("number literal out of range", tok)
        return Fraction(tok.text)

    def name(self, tok: _Token) -> Node:
        if tok.text in BUILTINS:
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            return self.build(tok, Call(tok.text, arg), arg)
        if tok.text in self.coords:
            return Var(tok.text, self.coords[tok.text])
        raise UnknownIdentifierError(tok.text, tok.offset, self.text)

    def infix(self, tok: _Token, left: Node) -> Node:
        if tok.text == "^":
            exp_tok = self.advance()
            if exp_tok.kind != "number" or not exp_tok.text.isdigit():
                raise self.error("exponent must be a non-negative integer literal", exp_tok)
            if len(exp_tok.text) > 3 or int(exp_tok.text) > self.MAX_EXPONENT:
                raise self.error(f"exponent larger than {self.MAX_EXPONENT}", exp_tok)
            if self.token.text == "^":
                raise self.error("chained exponent, use parentheses")
            return self.build(tok, Pow(left, int(exp_tok.text)), left)
        right = self.expression(self.BINDING[tok.text])
        return self.build(tok, BinOp(tok.text, left, right), left, right)

    def expect(self, text: str) -> None:
        if self.token.text != text:
            raise self.error(f"expected {text!r}")
        self.advance()


def validate_coords(coords: Sequence[str]) -> Tuple[str, ...]:
    if not coords:
        raise InputError("at least one coordinate name is required")
    for name in coords:
        if not isinstance(name, str) or not _IDENT.match(name):
            raise InputError(f"invalid coordinate name {name!r}")
        if name in BUILTINS:
            raise InputError(f"coordinate name {name!r} shadows a builtin")
    if len(set(coords)) != len(coords):
        raise InputError(f"duplicate coordinate names in {list(coords)}")
    return tuple(coords)


def parse(text: str, coords: Sequence[str]) -> Expr:
    coords = validate_coords(coords)
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text if isinstance(text, str) else "")
    tree = _Parser(text, coords).parse()
    return Expr(tree, coords, text)
