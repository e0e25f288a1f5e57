"""
A small arithmetic expression language for vector-field components.

Grammar (whitespace is insignificant):

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := ('-' | '+') unary | power
    power      := primary ('^' unary)?          # right-associative
    primary    := NUMBER | CONSTANT | VARIABLE
                | FUNCTION '(' expression ')'
                | '(' expression ')'
    VARIABLE   := 'x' DIGITS                     # 1-based: x1, x2, ...
    CONSTANT   := 'pi' | 'e'
    FUNCTION   := sin | cos | tan | tanh | sech | exp | ln | abs | sqrt
    NUMBER     := DIGITS ('.' DIGITS?)? EXPONENT? | '.' DIGITS EXPONENT?

`^` binds tightest, then unary minus, then `*` `/`, then `+` `-`.

Evaluation works on a single point (shape (n,)) or on a stack of points
(shape (m, n)); derivatives are exact, computed in forward mode with
DualNumber.
"""
import math
import re

import attrs
import numpy as np

from .exceptions import (
    ArityError, DimensionError, DomainError, ExpressionSyntaxError,
    NonDifferentiableError, NonFiniteValueError, UnknownIdentifierError,
)

# height of the parsed tree, long flat chains of + and * included
MAX_DEPTH = 64
# formatted text of a tree of height MAX_DEPTH nests at most this deep
MAX_NESTING = 2 * MAX_DEPTH + 1


# --- AST ---

@attrs.frozen
class Constant:
    value: float
    name: str | None = None


@attrs.frozen
class Variable:
    index: int


@attrs.frozen
class UnaryOp:
    op: str
    operand: object


@attrs.frozen
class BinaryOp:
    op: str
    left: object
    right: object


@attrs.frozen
class Call:
    function: str
    argument: object


@attrs.frozen
class Expression:
    """A parsed expression. Immutable; evaluation never mutates it."""
    ast: object
    source: str

    @property
    def max_index(self):
        return max((node.index for node in walk(self.ast) if isinstance(node, Variable)), default=0)

    def __str__(self):
        return format_expression(self)


def walk(node):
    yield node
    if isinstance(node, UnaryOp):
        yield from walk(node.operand)
    elif isinstance(node, BinaryOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Call):
        yield from walk(node.argument)


# --- Dual numbers ---

@attrs.frozen
class DualNumber:
    """
    value + derivative * eps with eps^2 = 0. Both parts may be floats or
    equally-shaped numpy arrays (one tangent per point of a stack).
    """
    value: object
    derivative: object

    @staticmethod
    def lift(other):
        if isinstance(other, DualNumber):
            return other
        return DualNumber(other, 0.0)

    def __add__(self, other):
        other = DualNumber.lift(other)
        return DualNumber(self.value + other.value, self.derivative + other.derivative)

    __radd__ = __add__

    def __sub__(self, other):
        other = DualNumber.lift(other)
        return DualNumber(self.value - other.value, self.derivative - other.derivative)

    def __rsub__(self, other):
        return DualNumber.lift(other) - self

    def __mul__(self, other):
        other = DualNumber.lift(other)
        return DualNumber(
            self.value * other.value,
            self.value * other.derivative + self.derivative * other.value,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = DualNumber.lift(other)
        value = self.value / other.value
        return DualNumber(value, (self.derivative - value * other.derivative) / other.value)

    def __rtruediv__(self, other):
        return DualNumber.lift(other) / self

    def __neg__(self):
        return DualNumber(-self.value, -self.derivative)


# --- Function table ---

def _sech(u):
    return 1.0 / np.cosh(u)


def _require_positive(name, u):
    if np.any(u <= 0):
        raise DomainError(f'{name} requires a positive argument.')


def _require_non_negative(name, u):
    if np.any(u < 0):
        raise DomainError(f'{name} requires a non-negative argument.')


def _abs_slope(u, tangent):
    if np.any((u == 0) & (tangent != 0)):
        raise NonDifferentiableError('abs is not differentiable at 0.')
    return np.sign(u)


@attrs.frozen
class Function:
    value: object
    slope: object
    check: object = None


FUNCTIONS = {
    'sin': Function(np.sin, lambda u, du: np.cos(u)),
    'cos': Function(np.cos, lambda u, du: -np.sin(u)),
    'tan': Function(np.tan, lambda u, du: 1.0 / np.cos(u) ** 2),
    'tanh': Function(np.tanh, lambda u, du: _sech(u) ** 2),
    'sech': Function(_sech, lambda u, du: -_sech(u) * np.tanh(u)),
    'exp': Function(np.exp, lambda u, du: np.exp(u)),
    'ln': Function(np.log, lambda u, du: 1.0 / u, lambda u: _require_positive('ln', u)),
    'abs': Function(np.abs, _abs_slope),
    'sqrt': Function(np.sqrt, lambda u, du: 0.5 / np.sqrt(u), lambda u: _require_non_negative('sqrt', u)),
}

CONSTANTS = {'pi': math.pi, 'e': math.e}


# --- Tokenizer ---

@attrs.frozen
class Token:
    kind: str
    text: str
    offset: int


_TOKEN_RE = re.compile(r'''
    (?P<space>\s+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
''', re.VERBOSE)

_VARIABLE_RE = re.compile(r'x(\d+)')


def tokenize(source):
    tokens = []
    position = 0
    while position < len(source):
        match = _TOKEN_RE.match(source, position)
        if match is None:
            raise ExpressionSyntaxError(
                f'Unexpected character {source[position]!r}.', offset=position, source=source)
        kind = match.lastgroup
        if kind != 'space':
            tokens.append(Token(kind, match.group(), position))
        position = match.end()
    tokens.append(Token('end', '', len(source)))
    return tokens


# --- Parser ---

class Parser:
    """Recursive-descent parser over the token list produced by tokenize()."""

    def __init__(self, source, n=None):
        self.source = source
        self.n = n
        self.tokens = tokenize(source)
        self.position = 0
        self.depth = 0
        self.heights = {}

    @property
    def peek(self):
        return self.tokens[self.position]

    def advance(self):
        token = self.tokens[self.position]
        if token.kind != 'end':
            self.position += 1
        return token

    def accept(self, text):
        if self.peek.kind == 'op' and self.peek.text == text:
            return self.advance()
        return None

    def expect(self, text):
        token = self.accept(text)
        if token is None:
            found = self.peek.text or 'end of input'
            raise ExpressionSyntaxError(
                f'Expected {text!r} but found {found!r}.', offset=self.peek.offset, source=self.source)
        return token

    def parse(self):
        node = self.expression()
        if self.peek.kind != 'end':
            raise ExpressionSyntaxError(
                f'Unexpected {self.peek.text!r}.', offset=self.peek.offset, source=self.source)
        return node

    def expression(self):
        node = self.term()
        while self.peek.kind == 'op' and self.peek.text in '+-':
            op = self.advance()
            node = self.build(BinaryOp(op.text, node, self.term()), op)
        return node

    def term(self):
        node = self.unary()
        while self.peek.kind == 'op' and self.peek.text in '*/':
            op = self.advance()
            node = self.build(BinaryOp(op.text, node, self.unary()), op)
        return node

    def unary(self):
        self.enter()
        try:
            sign = self.accept('-')
            if sign:
                return self.build(UnaryOp('-', self.unary()), sign)
            if self.accept('+'):
                return self.unary()
            return self.power()
        finally:
            self.depth -= 1

    def power(self):
        base = self.primary()
        caret = self.accept('^')
        if caret:
            return self.build(BinaryOp('^', base, self.unary()), caret)
        return base

    def primary(self):
        token = self.peek
        if token.kind == 'number':
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExpressionSyntaxError(
                    f'Number {token.text!r} is out of range.', offset=token.offset, source=self.source)
            return Constant(value)
        if token.kind == 'name':
            self.advance()
            return self.name(token)
        if self.accept('('):
            node = self.expression()
            self.expect(')')
            return node
        found = token.text or 'end of input'
        raise ExpressionSyntaxError(f'Unexpected {found!r}.', offset=token.offset, source=self.source)

    def name(self, token):
        if token.text in FUNCTIONS:
            if self.peek.text != '(':
                raise ExpressionSyntaxError(
                    f'Function {token.text!r} must be called with parentheses.',
                    offset=token.offset, source=self.source)
            open_paren = self.advance()
            if self.peek.text == ')':
                raise ArityError(
                    f'{token.text} takes exactly 1 argument (0 given).',
                    offset=open_paren.offset, source=self.source)
            argument = self.expression()
            if self.peek.text == ',':
                raise ArityError(
                    f'{token.text} takes exactly 1 argument.', offset=self.peek.offset, source=self.source)
            self.expect(')')
            return self.build(Call(token.text, argument), token)
        if token.text in CONSTANTS:
            return Constant(CONSTANTS[token.text], token.text)
        match = _VARIABLE_RE.fullmatch(token.text)
        if match:
            index = int(match.group(1))
            if index >= 1 and (self.n is None or index <= self.n):
                return Variable(index)
            bound = f'x1..x{self.n}' if self.n else 'x1, x2, ...'
            raise UnknownIdentifierError(
                f'Variable {token.text!r} is out of range ({bound}).', offset=token.offset, source=self.source)
        raise UnknownIdentifierError(
            f'Unknown identifier {token.text!r}.', offset=token.offset, source=self.source)

    def build(self, node, token):
        """Record the height of a new inner node; too tall a tree is a syntax error."""
        children = (node.operand,) if isinstance(node, UnaryOp) else (
            (node.argument,) if isinstance(node, Call) else (node.left, node.right))
        height = 1 + max(self.heights.get(id(child), 0) for child in children)
        if height > MAX_DEPTH:
            raise ExpressionSyntaxError(
                f'Expression is too long to evaluate (more than {MAX_DEPTH} levels).',
                offset=token.offset, source=self.source)
        self.heights[id(node)] = height
        return node

    def enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ExpressionSyntaxError(
                'Expression nested too deeply.', offset=self.peek.offset, source=self.source)


def parse(source, n=None):
    """
    Parse `source` into an Expression. When `n` is given, variables beyond
    x{n} are rejected as unknown identifiers.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExpressionSyntaxError('Expression text is empty.', offset=0, source=source)
    return Expression(Parser(source, n).parse(), source)


# --- Pretty printer ---

def _format(node):
    if isinstance(node, Constant):
        return node.name if node.name else repr(float(node.value))
    if isinstance(node, Variable):
        return f'x{node.index}'
    if isinstance(node, UnaryOp):
        return f'({node.op}{_format(node.operand)})'
    if isinstance(node, BinaryOp):
        return f'({_format(node.left)} {node.op} {_format(node.right)})'
    return f'{node.function}({_format(node.argument)})'


def format_expression(expr):
    """Canonical, fully parenthesised text; parse(format_expression(e)) == e.ast."""
    node = expr.ast if isinstance(expr, Expression) else expr
    return _format(node)


# --- Evaluation ---

def _coordinates(expr, point):
    point = np.asarray(point, dtype=float)
    if point.ndim not in (1, 2):
        raise DimensionError('Points must be a vector or a stack of vectors.')
    if expr.max_index > point.shape[-1]:
        raise DimensionError(
            f'Expression uses x{expr.max_index} but the point has dimension {point.shape[-1]}.')
    return point


def _is_integral(value):
    return np.all(np.isfinite(value) & (np.floor(value) == value))


def _real_power(base, exponent):
    if np.any((base < 0) & ~(np.floor(exponent) == exponent)):
        raise DomainError('Non-integer power of a negative base.')
    return np.power(base, exponent)


class _RealEvaluator:

    def __init__(self, point):
        self.point = point

    def visit(self, node):
        if isinstance(node, Constant):
            return node.value
        if isinstance(node, Variable):
            return self.point[..., node.index - 1]
        if isinstance(node, UnaryOp):
            return -self.visit(node.operand)
        if isinstance(node, BinaryOp):
            left, right = self.visit(node.left), self.visit(node.right)
            if node.op == '+':
                return left + right
            if node.op == '-':
                return left - right
            if node.op == '*':
                return left * right
            if node.op == '/':
                return np.divide(left, right)
            return _real_power(np.asarray(left, dtype=float), np.asarray(right, dtype=float))
        function = FUNCTIONS[node.function]
        argument = np.asarray(self.visit(node.argument), dtype=float)
        if function.check:
            function.check(argument)
        return function.value(argument)


class _DualEvaluator:

    def __init__(self, point, seed_index):
        self.point = point
        self.seed_index = seed_index
        self.zero = np.zeros(point.shape[:-1])

    def visit(self, node):
        if isinstance(node, Constant):
            return DualNumber(node.value + self.zero, self.zero)
        if isinstance(node, Variable):
            tangent = 1.0 if node.index == self.seed_index else 0.0
            return DualNumber(self.point[..., node.index - 1], tangent + self.zero)
        if isinstance(node, UnaryOp):
            return -self.visit(node.operand)
        if isinstance(node, BinaryOp):
            left, right = self.visit(node.left), self.visit(node.right)
            if node.op == '+':
                return left + right
            if node.op == '-':
                return left - right
            if node.op == '*':
                return left * right
            if node.op == '/':
                return left / right
            return self.power(left, right)
        function = FUNCTIONS[node.function]
        argument = self.visit(node.argument)
        if function.check:
            function.check(argument.value)
        slope = function.slope(argument.value, argument.derivative)
        # an infinite slope times a zero tangent stays 0
        derivative = np.where(argument.derivative != 0, slope * argument.derivative, 0.0)
        return DualNumber(function.value(argument.value), derivative)

    @staticmethod
    def power(base, exponent):
        value = _real_power(base.value, exponent.value)
        constant_exponent = np.all(exponent.derivative == 0)
        if constant_exponent and _is_integral(exponent.value) and np.all(exponent.value == 0):
            return DualNumber(value, 0.0 * base.derivative)
        # d(u^v) = v u^(v-1) du + u^v ln(u) dv; the log term only where dv != 0
        derivative = np.where(
            base.derivative != 0,
            exponent.value * _real_power(base.value, exponent.value - 1) * base.derivative,
            0.0,
        )
        if not constant_exponent:
            varying = exponent.derivative != 0
            if np.any(varying & (base.value <= 0)):
                raise DomainError('Variable exponent requires a positive base.')
            safe_base = np.where(varying, base.value, 1.0)
            derivative = derivative + value * np.log(safe_base) * exponent.derivative
        return DualNumber(value, derivative)


def _finite_or_raise(value, what):
    if not np.all(np.isfinite(value)):
        raise NonFiniteValueError(f'{what} is not finite.', value=value)


def _unwrap(value, point):
    value = np.asarray(value, dtype=float)
    if point.ndim == 1:
        return float(value)
    return np.broadcast_to(value, point.shape[:-1]).copy()


def evaluate(expr, point):
    """
    Value of `expr` at `point` (a float), or at every row of a stack of
    points (an array). Non-finite results raise NonFiniteValueError carrying
    the offending value; nothing is clamped.
    """
    point = _coordinates(expr, point)
    with np.errstate(all='ignore'):
        value = _RealEvaluator(point).visit(expr.ast)
    value = _unwrap(value, point)
    _finite_or_raise(value, f'Value of {expr.source!r}')
    return value


def eval_dual(expr, point, seed_index):
    """
    Value and exact partial derivative with respect to x{seed_index}.
    """
    point = _coordinates(expr, point)
    if not 1 <= seed_index <= point.shape[-1]:
        raise DimensionError(f'Seed index {seed_index} outside 1..{point.shape[-1]}.')
    with np.errstate(all='ignore'):
        result = _DualEvaluator(point, seed_index).visit(expr.ast)
    value = _unwrap(result.value, point)
    derivative = _unwrap(result.derivative, point)
    _finite_or_raise(value, f'Value of {expr.source!r}')
    _finite_or_raise(derivative, f'Derivative of {expr.source!r} along x{seed_index}')
    return DualNumber(value, derivative)
