"""Parser and printer for weak-form equation strings.

Grammar (whitespace insignificant)::

    equation := side "=" side
    side     := "0" | [sign] product { sign product }
    product  := [number "*"] call
    call     := ident "." ident "." ident "(" arg { "," arg } ")"
    arg      := ident "." ident | ident | "d" ident "/dt"
    sign     := "+" | "-"

A call names the term, the integral and the region. Solving uses the
residual ``LHS - RHS``.
"""
from dataclasses import dataclass
import re

from .errors import ParseError, TermError
from .terms import check_arity

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[=+\-*(),./])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


@dataclass(frozen=True)
class Arg:
    """A term argument: material parameter, variable or time derivative."""

    kind: str  # 'material' | 'variable' | 'dt'
    name: str
    parameter: str = None

    @property
    def is_material(self):
        return self.kind == 'material'

    @property
    def material(self):
        return self.name if self.kind == 'material' else None

    @property
    def variable(self):
        return None if self.kind == 'material' else self.name

    def __str__(self):
        if self.kind == 'material':
            return f'{self.name}.{self.parameter}'
        if self.kind == 'dt':
            return f'd{self.name}/dt'
        return self.name


@dataclass(frozen=True)
class TermCall:
    name: str
    integral: str
    region: str
    args: tuple
    sign: int = 1
    coef: float = None

    @property
    def factor(self):
        return self.sign * (1.0 if self.coef is None else self.coef)

    @property
    def variables(self):
        return [a.name for a in self.args if not a.is_material]

    @property
    def dt_args(self):
        return [a for a in self.args if a.kind == 'dt']

    def call_str(self):
        args = ', '.join(str(a) for a in self.args)
        return f'{self.name}.{self.integral}.{self.region}({args})'

    def __str__(self):
        coef = '' if self.coef is None else f'{self.coef!r} * '
        return f'{coef}{self.call_str()}'


@dataclass(frozen=True)
class Equation:
    """Both sides of an equation; an empty side stands for the literal 0."""

    lhs: tuple
    rhs: tuple

    @property
    def terms(self):
        return self.lhs + self.rhs

    def residual_terms(self):
        """(factor, call) pairs of ``LHS - RHS``."""
        return ([(t.factor, t) for t in self.lhs]
                + [(-t.factor, t) for t in self.rhs])

    def __str__(self):
        return f'{format_side(self.lhs)} = {format_side(self.rhs)}'


def format_side(calls):
    if not calls:
        return '0'
    out = []
    for i, c in enumerate(calls):
        if i == 0:
            out.append(('- ' if c.sign < 0 else '') + str(c))
        else:
            out.append(('- ' if c.sign < 0 else '+ ') + str(c))
    return ' '.join(out)


def format_equation(eq):
    return str(eq)


def _line_col(text, pos):
    line = text.count('\n', 0, pos) + 1
    col = pos - (text.rfind('\n', 0, pos) + 1) + 1
    return line, col


def tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = _line_col(text, pos)
            raise ParseError(f'unexpected character {text[pos]!r}', text=text,
                             pos=pos, line=line, column=col)
        if m.lastgroup != 'ws':
            toks.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(Token('end', '', len(text)))
    return toks


class _Parser:
    def __init__(self, text, check_terms):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.check_terms = check_terms

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        line, col = _line_col(self.text, tok.pos)
        found = 'end of input' if tok.kind == 'end' else repr(tok.text)
        raise ParseError(f'{msg}, found {found}', text=self.text, pos=tok.pos,
                         line=line, column=col)

    def expect(self, kind, text=None, what=None):
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            self.error(f'expected {what or (repr(text) if text else kind)}')
        self.i += 1
        return tok

    def is_op(self, text, k=0):
        tok = self.peek(k)
        return tok.kind == 'op' and tok.text == text

    def equation(self):
        lhs = self.side()
        self.expect('op', '=', "'='")
        rhs = self.side()
        if self.peek().kind != 'end':
            self.error('expected end of equation')
        return Equation(lhs, rhs)

    def side(self):
        tok = self.peek()
        if tok.kind == 'number' and not self.is_op('*', 1):
            if float(tok.text) != 0.0 or tok.text.strip('0.') != '':
                self.error("expected '0' or a term", tok)
            self.i += 1
            return ()
        calls = []
        sign = 1
        if self.is_op('+') or self.is_op('-'):
            sign = -1 if self.peek().text == '-' else 1
            self.i += 1
        calls.append(self.product(sign))
        while self.is_op('+') or self.is_op('-'):
            sign = -1 if self.peek().text == '-' else 1
            self.i += 1
            calls.append(self.product(sign))
        return tuple(calls)

    def product(self, sign):
        coef = None
        if self.peek().kind == 'number':
            coef = float(self.peek().text)
            self.i += 1
            self.expect('op', '*', "'*'")
        return self.call(sign, coef)

    def call(self, sign=1, coef=None):
        start = self.peek()
        name = self.expect('ident', what='term name').text
        self.expect('op', '.', "'.'")
        integral = self.expect('ident', what='integral name').text
        self.expect('op', '.', "'.'")
        region = self.expect('ident', what='region name').text
        self.expect('op', '(', "'('")
        args = [self.arg()]
        while self.is_op(','):
            self.i += 1
            args.append(self.arg())
        if not self.is_op(')'):
            self.error("expected ',' or ')'")
        self.i += 1
        if self.check_terms:
            try:
                check_arity(name, len(args))
            except TermError as exc:
                line, col = _line_col(self.text, start.pos)
                raise ParseError(str(exc), text=self.text, pos=start.pos,
                                 line=line, column=col) from None
        return TermCall(name, integral, region, tuple(args), sign, coef)

    def arg(self):
        tok = self.expect('ident', what='argument')
        if self.is_op('.'):
            self.i += 1
            param = self.expect('ident', what='material parameter').text
            return Arg('material', tok.text, param)
        if self.is_op('/'):
            if not tok.text.startswith('d') or len(tok.text) < 2:
                self.error("time derivative must be written 'd<var>/dt'", tok)
            self.i += 1
            dt = self.expect('ident', what="'dt'")
            if dt.text != 'dt':
                self.error("expected 'dt'", dt)
            return Arg('dt', tok.text[1:])
        return Arg('variable', tok.text)


def parse_equation(text, check_terms=True):
    """Parse an equation string into an :class:`Equation`.

    With ``check_terms`` the term names and argument counts are validated
    against the term table.
    """
    if not isinstance(text, str):
        raise ParseError(f'equation must be a string, got {type(text).__name__}')
    return _Parser(text, check_terms).equation()


def parse_call(text, check_terms=True):
    """Parse a single term call such as ``dw_laplace.i.Y(m.c, p, q)``."""
    p = _Parser(text, check_terms)
    call = p.call()
    if p.peek().kind != 'end':
        p.error('expected end of term call')
    return call
