"""Safe arithmetic expressions used for configuration functions.

Expressions are parsed with :mod:`ast` and evaluated by walking a small
whitelist of node types; no Python code is ever executed. Two flavours are
used: functions of the coordinates ``x, y, z`` and time ``t`` (with
``sin``, ``cos``, ``exp`` and friends, ``pi`` and user constants), and
coefficient formulas over operands ``c.<name>``.
"""
import ast
import operator

import numpy as np

from .errors import ConfigError, ParseError

FUNCTIONS = {'sin': np.sin, 'cos': np.cos, 'tan': np.tan, 'exp': np.exp,
             'log': np.log, 'sqrt': np.sqrt, 'abs': np.abs}
CONSTANTS = {'pi': np.pi, 'e': np.e}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_OP_SYMBOL = {ast.Add: '+', ast.Sub: '-', ast.Mult: '*', ast.Div: '/',
              ast.Pow: '**'}


class Expression:
    """A validated expression.

    Parameters
    ----------
    text : str
    variables : iterable of str
        Names that must be supplied at evaluation time.
    constants : dict, optional
        Named constants bound at compile time.
    binops : str
        Allowed binary operator symbols.
    allow_calls : bool
        Whether calls to the functions in ``FUNCTIONS`` are allowed.
    attr_base : str, optional
        If given, ``<attr_base>.<name>`` operands are allowed and read from
        the ``operands`` mapping at evaluation time.
    """

    def __init__(self, text, variables=(), constants=None, binops='+-*/',
                 allow_calls=True, attr_base=None):
        if not isinstance(text, str):
            raise ConfigError(f'expression must be a string, got {text!r}')
        self.text = text
        self.variables = frozenset(variables)
        self.constants = {**CONSTANTS, **(constants or {})}
        self.binops = set(binops.split()) if ' ' in binops else set(binops)
        if '**' in binops:
            self.binops.add('**')
        self.allow_calls = allow_calls
        self.attr_base = attr_base
        try:
            tree = ast.parse(text.strip(), mode='eval')
        except SyntaxError as exc:
            raise ParseError(f'invalid expression {text!r}: {exc.msg}',
                             text=text, column=exc.offset) from None
        self.tree = tree.body
        self.names = set()
        self.operands = []
        self._check(self.tree)

    def __repr__(self):
        return f'Expression({self.text!r})'

    def _fail(self, node, msg):
        raise ParseError(f'{msg} in expression {self.text!r}', text=self.text,
                         column=getattr(node, 'col_offset', -1) + 1)

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                self._fail(node, f'unsupported literal {node.value!r}')
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in self.constants:
                self._fail(node, f'unknown name {node.id!r}')
            self.names.add(node.id)
        elif isinstance(node, ast.Attribute):
            if (self.attr_base is None or not isinstance(node.value, ast.Name)
                    or node.value.id != self.attr_base):
                self._fail(node, 'attribute access is not allowed')
            if node.attr not in self.operands:
                self.operands.append(node.attr)
        elif isinstance(node, ast.BinOp):
            sym = _OP_SYMBOL.get(type(node.op))
            if sym is None or sym not in self.binops:
                self._fail(node, f'operator {sym or type(node.op).__name__} '
                                 f'is not allowed')
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                self._fail(node, 'unsupported unary operator')
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if (not self.allow_calls or not isinstance(node.func, ast.Name)
                    or node.func.id not in FUNCTIONS):
                name = getattr(node.func, 'id', '?')
                self._fail(node, f'unknown function {name!r}')
            if len(node.args) != 1 or node.keywords:
                self._fail(node, f'{node.func.id} takes one argument')
            self._check(node.args[0])
        else:
            self._fail(node, f'unsupported syntax {type(node).__name__}')

    def __call__(self, operands=None, **values):
        missing = (self.names & self.variables) - values.keys()
        if missing:
            raise ConfigError(f'expression {self.text!r} needs values for '
                              f'{sorted(missing)}')
        return self._eval(self.tree, values, operands or {})

    def _eval(self, node, values, operands):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in values:
                return values[node.id]
            return self.constants[node.id]
        if isinstance(node, ast.Attribute):
            try:
                return operands[node.attr]
            except KeyError:
                raise ConfigError(f'unknown operand {self.attr_base}.'
                                  f'{node.attr}') from None
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, values, operands),
                                          self._eval(node.right, values, operands))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, values, operands))
        return FUNCTIONS[node.func.id](self._eval(node.args[0], values, operands))


COORD_NAMES = ('x', 'y', 'z')


def space_time_function(text, constants=None):
    """Compile an expression of ``x, y, z, t`` into ``f(coors, t)``.

    The returned callable evaluates the expression on an (n, dim) array and
    returns an (n,) array. Using a coordinate beyond the mesh dimension
    raises :class:`ConfigError`.
    """
    expr = Expression(text, variables=COORD_NAMES + ('t',), constants=constants,
                      binops='+ - * / **')

    def fun(coors, t=0.0):
        coors = np.atleast_2d(np.asarray(coors, dtype=np.float64))
        n, dim = coors.shape
        env = {'t': t}
        for i, name in enumerate(COORD_NAMES):
            if name in expr.names:
                if i >= dim:
                    raise ConfigError(f'coordinate {name!r} used in '
                                      f'{text!r} is not defined in {dim}D')
                env[name] = coors[:, i]
            else:
                env[name] = None
        out = expr(**env)
        return np.broadcast_to(np.asarray(out, dtype=np.float64), (n,)).copy()

    fun.expression = expr
    return fun


def coefficient_formula(text):
    """Compile a ``c.<name>`` formula with ``+``, ``-``, ``*`` and literals."""
    return Expression(text, binops='+-*', allow_calls=False, attr_base='c')
