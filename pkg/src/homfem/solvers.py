"""Linear solvers, Newton iteration and time-stepping drivers."""
from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError, SingularMatrixError, SolverError

log = logging.getLogger(__name__)

PIVOT_RATIO_TOL = 1e-14
DIRECT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class LinearConfig:
    method: str = 'direct'
    dense_threshold: int = 2000
    max_iter: int = 10000
    rtol: float = 1e-12
    atol: float = 1e-300

    def __post_init__(self):
        if self.method not in ('direct', 'iterative'):
            raise ConfigError(f'unknown linear solver method {self.method!r}',
                              key='solvers.linear.method')
        if self.rtol <= 0 or self.atol <= 0 or self.max_iter < 1:
            raise ConfigError('linear solver tolerances and max_iter must be '
                              'positive', key='solvers.linear')


@dataclass(frozen=True)
class NewtonConfig:
    i_max: int = 20
    eps_a: float = 1e-10
    eps_r: float = 1e-8
    ls_beta: float = 0.5
    ls_min: float = 1e-6
    eps_x: float = 1e-13

    def __post_init__(self):
        if self.eps_a <= 0 or self.eps_r <= 0 or self.eps_x < 0 or self.i_max < 1:
            raise ConfigError('Newton tolerances and i_max must be positive',
                              key='solvers.newton')
        if not 0.0 < self.ls_beta < 1.0:
            raise ConfigError('line-search factor must lie in (0, 1)',
                              key='solvers.newton.ls_beta')
        if not 0.0 < self.ls_min <= 1.0:
            raise ConfigError('minimum line-search step must lie in (0, 1]',
                              key='solvers.newton.ls_min')


@dataclass(frozen=True)
class TimeConfig:
    kind: str = 'stationary'
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if self.kind not in ('stationary', 'simple'):
            raise ConfigError(f'unknown time-stepping kind {self.kind!r}',
                              key='solvers.ts.kind')
        if self.kind == 'simple':
            if not self.dt > 0:
                raise ConfigError('time step must be positive', key='solvers.ts.dt')
            if not self.t1 > self.t0:
                raise ConfigError('t1 must exceed t0', key='solvers.ts.t1')

    @property
    def n_step(self):
        return max(1, int(round((self.t1 - self.t0) / self.dt)))

    def times(self):
        return self.t0 + self.dt * np.arange(1, self.n_step + 1)


@dataclass(frozen=True)
class SolverConfig:
    linear: LinearConfig = field(default_factory=LinearConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    ts: TimeConfig = field(default_factory=TimeConfig)


def _as_sparse(a):
    return a.tocsr() if sp.issparse(a) else sp.csr_matrix(np.asarray(a, dtype=np.float64))


def _scaling(a):
    """Symmetric diagonal scaling from row and column maxima."""
    rmax = abs(a).max(axis=1).toarray().ravel()
    cmax = abs(a).max(axis=0).toarray().ravel()
    scale = np.maximum(rmax, cmax)
    zero = np.flatnonzero(rmax == 0.0)
    if len(zero):
        raise SingularMatrixError(f'matrix has {len(zero)} zero row(s), first '
                                  f'{int(zero[0])}', zero_rows=zero.tolist())
    zero = np.flatnonzero(cmax == 0.0)
    if len(zero):
        raise SingularMatrixError(f'matrix has {len(zero)} zero column(s)',
                                  zero_cols=zero.tolist())
    return 1.0 / np.sqrt(scale)


def is_symmetric(a, tol=1e-12):
    a = _as_sparse(a)
    diff = abs(a - a.T).max() if a.nnz else 0.0
    return diff <= tol * max(abs(a).max() if a.nnz else 0.0, 1e-300)


class Factorization:
    """Reusable direct factorization with equilibration and refinement."""

    def __init__(self, a, cfg=None):
        cfg = cfg or LinearConfig()
        a = _as_sparse(a)
        n, m = a.shape
        if n != m:
            raise SolverError(f'matrix must be square, got {a.shape}')
        self.a = a
        self.n = n
        self.s = _scaling(a) if n else np.ones(0)
        scaled = sp.diags(self.s) @ a @ sp.diags(self.s)
        self.dense = n <= cfg.dense_threshold
        if self.dense:
            dense = scaled.toarray()
            # Singularity is judged by the pivot ratio below.
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', sla.LinAlgWarning)
                lu, piv = sla.lu_factor(dense, check_finite=True)
            udiag = np.abs(np.diag(lu))
            self._lu = (lu, piv)
        else:
            try:
                self._lu = spla.splu(scaled.tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(f'sparse LU failed: {exc}') from exc
            udiag = np.abs(self._lu.U.diagonal())
        if n and (udiag.min() <= PIVOT_RATIO_TOL * udiag.max()):
            raise SingularMatrixError(
                f'matrix is singular to working precision (pivot ratio '
                f'{udiag.min() / max(udiag.max(), 1e-300):.3e})',
                pivot_ratio=float(udiag.min() / max(udiag.max(), 1e-300)))

    def _raw(self, b):
        y = b * self.s
        if self.dense:
            x = sla.lu_solve(self._lu, y)
        else:
            x = self._lu.solve(y)
        return x * self.s

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.n,):
            raise SolverError(f'right-hand side has shape {b.shape}, expected '
                              f'({self.n},)')
        if not self.n:
            return np.zeros(0)
        x = self._raw(b)
        bnorm = np.linalg.norm(b)
        res = b - self.a @ x
        for _ in range(2):
            if np.linalg.norm(res) <= 1e-14 * bnorm:
                break
            x = x + self._raw(res)
            res = b - self.a @ x
        rnorm = np.linalg.norm(res)
        if not np.isfinite(rnorm) or rnorm > DIRECT_RESIDUAL_TOL * bnorm:
            raise SingularMatrixError(
                f'direct solve residual {rnorm:.3e} exceeds '
                f'{DIRECT_RESIDUAL_TOL:g} * |b| = {DIRECT_RESIDUAL_TOL * bnorm:.3e}',
                residual=float(rnorm))
        return x


def factorize(a, cfg=None):
    return Factorization(a, cfg)


def _iterative(a, b, cfg):
    a = _as_sparse(a)
    n = a.shape[0]
    _scaling(a)
    diag = a.diagonal()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    count = [0]

    def cb(*_):
        count[0] += 1

    if is_symmetric(a) and np.all(diag > 0):
        prec = sp.diags(1.0 / diag)
        x, info = spla.cg(a, b, rtol=cfg.rtol, atol=cfg.atol,
                          maxiter=cfg.max_iter, M=prec, callback=cb)
        name = 'cg'
    else:
        safe = np.where(diag != 0.0, diag, 1.0)
        prec = sp.diags(1.0 / safe)
        x, info = spla.bicgstab(a, b, rtol=cfg.rtol, atol=cfg.atol,
                                maxiter=cfg.max_iter, M=prec, callback=cb)
        name = 'bicgstab'
    rnorm = float(np.linalg.norm(b - a @ x))
    if info != 0 or not np.isfinite(rnorm) or rnorm > max(cfg.atol, 10 * cfg.rtol * bnorm):
        raise ConvergenceError(f'{name} did not converge: {count[0]} iterations, '
                               f'residual {rnorm:.3e}', iterations=count[0],
                               residual=rnorm, method=name)
    return x


def solve_linear(a, b, cfg=None):
    """Solve ``a x = b``; ``cfg.method`` selects direct or iterative."""
    cfg = cfg or LinearConfig()
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != a.shape[1] or a.shape[0] != len(b):
        raise SolverError(f'matrix {a.shape} and right-hand side {b.shape} '
                          f'do not match')
    if cfg.method == 'iterative':
        return _iterative(a, b, cfg)
    return Factorization(a, cfg).solve(b)


@dataclass
class NewtonReport:
    converged: bool = False
    iterations: int = 0
    residuals: list = field(default_factory=list)
    backtracks: int = 0
    stagnated: bool = False

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else math.nan


def _negligible(delta, x, eps_x):
    return float(np.linalg.norm(delta)) <= eps_x * float(np.linalg.norm(x))


def newton(residual, jacobian, x0, cfg=None, linear=None, solve=None):
    """Newton iteration with backtracking line search.

    ``residual(x)`` returns the residual vector and ``jacobian(x)`` its
    matrix. ``solve(A, b)`` overrides the linear solver. Convergence is
    ``|r| <= eps_a`` or ``|r| <= eps_r |r(x0)|`` in the Euclidean norm.
    When the line search cannot reduce a residual that is already at
    round-off level, signalled by a full step ``|dx| <= eps_x |x|``, the
    iteration stops as converged with ``report.stagnated`` set.
    """
    cfg = cfg or NewtonConfig()
    if solve is None:
        def solve(a, b):
            return solve_linear(a, b, linear)
    x = np.array(x0, dtype=np.float64, copy=True)
    r = np.asarray(residual(x), dtype=np.float64)
    r0 = rn = float(np.linalg.norm(r))
    rep = NewtonReport(residuals=[r0])
    if not np.isfinite(r0):
        raise ConvergenceError('initial residual is not finite', report=rep)
    if r0 <= cfg.eps_a:
        rep.converged = True
        return x, rep
    while rep.iterations < cfg.i_max:
        a = jacobian(x)
        delta = solve(a, -r)
        alpha = 1.0
        while True:
            xn = x + alpha * delta
            rnew = np.asarray(residual(xn), dtype=np.float64)
            nn = float(np.linalg.norm(rnew))
            if np.isfinite(nn) and (nn < rn or nn <= cfg.eps_a):
                break
            if alpha == 1.0 and _negligible(delta, x, cfg.eps_x):
                rep.converged = rep.stagnated = True
                return x, rep
            alpha *= cfg.ls_beta
            rep.backtracks += 1
            if alpha < cfg.ls_min:
                raise ConvergenceError(
                    f'line search stalled at iteration {rep.iterations + 1} '
                    f'(residual {rn:.3e})', report=rep)
        x, r, rn = xn, rnew, nn
        rep.iterations += 1
        rep.residuals.append(rn)
        log.debug('newton %d: |r| = %.6e', rep.iterations, rn)
        if rn <= cfg.eps_a or rn <= cfg.eps_r * r0:
            rep.converged = True
            return x, rep
    raise ConvergenceError(f'Newton did not converge in {cfg.i_max} iterations '
                           f'(residual {rn:.3e}, initial {r0:.3e})', report=rep)


@dataclass
class StepResult:
    step: int
    time: float
    state: np.ndarray
    report: NewtonReport


def run_stationary(problem, cfg=None):
    """Single Newton solve at ``t0``; returns a :class:`StepResult`."""
    cfg = cfg or problem.solver_config
    if problem.has_time_derivative:
        raise ConfigError('stationary solve of equations with time derivatives',
                          key='solvers.ts.kind')
    t = cfg.ts.t0
    u, rep = problem.solve_step(t, None, None, cfg)
    return StepResult(0, t, u, rep)


def run_implicit(problem, cfg=None, callback=None):
    """Backward Euler time stepping; returns the list of step results.

    Step 0 is the initial state. ``callback(step_result)`` is invoked for
    every step including the initial one.
    """
    cfg = cfg or problem.solver_config
    ts = cfg.ts
    u = problem.initial_state()
    out = [StepResult(0, ts.t0, u, NewtonReport(converged=True))]
    if callback:
        callback(out[0])
    for i, t in enumerate(ts.times(), start=1):
        try:
            u, rep = problem.solve_step(float(t), ts.dt, u, cfg)
        except SolverError as exc:
            exc.info['step'] = i
            raise type(exc)(f'step {i} (t = {t:g}): {exc}', **exc.info) from exc
        res = StepResult(i, float(t), u, rep)
        out.append(res)
        if callback:
            callback(res)
    return out
