"""Iterative schemes for alpha*||x||_1 - beta*||x||_2 regularized least squares.

All solvers share one loop: maintain ``x`` and ``A x``, compute a trial point
from the gradient ``A^T (A x - y)``, move along the segment to it and record
the new iterate. They differ only in how the trial point is produced:

* ``solve_ista``: soft threshold with step 1 (plain l1 problem, no line search)
* ``solve_st_l1l2``: soft threshold of the linearized l1-l2 subproblem + line search
* ``solve_pg_gcgm``: l1-ball projection of the same linearization + line search
* ``solve_pg_sf``: implicit projected step on the surrogate, solved by fixed point
"""

from __future__ import annotations

import bisect
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    ContractViolation,
    Objective,
    IterationTrace,
    ProblemInstance,
    SolveOutcome,
    SolverConfig,
    Termination,
    operator_norm_sq,
)
from .prox import project_l1_ball, soft_threshold

log = logging.getLogger(__name__)

ZERO_NORM = 1e-14
GRID_POINTS = 33
GOLDEN_WIDTH = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
# A x is carried along by A x + s A d; recompute it exactly every so often.
_REFRESH_EVERY = 64


# --- objectives ----------------------------------------------------------------

class ObjectiveEvaluator:
    """Evaluates J, D and the pieces F, Phi, Theta of J = F + Phi."""

    def __init__(self, problem: ProblemInstance, config: SolverConfig):
        self.problem = problem
        self.config = config

    def _fit(self, x):
        r = self.problem.operator.apply(x) - self.problem.y_noisy
        return 0.5 * float(r @ r)

    def J(self, x):
        c = self.config
        return self._fit(x) + c.alpha * float(np.abs(x).sum()) - c.beta * float(np.linalg.norm(x))

    def D(self, x):
        return self._fit(x) - self.config.beta * float(np.linalg.norm(x))

    def theta(self, x):
        nx = float(np.linalg.norm(x))
        return 0.5 * self.config.lam * nx * nx + self.config.beta * nx

    def F(self, x):
        return self._fit(x) - self.theta(x)

    def Phi(self, x):
        c = self.config
        return self.theta(x) + c.alpha * float(np.abs(x).sum()) - c.beta * float(np.linalg.norm(x))


def eval_J(x, p: ProblemInstance, cfg: SolverConfig) -> float:
    """``0.5 ||A x - y||^2 + alpha ||x||_1 - beta ||x||_2``."""
    return ObjectiveEvaluator(p, cfg).J(_check_len(x, p))


def eval_D(x, p: ProblemInstance, cfg: SolverConfig) -> float:
    """``0.5 ||A x - y||^2 - beta ||x||_2``."""
    return ObjectiveEvaluator(p, cfg).D(_check_len(x, p))


def _check_len(x, p):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n,):
        raise ContractViolation(f"expected vector of length {p.n}, got shape {x.shape}")
    return x


# --- line search -------------------------------------------------------------------

class _SegmentObjective:
    """``g(s) = J(x + s d)`` reduced to O(1)-size data.

    The fit and l2 terms are quadratics in ``s``; the l1 term is piecewise
    linear with a breakpoint wherever a coordinate changes sign inside
    ``(0, 1)``, so after an O(n) setup each evaluation costs O(log K) for K
    breakpoints.
    """

    def __init__(self, r, Ad, x, d, alpha, beta):
        self.alpha, self.beta = alpha, beta
        self.rr, self.rAd, self.AdAd = float(r @ r), float(r @ Ad), float(Ad @ Ad)
        self.xx, self.xd, self.dd = float(x @ x), float(x @ d), float(d @ d)
        sig = np.sign(x)
        at_zero = sig == 0
        sig[at_zero] = np.sign(d[at_zero])
        self.L0 = float(np.abs(x).sum())
        self.L1 = float(sig @ d)
        idx = np.nonzero(sig * (x + d) < 0)[0]
        b = -x[idx] / d[idx]
        order = np.argsort(b, kind="stable")
        idx = idx[order]
        self.breaks = b[order]
        self.breaks_list = self.breaks.tolist()
        self.c0 = [0.0] + np.cumsum(sig[idx] * x[idx]).tolist()
        self.c1 = [0.0] + np.cumsum(sig[idx] * d[idx]).tolist()

    def __call__(self, grid):
        """Vectorized evaluation on an array of step sizes."""
        j = np.searchsorted(self.breaks, grid, side="left")
        c0, c1 = np.asarray(self.c0)[j], np.asarray(self.c1)[j]
        l1 = self.L0 + grid * self.L1 - 2.0 * (c0 + grid * c1)
        val = 0.5 * (self.rr + 2.0 * grid * self.rAd + grid * grid * self.AdAd) + self.alpha * l1
        if self.beta:
            val = val - self.beta * np.sqrt(np.maximum(self.xx + 2.0 * grid * self.xd + grid * grid * self.dd, 0.0))
        return val

    def at(self, s):
        """Scalar evaluation in plain Python floats."""
        j = bisect.bisect_left(self.breaks_list, s)
        l1 = self.L0 + s * self.L1 - 2.0 * (self.c0[j] + s * self.c1[j])
        val = 0.5 * (self.rr + 2.0 * s * self.rAd + s * s * self.AdAd) + self.alpha * l1
        if self.beta:
            val -= self.beta * math.sqrt(max(self.xx + 2.0 * s * self.xd + s * s * self.dd, 0.0))
        return val


def _segment_line_search(r, Ad, x, d, alpha, beta):
    """Minimize g(s) = 0.5||r + s Ad||^2 + alpha||x + s d||_1 - beta||x + s d||_2 on [0, 1].

    Grid of ``GRID_POINTS`` values, then golden section on the bracket around
    the best grid point. The returned value never does worse than the best
    grid point, in particular never worse than ``s = 0`` or ``s = 1``.
    Returns ``(s, g(s), evaluations)``.
    """
    g = _SegmentObjective(r, Ad, x, d, alpha, beta)
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    vals = g(grid)
    i = int(np.argmin(vals))
    best_s, best_g = float(grid[i]), float(vals[i])
    evals = GRID_POINTS

    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, GRID_POINTS - 1)])
    c = hi - _INVPHI * (hi - lo)
    e = lo + _INVPHI * (hi - lo)
    gc, ge = g.at(c), g.at(e)
    evals += 2
    while hi - lo > GOLDEN_WIDTH:
        if gc <= ge:
            hi, e, ge = e, c, gc
            c = hi - _INVPHI * (hi - lo)
            gc = g.at(c)
        else:
            lo, c, gc = c, e, ge
            e = lo + _INVPHI * (hi - lo)
            ge = g.at(e)
        evals += 1
    s_gold, g_gold = (c, gc) if gc <= ge else (e, ge)
    if g_gold < best_g:
        best_s, best_g = s_gold, g_gold
    return best_s, best_g, evals


def line_search(x, z, p: ProblemInstance, cfg: SolverConfig) -> float:
    """Approximate minimizer over ``s in [0, 1]`` of ``J(x + s (z - x))``."""
    x = _check_len(x, p)
    z = _check_len(z, p)
    d = z - x
    r = p.operator.apply(x) - p.y_noisy
    Ad = p.operator.apply(d)
    s, _, _ = _segment_line_search(r, Ad, x, d, cfg.alpha, cfg.beta)
    return s


# --- shared iteration loop ---------------------------------------------------------

class _Recorder:
    def __init__(self, p, alpha, beta, objective, keep_iterates):
        self.p = p
        self.alpha = alpha
        self.beta = beta
        self.trace = IterationTrace(objective)
        self.keep = keep_iterates
        self.xt = p.x_true
        self.xt_norm = None if self.xt is None else float(np.linalg.norm(self.xt))
        self.t0 = time.perf_counter()

    def record(self, k, x, r, flag=""):
        res = float(np.linalg.norm(r))
        l1 = float(np.abs(x).sum())
        l2 = float(np.linalg.norm(x))
        fit = 0.5 * res * res
        rerr = None
        if self.xt is not None and self.xt_norm > 0:
            rerr = float(np.linalg.norm(x - self.xt)) / self.xt_norm
        self.trace.append(
            k,
            time.perf_counter() - self.t0,
            fit + self.alpha * l1 - self.beta * l2,
            fit - self.beta * l2,
            res,
            rerr,
            l1,
            l2,
            x if self.keep else None,
            flag,
        )


@dataclass
class _Step:
    x: np.ndarray
    Ax: np.ndarray
    flag: str = ""
    stop: bool = False


def _initial_point(p, cfg, x0):
    if x0 is None:
        return np.full(p.n, cfg.x0_scale, dtype=np.float64)
    return _check_len(x0, p).copy()


def _run(p, cfg, step, x0, objective, record_iterates, stats, beta=None):
    A, y = p.operator, p.y_noisy
    if cfg.objective is not None:
        objective = cfg.objective
    rec = _Recorder(p, cfg.alpha, cfg.beta if beta is None else beta, objective, record_iterates)
    x = _initial_point(p, cfg, x0)
    Ax = A.apply(x)
    rec.record(0, x, Ax - y)
    termination = Termination.BUDGET_EXHAUSTED
    k = 0
    for k in range(1, cfg.max_outer_iters + 1):
        out = step(x, Ax, k)
        if k % _REFRESH_EVERY == 0:
            out.Ax = A.apply(out.x)
        rec.record(k, out.x, out.Ax - y, out.flag)
        moved = float(np.linalg.norm(out.x - x))
        x, Ax = out.x, out.Ax
        if out.stop:
            termination = Termination.ZERO_ITERATE_HANDLED
            break
        if moved <= cfg.step_tol:
            termination = Termination.CONVERGED
            break
    stats["outer_iterations"] = k
    return SolveOutcome(x, rec.trace, termination, stats)


def _new_stats():
    return {
        "outer_iterations": 0,
        "inner_iterations": 0,
        "inner_nonconverged": 0,
        "zero_iterate_events": 0,
        "line_search_evals": 0,
    }


# --- ISTA -------------------------------------------------------------------------

def _require_unit_norm(p):
    r = operator_norm_sq(p.operator)
    if r >= 1.0:
        raise ConfigurationError(
            f"||A^T A|| is estimated at {r:.4g} >= 1; rescale the problem "
            "(core.rescale_problem) before running ISTA"
        )


def solve_ista(p: ProblemInstance, cfg: SolverConfig, x0=None, record_iterates=False,
               max_iters=None) -> SolveOutcome:
    """Iterative soft thresholding ``x <- S_alpha(x - A^T(Ax - y))`` for the plain l1 problem."""
    _require_unit_norm(p)
    A, y = p.operator, p.y_noisy
    if max_iters is not None:
        cfg = cfg.with_(max_outer_iters=max_iters)

    def step(x, Ax, k):
        xn = soft_threshold(x - A.apply_adjoint(Ax - y), cfg.alpha)
        return _Step(xn, A.apply(xn))

    return _run(p, cfg, step, x0, Objective.L1L2_PENALIZED, record_iterates, _new_stats(), beta=0.0)


def zero_iterate_fallback(p: ProblemInstance, cfg: SolverConfig) -> np.ndarray:
    """Approximate ``argmin 0.5||Ax - y||^2 + alpha||x||_1`` by ISTA started at 0."""
    out = solve_ista(p, cfg, x0=np.zeros(p.n), max_iters=cfg.max_inner_iters)
    return out.x_final


# --- ST and PG-GCGM (linearized subproblem + line search) ------------------------------

def _gcgm_loop(p, cfg, direction, x0, record_iterates, ls_alpha):
    A, y = p.operator, p.y_noisy
    beta = cfg.beta
    stats = _new_stats()

    def step(x, Ax, k):
        nx = float(np.linalg.norm(x))
        if nx < ZERO_NORM:
            stats["zero_iterate_events"] += 1
            xn = zero_iterate_fallback(p, cfg)
            if float(np.linalg.norm(xn)) < ZERO_NORM:
                return _Step(xn, A.apply(xn), "zero", stop=True)
            return _Step(xn, A.apply(xn), "zero")
        grad = A.apply_adjoint(Ax - y)
        z = direction(x, nx, grad)
        if cfg.unit_step:
            return _Step(z, A.apply(z))
        d = z - x
        Ad = A.apply(d)
        s, _, evals = _segment_line_search(Ax - y, Ad, x, d, ls_alpha, beta)
        stats["line_search_evals"] += evals
        return _Step(x + s * d, Ax + s * Ad)

    return _run(p, cfg, step, x0, Objective.L1L2_PENALIZED, record_iterates, stats)


def solve_st_l1l2(p: ProblemInstance, cfg: SolverConfig, x0=None, record_iterates=False) -> SolveOutcome:
    """Soft-thresholding scheme for the penalized l1-l2 problem.

    Trial point ``z = S_{alpha/lam}((beta/(lam ||x||) + 1) x - A^T(Ax - y)/lam)``,
    then ``x <- x + s (z - x)`` with ``s`` from the line search on J.
    """
    if cfg.objective is Objective.L1BALL_CONSTRAINED:
        raise ConfigurationError("the soft-thresholding scheme has no l1-ball form; use pg-gcgm")
    lam, beta, thr = cfg.lam, cfg.beta, cfg.alpha / cfg.lam

    def direction(x, nx, grad):
        return soft_threshold((beta / (lam * nx) + 1.0) * x - grad / lam, thr)

    return _gcgm_loop(p, cfg, direction, x0, record_iterates, cfg.alpha)


def solve_pg_gcgm(p: ProblemInstance, cfg: SolverConfig, x0=None, record_iterates=False) -> SolveOutcome:
    """Projected-gradient variant: the trial point is projected onto the l1 ball.

    ``z = P_R(x + beta x/(lam ||x||) - A^T(Ax - y)/lam)``; the step along
    ``z - x`` is chosen by the line search on J. With
    ``cfg.objective = Objective.L1BALL_CONSTRAINED`` the line search uses D
    instead, so the ball alone plays the role of the l1 penalty.
    """
    lam, beta, R = cfg.lam, cfg.beta, cfg.radius
    constrained = cfg.objective is Objective.L1BALL_CONSTRAINED

    def direction(x, nx, grad):
        return project_l1_ball(x + (beta / (lam * nx)) * x - grad / lam, R)

    return _gcgm_loop(p, cfg, direction, x0, record_iterates, 0.0 if constrained else cfg.alpha)


# --- PG-SF (surrogate function, implicit step) -------------------------------------------

@dataclass
class FixedPointReport:
    iterations_used: int
    final_residual: float
    converged: bool
    hit_zero: bool = False


def surrogate_fixed_point(b, gamma, R, w0=None, tol=1e-10, max_iter=200):
    """Solve ``w = P_R(b + gamma * w / ||w||)`` by plain fixed-point iteration.

    Starts from the all-ones vector unless ``w0`` is given. If an inner
    iterate collapses to zero the loop is abandoned and ``P_R(b)`` (the
    ``gamma = 0`` step) is returned with ``hit_zero`` set.
    """
    if gamma == 0:
        return project_l1_ball(b, R), FixedPointReport(1, 0.0, True)
    w = np.ones_like(b) if w0 is None else np.asarray(w0, dtype=np.float64)
    res = math.inf
    for it in range(1, max_iter + 1):
        nw = float(np.linalg.norm(w))
        if nw < ZERO_NORM:
            return project_l1_ball(b, R), FixedPointReport(it, math.nan, False, hit_zero=True)
        wn = project_l1_ball(b + (gamma / nw) * w, R)
        res = float(np.linalg.norm(wn - w))
        w = wn
        if res <= tol:
            return w, FixedPointReport(it, res, True)
    return w, FixedPointReport(max_iter, res, False)


def solve_pg_sf(p: ProblemInstance, cfg: SolverConfig, x0=None, record_iterates=False) -> SolveOutcome:
    """Surrogate-function projected gradient for ``min D`` over the l1 ball.

    Each outer step solves ``x+ = P_R(b + beta x+/(lam ||x+||))`` with
    ``b = x - A^T(Ax - y)/lam`` by fixed-point iteration from the all-ones
    vector. Non-converged inner loops are accepted and counted.
    """
    A, y = p.operator, p.y_noisy
    lam, beta, R = cfg.lam, cfg.beta, cfg.radius
    r = operator_norm_sq(A)
    if lam < r:
        log.warning("lam=%g is below ||A^T A||~%g; the surrogate does not majorize D", lam, r)
    stats = _new_stats()

    def step(x, Ax, k):
        b = x - A.apply_adjoint(Ax - y) / lam
        w, rep = surrogate_fixed_point(b, beta / lam, R, None, cfg.inner_tol, cfg.max_inner_iters)
        stats["inner_iterations"] += rep.iterations_used
        flag = ""
        if rep.hit_zero:
            stats["zero_iterate_events"] += 1
            flag = "zero"
        elif not rep.converged:
            stats["inner_nonconverged"] += 1
            flag = "inner_budget"
        return _Step(w, A.apply(w), flag)

    return _run(p, cfg, step, x0, Objective.L1BALL_CONSTRAINED, record_iterates, stats)


# --- optimality check ----------------------------------------------------------------------

def stationarity_residual(x, p: ProblemInstance, cfg: SolverConfig) -> float:
    """``max_{w in B_R} <beta x/||x|| - A^T(Ax - y), w - x>``.

    The linear functional attains its maximum over the ball at one of the
    vertices ``+-R e_i``, so the max equals ``R * max|g_i| - <g, x>``.
    Nonpositive (up to tolerance) means ``x`` is stationary for D on the ball.
    """
    x = _check_len(x, p)
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ContractViolation("stationarity residual is undefined at x = 0")
    g = cfg.beta * x / nx - p.operator.apply_adjoint(p.operator.apply(x) - p.y_noisy)
    return cfg.radius * float(np.max(np.abs(g))) - float(g @ x)


SOLVERS = {
    "ista": solve_ista,
    "st": solve_st_l1l2,
    "pg-gcgm": solve_pg_gcgm,
    "pg-sf": solve_pg_sf,
}


def get_solver(name):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None


def solve(p: ProblemInstance, cfg: SolverConfig, method="pg-gcgm", **kwargs) -> SolveOutcome:
    return get_solver(method)(p, cfg, **kwargs)
