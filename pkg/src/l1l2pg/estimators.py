"""scikit-learn estimators wrapping the solvers.

The design matrix ``X`` plays the role of the forward operator ``A`` and the
targets ``y`` are the measured data; ``coef_`` is the recovered signal.
There is no intercept. The solvers take unit gradient steps and need
``||X^T X|| < 1``; with ``rescale=True`` (the default) ``X``, ``y`` and
``noise_level`` are divided by a common factor when that fails. The factor
cancels in ``coef_`` and ``radius``; ``alpha`` acts on the rescaled system.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import DenseOperator, ProblemInstance, SolverConfig, operator_norm_sq, rescale_problem
from .problems import RESCALE_MARGIN
from .selection import search_radius
from .solvers import solve_ista, solve_pg_gcgm, solve_pg_sf, solve_st_l1l2


class _L1L2Base(RegressorMixin, BaseEstimator):
    _solver = None

    def _config(self, **extra):
        return SolverConfig(
            alpha=self.alpha,
            eta=self.eta,
            lam=self.lam,
            max_outer_iters=self.max_iter,
            step_tol=self.tol,
            x0_scale=self.x0_scale,
            **extra,
        )

    def _problem(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        delta = getattr(self, "noise_level", None) or 0.0
        p = ProblemInstance(DenseOperator(X), y, None, float(delta))
        self.scale_ = 1.0
        r = operator_norm_sq(p.operator)
        if self.rescale and r >= 1.0:
            self.scale_ = RESCALE_MARGIN * math.sqrt(r)
            p = rescale_problem(p, self.scale_)
        return p

    def _store(self, out):
        self.coef_ = out.x_final
        self.n_iter_ = out.stats["outer_iterations"]
        self.termination_ = out.termination
        self.trace_ = out.trace
        self.stats_ = out.stats
        return self

    def fit(self, X, y):
        p = self._problem(X, y)
        return self._store(type(self)._solver(p, self._config()))

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X @ self.coef_


class ISTARegressor(_L1L2Base):
    """Plain l1-penalized least squares by iterative soft thresholding.

    Parameters
    ----------
    alpha : float
        Threshold (l1 weight).
    max_iter, tol : int, float
        Iteration budget and tolerance on ``||x^{k+1} - x^k||``.
    x0_scale : float
        Start vector is ``x0_scale * ones``.
    rescale : bool
        Divide ``X`` and ``y`` by ``1.05 sqrt(||X^T X||)`` when ``||X^T X|| >= 1``.
    """

    _solver = staticmethod(solve_ista)

    def __init__(self, alpha=0.02, max_iter=5000, tol=1e-8, x0_scale=0.01, rescale=True):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.x0_scale = x0_scale
        self.rescale = rescale

    eta = 0.0
    lam = 1.0


class STL1L2Regressor(_L1L2Base):
    """Penalized ``alpha ||x||_1 - alpha*eta ||x||_2`` least squares (soft-threshold scheme).

    Parameters
    ----------
    alpha : float
        l1 weight.
    eta : float in [0, 1]
        Ratio of the l2 weight to ``alpha``.
    lam : float
        Inverse step of the linearized subproblem.
    max_iter, tol, x0_scale, rescale
        As in :class:`ISTARegressor`.
    """

    _solver = staticmethod(solve_st_l1l2)

    def __init__(self, alpha=0.02, eta=1.0, lam=1.0, max_iter=5000, tol=1e-8, x0_scale=0.01, rescale=True):
        self.alpha = alpha
        self.eta = eta
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol
        self.x0_scale = x0_scale
        self.rescale = rescale


class _BallBase(_L1L2Base):
    _method = None

    def fit(self, X, y):
        p = self._problem(X, y)
        if self.radius == "discrepancy":
            if not self.noise_level:
                raise ValueError("radius='discrepancy' needs a positive noise_level")
            cfg = self._config(tau1=self.tau1, tau2=self.tau2)
            res = search_radius(p, cfg, self._method, R0=self.radius_start, c=self.radius_step,
                                keep_outcomes=True)
            self.radius_ = res.chosen_radius
            self.radius_search_ = res
            return self._store(res.chosen.outcome)
        self.radius_ = float(self.radius)
        return self._store(type(self)._solver(p, self._config(radius=self.radius_)))


class PGGCGMRegressor(_BallBase):
    """l1-ball projected gradient with a line search on the penalized objective.

    Parameters
    ----------
    radius : float or "discrepancy"
        l1-ball radius. ``"discrepancy"`` searches the grid
        ``radius_start + j * radius_step`` for the largest radius whose
        residual stays in ``[tau1, tau2] * noise_level``.
    noise_level : float or None
        Noise norm ``||y - X x_true||``; required for the radius search.
    alpha, eta, lam, max_iter, tol, x0_scale, rescale
        As in :class:`STL1L2Regressor`.
    """

    _solver = staticmethod(solve_pg_gcgm)
    _method = "pg-gcgm"

    def __init__(self, radius=1.0, alpha=0.02, eta=1.0, lam=1.0, noise_level=None, tau1=1.01,
                 tau2=np.inf, radius_start=1.0, radius_step=1.0, max_iter=5000, tol=1e-8, x0_scale=0.01,
                 rescale=True):
        self.radius = radius
        self.alpha = alpha
        self.eta = eta
        self.lam = lam
        self.noise_level = noise_level
        self.tau1 = tau1
        self.tau2 = tau2
        self.radius_start = radius_start
        self.radius_step = radius_step
        self.max_iter = max_iter
        self.tol = tol
        self.x0_scale = x0_scale
        self.rescale = rescale


class PGSFRegressor(_BallBase):
    """l1-ball projected gradient on the surrogate function (implicit step).

    Same parameters as :class:`PGGCGMRegressor`; ``alpha`` only enters
    through ``beta = alpha * eta``.
    """

    _solver = staticmethod(solve_pg_sf)
    _method = "pg-sf"

    def __init__(self, radius=1.0, alpha=0.02, eta=1.0, lam=1.0, noise_level=None, tau1=1.01,
                 tau2=np.inf, radius_start=1.0, radius_step=1.0, max_iter=5000, tol=1e-8, x0_scale=0.01,
                 rescale=True):
        self.radius = radius
        self.alpha = alpha
        self.eta = eta
        self.lam = lam
        self.noise_level = noise_level
        self.tau1 = tau1
        self.tau2 = tau2
        self.radius_start = radius_start
        self.radius_step = radius_step
        self.max_iter = max_iter
        self.tol = tol
        self.x0_scale = x0_scale
        self.rescale = rescale
