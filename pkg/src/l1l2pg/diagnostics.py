"""Error metrics and runtime checks of the PG-SF convergence assumptions."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import ContractViolation, ProblemInstance, SolverConfig, operator_norm_sq

MIN_A1_SAMPLES = 100


def relative_error(x, x_true) -> float:
    x_true = np.asarray(x_true, dtype=np.float64)
    nt = float(np.linalg.norm(x_true))
    if nt == 0.0:
        raise ContractViolation("relative error needs a nonzero reference")
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - x_true)) / nt


def norm_hessian(w):
    """Hessian of ``||w||_2``: ``(I - w w^T / ||w||^2) / ||w||``."""
    w = np.asarray(w, dtype=np.float64)
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise ContractViolation("the Hessian of ||w||_2 does not exist at w = 0")
    return np.eye(w.size) / nw - np.outer(w, w) / nw ** 3


def max_eig_norm_hessian(w) -> float:
    """Largest eigenvalue of the Hessian of ``||w||_2``.

    The Hessian is a projector scaled by ``1/||w||``, so its spectrum is
    ``{0, 1/||w||}`` (just ``{0}`` in one dimension).
    """
    w = np.asarray(w, dtype=np.float64)
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise ContractViolation("the Hessian of ||w||_2 does not exist at w = 0")
    return 0.0 if w.size == 1 else 1.0 / nw


@dataclass
class AssumptionReport:
    r_estimate: float
    a1_holds: bool
    a1_sufficient: bool
    a1_worst_ratio: float
    a2_holds: bool
    max_eig_seen: float
    a2_margin: float
    samples: int
    iterates_checked: int

    def to_dict(self):
        return asdict(self)


def check_assumptions(p: ProblemInstance, cfg: SolverConfig, trace_iterates=(), samples=MIN_A1_SAMPLES,
                      seed=0) -> AssumptionReport:
    """Check the operator/step-size conditions behind PG-SF descent.

    (A1) ``||Ax||^2 <= (lam r / 2) ||x||^2`` is sampled on random unit
    vectors; since sampling rarely finds the top singular direction the
    sharp sufficient condition ``lam >= 2`` (given ``r < 1``) is reported as
    well. (A2) ``lam >= beta * max eig`` is checked over the given iterates,
    which may be vectors or precomputed Euclidean norms; zero iterates are
    skipped.
    """
    samples = max(int(samples), MIN_A1_SAMPLES)
    r = operator_norm_sq(p.operator)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, p.n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    AX = np.array([p.operator.apply(x) for x in X])
    ratios = np.einsum("ij,ij->i", AX, AX)
    bound = 0.5 * cfg.lam * r
    worst = float(ratios.max() / bound) if bound > 0 else float("inf")

    max_eig = 0.0
    checked = 0
    for it in trace_iterates:
        if np.ndim(it) == 0:
            nrm = float(it)
            if nrm == 0.0:
                continue
            eig = 1.0 / nrm
        else:
            it = np.asarray(it, dtype=np.float64)
            if not np.any(it):
                continue
            eig = max_eig_norm_hessian(it)
        checked += 1
        max_eig = max(max_eig, eig)
    return AssumptionReport(
        r_estimate=r,
        a1_holds=bool(worst <= 1.0),
        a1_sufficient=bool(r < 1.0 and cfg.lam >= 2.0),
        a1_worst_ratio=worst,
        a2_holds=bool(cfg.lam >= cfg.beta * max_eig),
        max_eig_seen=max_eig,
        a2_margin=cfg.lam - cfg.beta * max_eig,
        samples=samples,
        iterates_checked=checked,
    )


def eval_surrogate(w, x, p: ProblemInstance, cfg: SolverConfig) -> float:
    """``0.5||Aw - y||^2 - beta||w|| - 0.5||A(w - x)||^2 + (lam/2)||w - x||^2``."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != (p.n,) or x.shape != (p.n,):
        raise ContractViolation(f"expected vectors of length {p.n}")
    A = p.operator
    rw = A.apply(w) - p.y_noisy
    dw = w - x
    Adw = A.apply(dw)
    return (0.5 * float(rw @ rw) - cfg.beta * float(np.linalg.norm(w))
            - 0.5 * float(Adw @ Adw) + 0.5 * cfg.lam * float(dw @ dw))


def square_summability_bound(x0, p: ProblemInstance, cfg: SolverConfig, r=None) -> float:
    """Upper bound ``4/(lam (2 - r)) * (Phi(x0, x0) + beta R)`` on ``sum ||x^{k+1} - x^k||^2``."""
    if r is None:
        r = operator_norm_sq(p.operator)
    return 4.0 / (cfg.lam * (2.0 - r)) * (eval_surrogate(x0, x0, p, cfg) + cfg.beta * cfg.radius)
