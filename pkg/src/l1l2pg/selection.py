"""Discrepancy-principle selection of the l1-ball radius and of alpha."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import ContractViolation, ProblemInstance, SolveOutcome, SolverConfig
from .solvers import get_solver, solve_st_l1l2

PROBE_BUDGET = 200
PROBE_COLUMNS = ("j", "R_or_alpha", "discrepancy", "rerror_if_known", "iterations", "seconds")


def discrepancy(x, p: ProblemInstance) -> float:
    """Residual norm ``||A x - y||``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n,):
        raise ContractViolation(f"expected vector of length {p.n}")
    return float(np.linalg.norm(p.operator.apply(x) - p.y_noisy))


@dataclass(frozen=True)
class DiscrepancyBand:
    """``tau1 * delta <= d <= tau2 * delta``; ``tau2 = inf`` gives the one-sided rule."""

    tau1: float
    tau2: float
    delta: float

    def __post_init__(self):
        if not 1 < self.tau1 <= self.tau2:
            raise ContractViolation("need 1 < tau1 <= tau2")
        if self.delta < 0:
            raise ContractViolation("delta must be nonnegative")

    @classmethod
    def from_config(cls, cfg: SolverConfig, delta):
        return cls(cfg.tau1, cfg.tau2, delta)

    @property
    def lower(self):
        return self.tau1 * self.delta

    @property
    def upper(self):
        return self.tau2 * self.delta

    def in_band(self, d) -> bool:
        return self.lower <= d <= self.upper

    def above(self, d) -> bool:
        return d > self.upper

    def below(self, d) -> bool:
        return d < self.lower


@dataclass
class Probe:
    j: int
    value: float
    discrepancy: float
    rerror: float | None
    iterations: int
    seconds: float
    outcome: SolveOutcome = field(repr=False, default=None)

    def row(self):
        return {
            "j": self.j,
            "R_or_alpha": self.value,
            "discrepancy": self.discrepancy,
            "rerror_if_known": "" if self.rerror is None else self.rerror,
            "iterations": self.iterations,
            "seconds": self.seconds,
        }


@dataclass
class RadiusSearchResult:
    chosen_radius: float
    probes: list
    satisfied: bool

    @property
    def chosen(self) -> Probe:
        for pr in self.probes:
            if pr.value == self.chosen_radius:
                return pr
        raise LookupError(self.chosen_radius)


class DiscrepancyNotReached(RuntimeError):
    def __init__(self, message, probes):
        super().__init__(message)
        self.probes = probes


def _probe(p, cfg, solver, j, value, x0):
    t0 = time.perf_counter()
    out = solver(p, cfg, x0=x0)
    sec = time.perf_counter() - t0
    rerr = out.trace.rerror[-1] if len(out.trace) else None
    return Probe(j, value, discrepancy(out.x_final, p), rerr, out.stats["outer_iterations"], sec, out)


def search_radius(p: ProblemInstance, cfg: SolverConfig, solver="pg-gcgm", R0=1.0, c=1.0,
                  budget=PROBE_BUDGET, warm_start="auto", keep_outcomes=False) -> RadiusSearchResult:
    """Largest radius on the grid ``R0 + j c`` whose solution satisfies the discrepancy band.

    The discrepancy decreases as the radius grows. Starting at ``R0``: while
    the residual is at or above the lower bound the radius is increased,
    stopping at the first probe that falls below the band; if the first
    residual is already below the band the radius is decreased until it is
    not.

    ``warm_start="auto"`` warm-starts PG-SF probes from the previous solution
    and cold-starts PG-GCGM probes. The GCGM step size minimizes the
    penalized objective J, so a J-stationary point from a smaller ball is
    also a fixed point on the larger one and a warm start would never move.
    """
    if not R0 > 0:
        raise ContractViolation("R0 must be positive")
    if c < 1:
        raise ContractViolation("radius increment must be >= 1")
    if isinstance(solver, str):
        if solver not in ("pg-gcgm", "pg-sf"):
            raise ContractViolation("radius search needs a constrained solver (pg-gcgm or pg-sf)")
        if warm_start == "auto":
            warm_start = solver == "pg-sf"
        solver = get_solver(solver)
    elif warm_start == "auto":
        warm_start = False
    band = DiscrepancyBand.from_config(cfg, p.delta)
    probes = []
    x0 = None
    R = float(R0)

    def run(R):
        nonlocal x0
        pr = _probe(p, cfg.with_(radius=R), solver, len(probes), R, x0)
        if warm_start:
            x0 = pr.outcome.x_final
        if not keep_outcomes:
            pr.outcome = None
        probes.append(pr)
        return pr

    first = run(R)
    if band.below(first.discrepancy):
        # search downward until the residual climbs back to the band
        while len(probes) < budget and R - c > 0:
            R -= c
            pr = run(R)
            if not band.below(pr.discrepancy):
                ok = band.in_band(pr.discrepancy)
                return RadiusSearchResult(R, probes, ok)
        return RadiusSearchResult(probes[-1].value, probes, False)

    while len(probes) < budget:
        R += c
        pr = run(R)
        if band.below(pr.discrepancy):
            break
    in_band = [q for q in probes if band.in_band(q.discrepancy)]
    if in_band:
        best = max(in_band, key=lambda q: q.value)
        i = probes.index(best)
        # only a probe below the band proves the radius is the largest one
        ok = i + 1 < len(probes) and band.below(probes[i + 1].discrepancy)
        return RadiusSearchResult(best.value, probes, ok)
    not_below = [q for q in probes if not band.below(q.discrepancy)]
    return RadiusSearchResult(max(not_below, key=lambda q: q.value).value, probes, False)


def search_alpha(p: ProblemInstance, cfg: SolverConfig, alpha0, budget=PROBE_BUDGET, warm_start=True,
                 solver=solve_st_l1l2):
    """First ``alpha_j = alpha0 2^-j`` whose penalized solution lands in the band.

    ``beta = eta * alpha_j`` follows each probe. Returns ``(alpha, outcome)``
    or raises ``DiscrepancyNotReached`` with the probe log.
    """
    if not alpha0 > 0:
        raise ContractViolation("alpha0 must be positive")
    band = DiscrepancyBand.from_config(cfg, p.delta)
    probes = []
    x0 = None
    for j in range(budget):
        a = alpha0 * 2.0 ** (-j)
        pr = _probe(p, cfg.with_(alpha=a), solver, j, a, x0)
        if warm_start:
            x0 = pr.outcome.x_final
        out = pr.outcome
        pr.outcome = None
        probes.append(pr)
        if band.in_band(pr.discrepancy):
            return a, out
        if band.below(pr.discrepancy):
            break
    raise DiscrepancyNotReached(
        f"no alpha in alpha0*2^-j (j < {len(probes)}) put the residual in "
        f"[{band.lower:.4g}, {band.upper:.4g}]",
        probes,
    )


def write_probe_csv(probes, path_or_file):
    rows = [pr.row() for pr in probes]
    if hasattr(path_or_file, "write"):
        _write(rows, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(rows, fh)


def _write(rows, fh):
    w = csv.DictWriter(fh, fieldnames=PROBE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v
