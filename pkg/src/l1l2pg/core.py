"""Shared types: the forward operator, problem/config records and solver results."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np


class ContractViolation(ValueError):
    """Raised when an operation is called outside its preconditions."""


class ConfigurationError(ValueError):
    """Raised when a solver configuration cannot be used on a problem."""


def as_vector(x, name="x"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ContractViolation(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return v


class DenseOperator:
    """Real m x n matrix with forward/adjoint application.

    The matrix is stored row-major and treated as immutable; the only mutable
    state is a cache of power-iteration estimates of ``||A^T A||``.
    """

    def __init__(self, matrix):
        mat = np.array(matrix, dtype=np.float64, order="C")
        if mat.ndim != 2:
            raise ContractViolation("operator matrix must be two-dimensional")
        if not np.all(np.isfinite(mat)):
            raise ContractViolation("operator matrix contains non-finite entries")
        mat.setflags(write=False)
        self._matrix = mat
        self._norm_cache = {}

    @property
    def shape(self):
        return self._matrix.shape

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    @property
    def matrix(self):
        return self._matrix

    @property
    def norm_sq_estimate(self) -> Optional[float]:
        """Most recently computed estimate of ``||A^T A||`` or None."""
        if not self._norm_cache:
            return None
        return next(reversed(self._norm_cache.values()))

    def _matvec(self, x):
        return self._matrix @ x

    def _rmatvec(self, r):
        return self._matrix.T @ r

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.cols,):
            raise ContractViolation(f"expected vector of length {self.cols}, got shape {x.shape}")
        return self._matvec(x)

    def apply_adjoint(self, r):
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.rows,):
            raise ContractViolation(f"expected vector of length {self.rows}, got shape {r.shape}")
        return self._rmatvec(r)

    def scaled(self, factor):
        """Return a new operator equal to ``factor * A``."""
        return DenseOperator(self._matrix * factor)

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


def apply(op: DenseOperator, x):
    return op.apply(x)


def apply_adjoint(op: DenseOperator, r):
    return op.apply_adjoint(r)


def operator_norm_sq(op: DenseOperator, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``A^T A``.

    The estimate after ``k`` iterations is the Rayleigh quotient
    ``||A v_k||^2`` of the normalized iterate ``v_k = (A^T A)^k v_0``. For a
    positive semi-definite matrix these quotients form a non-decreasing
    sequence of lower bounds. The start vector is drawn from ``seed``.
    """
    if iters < 1:
        raise ContractViolation("iters must be >= 1")
    key = (int(iters), int(seed))
    if key in op._norm_cache:
        return op._norm_cache[key]
    v = np.random.default_rng(seed).standard_normal(op.cols)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        av = op.apply(v)
        est = float(av @ av)
        w = op.apply_adjoint(av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    op._norm_cache[key] = est
    return est


@dataclass(frozen=True)
class ProblemInstance:
    """Forward operator, noisy data, optional ground truth and noise level.

    ``delta`` is the realized noise norm ``||y_noisy - A x_true||`` whenever
    the generator knows it. ``meta`` carries generator parameters for
    serialization and is not used numerically.
    """

    operator: DenseOperator
    y_noisy: np.ndarray
    x_true: Optional[np.ndarray] = None
    delta: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = as_vector(self.y_noisy, "y_noisy")
        if y.shape[0] != self.operator.rows:
            raise ContractViolation("y_noisy length does not match operator rows")
        object.__setattr__(self, "y_noisy", y)
        if self.x_true is not None:
            xt = as_vector(self.x_true, "x_true")
            if xt.shape[0] != self.operator.cols:
                raise ContractViolation("x_true length does not match operator cols")
            object.__setattr__(self, "x_true", xt)
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ContractViolation("delta must be a finite nonnegative number")

    @property
    def m(self):
        return self.operator.rows

    @property
    def n(self):
        return self.operator.cols


def rescale_problem(p: ProblemInstance, c: float) -> ProblemInstance:
    """Divide operator, data and noise level by ``c > 1``; ``x_true`` is unchanged."""
    if not c > 1:
        raise ContractViolation("rescale factor must exceed 1")
    meta = dict(p.meta)
    meta["rescale"] = meta.get("rescale", 1.0) * c
    return ProblemInstance(
        operator=p.operator.scaled(1.0 / c),
        y_noisy=p.y_noisy / c,
        x_true=p.x_true,
        delta=p.delta / c,
        meta=meta,
    )


class Objective(enum.Enum):
    L1L2_PENALIZED = "J"
    L1BALL_CONSTRAINED = "D"


@dataclass(frozen=True)
class SolverConfig:
    """Scalar hyperparameters shared by every solver.

    ``beta`` is derived as ``alpha * eta``. ``objective`` selects which
    objective the trace reports in its ``objective`` column; ``None`` lets
    each solver report the function it descends. ``unit_step`` skips the line
    search and takes ``s = 1``.
    """

    alpha: float = 0.02
    eta: float = 1.0
    lam: float = 1.0
    radius: float = 1.0
    tau1: float = 1.01
    tau2: float = 1.2
    max_outer_iters: int = 5000
    max_inner_iters: int = 200
    step_tol: float = 1e-8
    inner_tol: float = 1e-10
    objective: Optional[Objective] = None
    unit_step: bool = False
    x0_scale: float = 0.01

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        if not 0 <= self.eta <= 1:
            raise ConfigurationError("eta must lie in [0, 1]")
        if not self.lam > 0:
            raise ConfigurationError("lam must be positive")
        if not self.radius > 0:
            raise ConfigurationError("radius must be positive")
        if not self.tau1 > 1:
            raise ConfigurationError("tau1 must exceed 1")
        if not self.tau2 >= self.tau1:
            raise ConfigurationError("tau2 must be >= tau1")
        if not (self.step_tol > 0 and self.inner_tol > 0):
            raise ConfigurationError("tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ConfigurationError("iteration budgets must be >= 1")
        if isinstance(self.objective, str):
            object.__setattr__(self, "objective", Objective[self.objective])

    @property
    def beta(self) -> float:
        return self.alpha * self.eta

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["objective"] = None if self.objective is None else self.objective.name
        return d


TRACE_COLUMNS = ("iter", "seconds", "objective", "discrepancy", "rerror", "l1norm")


class IterationTrace:
    """Per-iteration record of a solver run.

    Besides the CSV columns in ``TRACE_COLUMNS`` every row stores both
    objectives ``J`` and ``D`` and the Euclidean norm of the iterate.
    Iterates themselves are kept only when requested.
    """

    def __init__(self, objective: Objective):
        self.objective = objective
        self.iters = []
        self.seconds = []
        self.J = []
        self.D = []
        self.discrepancy = []
        self.rerror = []
        self.l1norm = []
        self.l2norm = []
        self.iterates = []
        self.flags = []

    def append(self, k, seconds, J, D, discrepancy, rerror, l1, l2, x=None, flag=""):
        if self.iters and k <= self.iters[-1]:
            raise ContractViolation("trace indices must be strictly increasing")
        self.iters.append(k)
        self.seconds.append(seconds)
        self.J.append(J)
        self.D.append(D)
        self.discrepancy.append(discrepancy)
        self.rerror.append(rerror)
        self.l1norm.append(l1)
        self.l2norm.append(l2)
        self.flags.append(flag)
        if x is not None:
            self.iterates.append(np.array(x, copy=True))

    def __len__(self):
        return len(self.iters)

    @property
    def objective_values(self):
        return np.asarray(self.J if self.objective is Objective.L1L2_PENALIZED else self.D)

    def time_to_rerror(self, threshold):
        """Elapsed seconds at the first record with rerror <= threshold (inf if never)."""
        for t, e in zip(self.seconds, self.rerror):
            if e is not None and e <= threshold:
                return t
        return math.inf

    def rows(self):
        obj = self.objective_values
        for i, k in enumerate(self.iters):
            yield {
                "iter": k,
                "seconds": self.seconds[i],
                "objective": float(obj[i]),
                "discrepancy": self.discrepancy[i],
                "rerror": self.rerror[i],
                "l1norm": self.l1norm[i],
            }


class Termination(enum.Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"
    ZERO_ITERATE_HANDLED = "zero_iterate_handled"


@dataclass
class SolveOutcome:
    x_final: np.ndarray
    trace: IterationTrace
    termination: Termination
    stats: dict

    @property
    def converged(self):
        return self.termination is not Termination.BUDGET_EXHAUSTED


# --- serialization -----------------------------------------------------------

_DTYPE = "<f8"


def save_problem(p: ProblemInstance, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` (header) and ``<path>.bin`` (float64 LE blob).

    The blob holds A (row-major, m*n values), then y_noisy (m values), then
    x_true (n values, only if ``has_x_true``).
    """
    path = Path(path)
    header_path = path.with_suffix(".json")
    blob_path = path.with_suffix(".bin")
    m, n = p.operator.shape
    header = {
        "format": "l1l2pg-problem",
        "version": 1,
        "m": m,
        "n": n,
        "delta": p.delta,
        "dtype": _DTYPE,
        "order": ["A", "y_noisy"] + (["x_true"] if p.x_true is not None else []),
        "has_x_true": p.x_true is not None,
        "seed": p.meta.get("seed"),
        "generator": {k: v for k, v in p.meta.items() if k != "seed"},
    }
    parts = [np.asarray(p.operator.matrix, dtype=_DTYPE).ravel(order="C"), p.y_noisy.astype(_DTYPE)]
    if p.x_true is not None:
        parts.append(p.x_true.astype(_DTYPE))
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True, default=_json_default) + "\n")
    with open(blob_path, "wb") as fh:
        for part in parts:
            fh.write(part.tobytes())
    return header_path, blob_path


def load_problem(path) -> ProblemInstance:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    if header.get("format") != "l1l2pg-problem":
        raise ContractViolation(f"{path.with_suffix('.json')} is not an l1l2pg problem header")
    m, n = header["m"], header["n"]
    data = np.fromfile(path.with_suffix(".bin"), dtype=header.get("dtype", _DTYPE)).astype(np.float64)
    expected = m * n + m + (n if header["has_x_true"] else 0)
    if data.size != expected:
        raise ContractViolation(f"blob holds {data.size} values, header implies {expected}")
    A = data[: m * n].reshape(m, n)
    y = data[m * n : m * n + m]
    x = data[m * n + m :] if header["has_x_true"] else None
    meta = dict(header.get("generator") or {})
    if header.get("seed") is not None:
        meta["seed"] = header["seed"]
    return ProblemInstance(DenseOperator(A), y, x, header["delta"], meta)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, enum.Enum):
        return o.name
    raise TypeError(f"cannot serialize {type(o).__name__}")
