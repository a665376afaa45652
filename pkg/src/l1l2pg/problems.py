"""Instance generators: Gaussian compressive sensing and separable Gaussian blur."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import ContractViolation, DenseOperator, ProblemInstance, operator_norm_sq, rescale_problem

RESCALE_MARGIN = 1.05


def add_awgn(y_clean, snr_db, seed, reference="measured"):
    """Add white Gaussian noise at ``snr_db`` and return ``(y_noisy, delta)``.

    ``reference="measured"`` scales the noise power to the mean power of
    ``y_clean``: ``p = mean(y^2) * 10^(-snr/10)``. ``reference="absolute"``
    takes the signal power as 1 (0 dBW), so ``p = 10^(-snr/10)`` regardless
    of the data. ``delta`` is the realized norm of the added noise.
    """
    y = np.asarray(y_clean, dtype=np.float64)
    if reference == "measured":
        power = float(y @ y) / y.size
        if power == 0.0:
            raise ContractViolation("cannot measure signal power of an all-zero signal")
    elif reference == "absolute":
        power = 1.0
    else:
        raise ContractViolation(f"unknown noise reference {reference!r}")
    p = power * 10.0 ** (-snr_db / 10.0)
    e = np.random.default_rng(seed).standard_normal(y.size) * math.sqrt(p)
    return y + e, float(np.linalg.norm(e))


def _noise_seed(seed):
    # independent stream for the noise so it does not shift with problem size
    return np.random.SeedSequence([int(seed), 0x5EED]).generate_state(1)[0]


def _rescale_if_needed(p: ProblemInstance) -> ProblemInstance:
    r = operator_norm_sq(p.operator)
    if r >= 1.0:
        return rescale_problem(p, RESCALE_MARGIN * math.sqrt(r))
    return p


def _noisy_instance(clean: ProblemInstance, snr_db, seed, reference, meta):
    y, delta = add_awgn(clean.y_noisy, snr_db, _noise_seed(seed), reference)
    meta = {**meta, **clean.meta}
    # delta is stored as the realized residual of the ground truth
    delta = float(np.linalg.norm(clean.operator.apply(clean.x_true) - y))
    return ProblemInstance(clean.operator, y, clean.x_true, delta, meta)


@dataclass(frozen=True)
class CsSpec:
    """Compressive-sensing instance description.

    ``amplitude="sign"`` draws nonzeros uniformly from {-1, +1};
    ``"gaussian"`` uses standard normal values.
    """

    n: int = 200
    m: int = 80
    s: int = 16
    snr_db: float = 50.0
    seed: int = 0
    rescale_to_unit_norm: bool = True
    amplitude: str = "sign"
    noise_reference: str = "absolute"
    identity_operator: bool = False

    def __post_init__(self):
        if not 0 < self.s <= self.m <= self.n:
            raise ContractViolation("need 0 < s <= m <= n")
        if self.amplitude not in ("sign", "gaussian"):
            raise ContractViolation("amplitude must be 'sign' or 'gaussian'")
        if self.identity_operator and self.m != self.n:
            raise ContractViolation("identity operator needs m == n")


def generate_cs(spec: CsSpec) -> ProblemInstance:
    """Gaussian sensing matrix, s-sparse truth with random support, AWGN data.

    The operator is rescaled (when ``||A^T A|| >= 1``) before noise is added,
    so the noise level refers to the data the solver actually sees.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.identity_operator:
        A = np.eye(spec.n)
    else:
        A = rng.standard_normal((spec.m, spec.n))
    x = np.zeros(spec.n)
    support = rng.choice(spec.n, size=spec.s, replace=False)
    if spec.amplitude == "sign":
        x[support] = rng.choice([-1.0, 1.0], size=spec.s)
    else:
        x[support] = rng.standard_normal(spec.s)
    op = DenseOperator(A)
    clean = ProblemInstance(op, op.apply(x), x, 0.0, {})
    if spec.rescale_to_unit_norm:
        clean = _rescale_if_needed(clean)
    meta = {"family": "cs", **asdict(spec)}
    return _noisy_instance(clean, spec.snr_db, spec.seed, spec.noise_reference, meta)


# --- blur ------------------------------------------------------------------------------

class KroneckerOperator(DenseOperator):
    """``scale * kron(T, T)`` applied as ``scale * T X T^T`` on the n x n image X.

    Vectors are row-major flattenings of the image. The dense matrix is only
    formed on demand (serialization, tests).
    """

    def __init__(self, T, scale=1.0):
        T = np.array(T, dtype=np.float64)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ContractViolation("Kronecker factor must be square")
        T.setflags(write=False)
        self.T = T
        self.scale = float(scale)
        self._side = T.shape[0]
        self._dense = None
        self._norm_cache = {}

    @property
    def shape(self):
        N = self._side * self._side
        return (N, N)

    @property
    def matrix(self):
        if self._dense is None:
            dense = self.scale * np.kron(self.T, self.T)
            dense.setflags(write=False)
            self._dense = dense
        return self._dense

    def _matvec(self, x):
        X = x.reshape(self._side, self._side)
        return (self.scale * (self.T @ X @ self.T.T)).ravel()

    def _rmatvec(self, r):
        R = r.reshape(self._side, self._side)
        return (self.scale * (self.T.T @ R @ self.T)).ravel()

    def scaled(self, factor):
        return KroneckerOperator(self.T, self.scale * factor)

    def eigenvalues(self):
        """Eigenvalues of the symmetric operator from those of T."""
        ev = np.linalg.eigvalsh(self.T)
        return self.scale * np.outer(ev, ev).ravel()


def toeplitz_first_row(n, band, tau):
    z = np.zeros(n)
    i = np.arange(band)
    z[:band] = np.exp(-(i ** 2) / (2.0 * tau ** 2))
    return z


def blur_factor(n, band, tau):
    """Symmetric banded Toeplitz matrix with Gaussian first row."""
    z = toeplitz_first_row(n, band, tau)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return z[idx]


def blur_operator(n, band, tau) -> KroneckerOperator:
    return KroneckerOperator(blur_factor(n, band, tau), 1.0 / (2.0 * math.pi * tau ** 2))


def reference_image(n):
    """Piecewise-constant n x n image: a centered block of 1s holding a block of 2s.

    Block sizes scale with n; at n = 64 the outer block is 40 x 44 and the
    inner one 13 x 27, giving an l1 norm of 1760 + 351 = 2111.
    """
    img = np.zeros((n, n))

    def centered(h, w):
        h, w = max(1, round(h * n / 64)), max(1, round(w * n / 64))
        r0, c0 = (n - h) // 2, (n - w) // 2
        return slice(r0, r0 + h), slice(c0, c0 + w)

    img[centered(40, 44)] = 1.0
    img[centered(13, 27)] = 2.0
    return img


@dataclass(frozen=True)
class BlurSpec:
    n: int = 64
    band: int = 3
    tau: float = 0.7
    snr_db: float = 50.0
    seed: int = 0
    noise_reference: str = "absolute"

    def __post_init__(self):
        if not 1 <= self.band <= self.n:
            raise ContractViolation("need 1 <= band <= n")
        if not self.tau > 0:
            raise ContractViolation("tau must be positive")


def generate_blur(spec: BlurSpec) -> ProblemInstance:
    op = blur_operator(spec.n, spec.band, spec.tau)
    x = reference_image(spec.n).ravel()
    clean = _rescale_if_needed(ProblemInstance(op, op.apply(x), x, 0.0, {}))
    meta = {"family": "blur", **asdict(spec)}
    return _noisy_instance(clean, spec.snr_db, spec.seed, spec.noise_reference, meta)


def blur_stats(op: KroneckerOperator):
    """Spectral norm and condition number from the Kronecker eigenvalues."""
    ev = np.abs(op.eigenvalues())
    top, bottom = float(ev.max()), float(ev.min())
    return {"norm2": top, "cond": top / bottom if bottom > 0 else math.inf}
