import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from l1l2pg import CsSpec, DenseOperator, ProblemInstance, generate_cs  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cs_instance():
    """The n=200 compressive-sensing instance at seed 0."""
    return generate_cs(CsSpec(seed=0))


@pytest.fixture
def small_instance():
    """A well-conditioned 12 x 20 instance with ||A^T A|| < 1."""
    g = np.random.default_rng(7)
    A = g.standard_normal((12, 20))
    A /= 1.1 * np.linalg.norm(A, 2)
    x = np.zeros(20)
    x[[2, 9, 15]] = [1.0, -0.5, 0.8]
    y = A @ x + 1e-3 * g.standard_normal(12)
    return ProblemInstance(DenseOperator(A), y, x, float(np.linalg.norm(A @ x - y)))
