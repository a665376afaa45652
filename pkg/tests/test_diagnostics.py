import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from l1l2pg import (
    ConfigurationError,
    ContractViolation,
    DenseOperator,
    ProblemInstance,
    SolverConfig,
    check_assumptions,
    eval_D,
    eval_surrogate,
    max_eig_norm_hessian,
    relative_error,
    solve_pg_sf,
)
from l1l2pg.diagnostics import norm_hessian

nonzero = st.integers(2, 20).flatmap(
    lambda d: arrays(np.float64, d, elements=st.floats(-10, 10, allow_nan=False))
).filter(lambda w: np.linalg.norm(w) > 1e-3)


class TestRelativeError:
    def test_examples(self):
        assert relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert relative_error([0.0, 0.0], [3.0, 4.0]) == 1.0
        assert relative_error([1.0, 1.0], [1.0, 0.0]) == 1.0

    def test_zero_reference(self):
        with pytest.raises(ContractViolation):
            relative_error([1.0], [0.0])


class TestNormHessian:
    def test_examples(self):
        assert max_eig_norm_hessian([1.0, 0.0]) == pytest.approx(
            np.linalg.eigvalsh(np.array([[0.0, 0.0], [0.0, 1.0]])).max())
        assert max_eig_norm_hessian([2.0, 0.0, 0.0]) == 0.5
        assert np.linalg.eigvalsh(norm_hessian([2.0, 0.0, 0.0])).max() == pytest.approx(0.5)

    def test_one_dimension(self):
        assert max_eig_norm_hessian([-3.0]) == 0.0

    def test_zero_rejected(self):
        with pytest.raises(ContractViolation):
            max_eig_norm_hessian([0.0, 0.0])

    def test_scaling(self, rng):
        w = rng.standard_normal(6)
        assert max_eig_norm_hessian(2.5 * w) == pytest.approx(max_eig_norm_hessian(w) / 2.5)

    def test_closed_form_against_dense_oracle(self, rng):
        for _ in range(100):
            w = rng.standard_normal(int(rng.integers(2, 21)))
            dense = float(np.linalg.eigvalsh(norm_hessian(w)).max())
            assert abs(max_eig_norm_hessian(w) - dense) <= 1e-10

    @settings(max_examples=100)
    @given(nonzero)
    def test_psd(self, w):
        assert np.linalg.eigvalsh(norm_hessian(w)).min() >= -1e-12 * max(1.0, 1 / np.linalg.norm(w))


class TestSurrogate:
    def test_diagonal_equals_D(self, small_instance, rng):
        cfg = SolverConfig(alpha=0.1, eta=0.6, lam=1.0)
        x = rng.standard_normal(small_instance.n)
        assert eval_surrogate(x, x, small_instance, cfg) == pytest.approx(eval_D(x, small_instance, cfg), rel=1e-14)

    def test_majorization(self, small_instance, rng):
        p = small_instance
        cfg = SolverConfig(alpha=0.1, eta=0.6, lam=1.0)
        assert check_assumptions(p, cfg).r_estimate < 1
        for _ in range(200):
            w, x = rng.standard_normal(p.n), rng.standard_normal(p.n)
            gap = eval_surrogate(w, x, p, cfg) - eval_D(w, p, cfg)
            d = w - x
            ref = 0.5 * cfg.lam * d @ d - 0.5 * np.sum(p.operator.apply(d) ** 2)
            assert gap == pytest.approx(ref, rel=1e-9, abs=1e-12)
            assert gap >= -1e-12

    def test_length_check(self, small_instance):
        with pytest.raises(ContractViolation):
            eval_surrogate(np.ones(3), np.ones(3), small_instance, SolverConfig())


class TestAssumptions:
    def test_reference_config_on_trace(self, cs_instance):
        cfg = SolverConfig(alpha=0.02, eta=1.0, lam=1.0, radius=16)
        out = solve_pg_sf(cs_instance, cfg, record_iterates=True)
        rep = check_assumptions(cs_instance, cfg, out.trace.iterates[1:])
        assert rep.max_eig_seen < 3.5
        assert rep.a2_holds
        assert cfg.lam >= 3.5 * cfg.beta
        assert rep.samples >= 100
        assert rep.iterates_checked == len(out.trace.iterates) - 1

    def test_norms_accepted_in_place_of_vectors(self, small_instance, rng):
        cfg = SolverConfig(alpha=0.1, eta=1.0)
        its = [rng.standard_normal(small_instance.n) for _ in range(5)]
        a = check_assumptions(small_instance, cfg, its)
        b = check_assumptions(small_instance, cfg, [np.linalg.norm(v) for v in its])
        assert a.max_eig_seen == pytest.approx(b.max_eig_seen)

    def test_zero_iterates_skipped(self, small_instance):
        rep = check_assumptions(small_instance, SolverConfig(), [np.zeros(small_instance.n), 0.0])
        assert rep.iterates_checked == 0 and rep.max_eig_seen == 0.0

    def test_a1_sufficient_condition(self, small_instance):
        assert not check_assumptions(small_instance, SolverConfig(lam=1.0)).a1_sufficient
        assert check_assumptions(small_instance, SolverConfig(lam=2.0)).a1_sufficient

    def test_a1_fails_for_top_direction(self):
        # a rank-one operator: every sampled direction is no worse than the top one,
        # but the top one violates ||Ax||^2 <= (lam r / 2)||x||^2 at lam = 1
        A = np.zeros((2, 2))
        A[0, 0] = 0.9
        rep = check_assumptions(ProblemInstance(DenseOperator(A), [0.0, 0.0]), SolverConfig(lam=1.0), samples=500)
        assert rep.a1_worst_ratio > 1.0 and not rep.a1_holds

    def test_a2_violation_reported(self, small_instance):
        cfg = SolverConfig(alpha=1.0, eta=1.0, lam=0.5)
        rep = check_assumptions(small_instance, cfg, [np.full(small_instance.n, 0.01)])
        assert not rep.a2_holds and rep.a2_margin < 0

    def test_lambda_zero_rejected_earlier(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(lam=0.0)

    def test_report_serializes(self, small_instance):
        d = check_assumptions(small_instance, SolverConfig()).to_dict()
        assert {"r_estimate", "a1_holds", "a2_holds", "max_eig_seen", "samples"} <= set(d)
