import math

import numpy as np
import pytest

from kaonbell.detector import (
    DetectorModel,
    ResponseMatrix,
    check_spacelike,
    lifetime_response,
    sample_economics,
    strangeness_response,
)
from kaonbell.measurement import Outcome
from kaonbell.quasispin import PhysicalConstants


class TestLifetimeResponse:
    def test_design_window_numbers(self, constants):
        m = lifetime_response(5.5, constants)
        assert m.probability(Outcome.KL, Outcome.KL) == pytest.approx(
            0.9905, abs=5e-4
        )
        assert m.probability(Outcome.KS, Outcome.KS) == pytest.approx(
            0.9959, abs=5e-4
        )

    def test_misidentification_below_one_percent(self, constants):
        m = lifetime_response(5.5, constants)
        assert m.probability(Outcome.KS, Outcome.KL) < 0.01
        assert m.probability(Outcome.KL, Outcome.KS) < 0.01

    def test_zero_window_records_everything_long(self, constants):
        m = lifetime_response(0.0, constants)
        assert m.probability(Outcome.KS, Outcome.KL) == 1.0
        assert m.probability(Outcome.KL, Outcome.KL) == 1.0

    def test_infinite_window_limit_is_identity_for_stable_kl(self):
        stable = PhysicalConstants(delta_m=0.4737, gamma_l=0.0)
        m = lifetime_response(200.0, stable)
        assert m.probability(Outcome.KS, Outcome.KS) == pytest.approx(1.0)
        assert m.probability(Outcome.KL, Outcome.KL) == 1.0

    def test_rows_sum_to_one(self, constants):
        rng = np.random.default_rng(41)
        for _ in range(50):
            m = lifetime_response(rng.uniform(0.1, 30.0), constants)
            assert np.allclose(m.matrix.sum(axis=1), 1.0, atol=1e-12)


class TestStrangenessResponse:
    def test_perfect_absorber_is_identity(self):
        m = strangeness_response(1.0, 1.0)
        assert m.probability(Outcome.K0, Outcome.K0) == 1.0
        assert m.probability(Outcome.K0BAR, Outcome.K0BAR) == 1.0
        assert m.probability(Outcome.K0, Outcome.LOST) == 0.0

    def test_lost_rates(self):
        m = strangeness_response(0.9, 0.7)
        assert m.probability(Outcome.K0BAR, Outcome.LOST) == pytest.approx(0.1)
        assert m.probability(Outcome.K0, Outcome.LOST) == pytest.approx(0.3)

    def test_no_cross_talk(self):
        m = strangeness_response(0.9, 0.7)
        assert m.probability(Outcome.K0, Outcome.K0BAR) == 0.0
        assert m.probability(Outcome.K0BAR, Outcome.K0) == 0.0

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            eta_k0 = rng.uniform(0.0, 1.0)
            eta_k0bar = rng.uniform(eta_k0, 1.0)
            m = strangeness_response(eta_k0bar, eta_k0)
            assert np.allclose(m.matrix.sum(axis=1), 1.0, atol=1e-12)

    def test_efficiency_ordering_enforced(self):
        with pytest.raises(ValueError):
            strangeness_response(0.5, 0.9)

    def test_lost_corrected_estimator_recovers_truth(self):
        # generate with known truth, divide by eta, compare within MC error
        rng = np.random.default_rng(43)
        eta_k0bar, eta_k0 = 0.9, 0.7
        m = strangeness_response(eta_k0bar, eta_k0)
        truth = np.array([0.35, 0.65])  # P(K0), P(K0bar)
        n = 200_000
        true_idx = rng.choice(2, size=n, p=truth)
        u = rng.random(n)
        cum = np.cumsum(m.matrix, axis=1)[true_idx]
        rec_idx = (u[:, None] >= cum).sum(axis=1)
        recorded = np.bincount(rec_idx, minlength=3)
        corrected = np.array(
            [recorded[0] / eta_k0, recorded[1] / eta_k0bar]
        ) / n
        for estimate, target in zip(corrected, truth):
            assert abs(estimate - target) < 5.0 / math.sqrt(n)


class TestResponseMatrixValidation:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(ValueError):
            ResponseMatrix(
                true_outcomes=(Outcome.KS, Outcome.KL),
                recorded_outcomes=(Outcome.KS, Outcome.KL),
                matrix=np.array([[0.5, 0.4], [0.0, 1.0]]),
            )

    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            ResponseMatrix(
                true_outcomes=(Outcome.KS, Outcome.KL),
                recorded_outcomes=(Outcome.KS, Outcome.KL),
                matrix=np.array([[1.2, -0.2], [0.0, 1.0]]),
            )

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            ResponseMatrix(
                true_outcomes=(Outcome.KS,),
                recorded_outcomes=(Outcome.KS, Outcome.KL),
                matrix=np.eye(2),
            )


class TestSpacelike:
    def test_design_point_factor(self):
        ok, t_min = check_spacelike(11.0, 5.5, 0.22)
        assert ok
        assert t_min == pytest.approx(9.75)
        assert t_min / 5.5 == pytest.approx(1.773, abs=3e-3)

    def test_too_short_flight_fails(self):
        ok, t_min = check_spacelike(9.0, 5.5, 0.22)
        assert not ok
        assert 9.0 < t_min

    def test_ultrarelativistic_limit(self):
        _, t_min = check_spacelike(1.0, 5.5, 0.999999)
        assert t_min == pytest.approx(0.0, abs=1e-5)

    def test_beta_bounds(self):
        with pytest.raises(ValueError):
            check_spacelike(11.0, 5.5, 0.0)
        with pytest.raises(ValueError):
            check_spacelike(11.0, 5.5, 1.0)


class TestSampleEconomics:
    def test_design_point(self, constants):
        fraction = sample_economics(11.0, constants)
        expected = math.exp(-11.0 * (1.0 + 1.0 / 579.0))
        assert fraction == pytest.approx(expected, rel=1e-12)
        assert fraction == pytest.approx(1.64e-5, rel=0.01)
        assert 1.0 / fraction == pytest.approx(61000, rel=0.01)

    def test_no_flight(self, constants):
        assert sample_economics(0.0, constants) == 1.0

    def test_monotone_decreasing(self, constants):
        times = np.linspace(0.0, 30.0, 40)
        values = [sample_economics(float(t), constants) for t in times]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestDetectorModel:
    def test_valid_model_builds_matrices(self, constants):
        det = DetectorModel(delta_T=5.5, eta_k0bar=0.9, eta_k0=0.7, beta=0.22)
        assert det.lifetime_matrix(constants).matrix.shape == (2, 2)
        assert det.strangeness_matrix().matrix.shape == (2, 3)

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            DetectorModel(delta_T=0.0, eta_k0bar=0.9, eta_k0=0.7, beta=0.22)
        with pytest.raises(ValueError):
            DetectorModel(delta_T=5.5, eta_k0bar=0.7, eta_k0=0.9, beta=0.22)
        with pytest.raises(ValueError):
            DetectorModel(delta_T=5.5, eta_k0bar=0.9, eta_k0=0.7, beta=1.2)
