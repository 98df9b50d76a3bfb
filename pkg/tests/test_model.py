import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochpp import NoiseMode, validate
from stochpp.errors import OverflowGuardError, ValidationError
from stochpp.model import diffusion_matrix, drift, log_drift, response

from conftest import THETA


class TestValidate:
    def test_reference_set_accepted(self, theta):
        assert theta.a1 == 2.0
        assert theta.beta == 0.5

    def test_zero_alpha_rejected(self):
        with pytest.raises(ValidationError, match="ZeroNoise"):
            validate({**THETA, "alpha": 0.0})

    def test_negative_alpha_canonicalized(self):
        p = validate({**THETA, "alpha": -1.0})
        assert p.alpha == 1.0

    def test_negative_beta_preserved(self):
        p = validate({**THETA, "beta": -0.5})
        assert p.beta == -0.5

    def test_all_violations_reported(self):
        bad = {**THETA, "b1": -1.0, "m3": -0.5, "beta": 0.0}
        with pytest.raises(ValidationError) as exc:
            validate(bad)
        msgs = "".join(exc.value.violations)
        assert "b1" in msgs and "NegativeInterference" in msgs and "ZeroNoise" in msgs

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown"):
            validate({**THETA, "gamma": 1.0})

    def test_sequence_form(self, theta):
        p = validate([2, 1, 1, 0.1, 1, 2, 1, 1, 0, 1, 0.5])
        assert p == theta


class TestDrift:
    def test_prey_boundary_invariant(self, theta):
        assert drift(theta, 0.0, 3.0)[0] == 0.0

    def test_logistic_boundary(self, theta):
        fx, fy = drift(theta, 1.5, 0.0)
        assert fx == pytest.approx(0.75)
        assert fy == 0.0

    def test_interior_point(self, theta):
        fx, fy = drift(theta, 1.0, 1.0)
        assert fx == pytest.approx(0.5)
        assert fy == pytest.approx(-0.1)

    @given(
        x=st.floats(0.0, 50.0),
        y=st.floats(0.0, 50.0),
    )
    @settings(max_examples=200)
    def test_boundary_invariance_property(self, x, y):
        p = validate(THETA)
        assert drift(p, 0.0, y)[0] == 0.0
        assert drift(p, x, 0.0)[1] == 0.0

    @given(x=st.floats(0.0, 1e6), y=st.floats(0.0, 1e6))
    @settings(max_examples=200)
    def test_response_bounded(self, x, y):
        p = validate(THETA)
        assert 0.0 <= response(p, x, y) <= 1.0 / p.m2 + 1e-15


class TestLogDrift:
    def test_boundary_carrying_capacity(self, theta):
        du, _ = log_drift(theta, math.log(1.5), -500.0)
        assert du == pytest.approx(0.0, abs=1e-12)

    def test_origin(self, theta):
        du, dv = log_drift(theta, 0.0, 0.0)
        assert du == pytest.approx(0.0)
        assert dv == pytest.approx(-0.225)

    def test_predator_rare_limit(self, theta):
        du, dv = log_drift(theta, 0.0, -50.0)
        assert du == pytest.approx(0.5, abs=1e-12)
        assert dv == pytest.approx(-0.225 + 1.0, abs=1e-12)

    def test_overflow_guard(self, theta):
        with pytest.raises(OverflowGuardError):
            log_drift(theta, 701.0, 0.0)

    def test_consistency_with_population_drift(self, theta):
        # first log-drift component = drift_x(e^u, e^v)/e^u - alpha^2/2
        rng = np.random.default_rng(0)
        for _ in range(100):
            u, v = rng.uniform(-3, 3, size=2)
            ld = log_drift(theta, u, v)
            d = drift(theta, math.exp(u), math.exp(v))
            assert ld[0] == pytest.approx(
                d[0] / math.exp(u) - 0.5 * theta.alpha**2, abs=1e-12
            )
            assert ld[1] == pytest.approx(
                d[1] / math.exp(v) - 0.5 * theta.beta**2, abs=1e-12
            )


class TestDiffusion:
    def test_independent(self, theta):
        m = diffusion_matrix(theta, NoiseMode.INDEPENDENT)
        assert np.array_equal(m, np.diag([1.0, 0.5]))

    def test_shared(self, theta):
        m = diffusion_matrix(theta, NoiseMode.SHARED)
        assert m.shape == (2, 1)
        assert np.array_equal(m[:, 0], [1.0, 0.5])

    def test_shared_negative_beta(self, theta_degenerate):
        m = diffusion_matrix(theta_degenerate, NoiseMode.SHARED)
        assert np.array_equal(m[:, 0], [1.0, -0.5])
