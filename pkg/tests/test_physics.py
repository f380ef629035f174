import numpy as np
import pytest

from tse.errors import DomainError
from tse.physics import (FdParams, ResidualInput, density_of_velocity,
                         flow_of_density, lwr_residual, lwr_residual_point,
                         velocity_of_density)

P = FdParams(v_free=25.0, rho_max=0.05)


class TestFdParams:
    def test_positive_constants_required(self):
        with pytest.raises(DomainError):
            FdParams(v_free=-1.0, rho_max=0.05)
        with pytest.raises(DomainError):
            FdParams(v_free=25.0, rho_max=0.0)

    def test_critical_density_is_flow_vertex(self):
        # flow'(rho_c) = 0: central difference at the vertex is ~0
        h = 1e-7
        d = (flow_of_density(P.rho_critical + h, P) - flow_of_density(P.rho_critical - h, P)) / (2 * h)
        assert abs(d) < 1e-8
        assert P.rho_critical == P.rho_max / 2


class TestVelocityOfDensity:
    def test_zero_density_free_flow(self):
        assert velocity_of_density(0.0, P) == 25.0

    def test_jam_density_standstill(self):
        assert velocity_of_density(0.05, P) == 0.0

    def test_midpoint(self):
        assert velocity_of_density(0.025, P) == pytest.approx(12.5, abs=1e-14)

    def test_monotone_decreasing(self):
        rho = np.linspace(0, P.rho_max, 101)
        v = velocity_of_density(rho, P)
        assert np.all(np.diff(v) < 0)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            velocity_of_density(-1e-9, P)
        with pytest.raises(DomainError):
            velocity_of_density(0.051, P)


class TestFlowOfDensity:
    def test_endpoints_zero(self):
        assert flow_of_density(0.0, P) == 0.0
        assert flow_of_density(0.05, P) == 0.0

    def test_maximum_at_critical_density(self):
        assert flow_of_density(0.025, P) == pytest.approx(0.3125, abs=1e-15)
        assert flow_of_density(0.025, P) == pytest.approx(P.q_max, abs=1e-15)

    def test_flow_consistency_identity(self):
        rho = np.linspace(0, P.rho_max, 333)
        q = flow_of_density(rho, P)
        expected = rho * velocity_of_density(rho, P)
        np.testing.assert_allclose(q, expected, rtol=1e-12)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            flow_of_density(0.06, P)


class TestDensityOfVelocity:
    def test_free_flow_empty(self):
        assert density_of_velocity(25.0, P) == 0.0

    def test_standstill_jam(self):
        assert density_of_velocity(0.0, P) == 0.05

    def test_midpoint(self):
        assert density_of_velocity(12.5, P) == pytest.approx(0.025, abs=1e-15)

    def test_round_trip(self):
        rho = np.linspace(0, P.rho_max, 1001)
        back = density_of_velocity(velocity_of_density(rho, P), P)
        np.testing.assert_allclose(back, rho, rtol=0, atol=P.rho_max * 1e-15)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            density_of_velocity(25.1, P)
        with pytest.raises(DomainError):
            density_of_velocity(-0.1, P)


class TestLwrResidual:
    def test_constant_field_is_conserved(self):
        for v in (0.0, 3.7, 12.5, 25.0):
            assert lwr_residual(v, 0.0, 0.0, P) == 0.0

    def test_coefficient_vanishes_at_half_free_flow(self):
        assert lwr_residual(12.5, 3.0, 0.0, P) == pytest.approx(0.0, abs=1e-15)

    def test_hand_evaluation(self):
        # v=0, dv_dx=0, dv_dt=1: -(rho_max/v_free) = -0.002
        assert lwr_residual(0.0, 0.0, 1.0, P) == pytest.approx(-0.002, abs=1e-15)

    def test_residual_input_wrapper(self):
        point = ResidualInput(v=0.0, dv_dx=0.0, dv_dt=1.0)
        assert lwr_residual_point(point, P) == pytest.approx(-0.002, abs=1e-15)

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            lwr_residual(np.nan, 0.0, 0.0, P)
        with pytest.raises(DomainError):
            ResidualInput(v=1.0, dv_dx=np.inf, dv_dt=0.0)

    def test_linear_in_gradients(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            v = rng.uniform(0, 25)
            a1, b1, a2, b2 = rng.normal(size=4)
            lhs = lwr_residual(v, a1 + a2, b1 + b2, P)
            rhs = lwr_residual(v, a1, b1, P) + lwr_residual(v, a2, b2, P)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)

    def test_matches_chain_ruled_conservation_law(self):
        # Independent route: dq/dx + drho/dt with q'(rho) = v_free(1 - 2 rho/rho_max)
        # and rho(v) from the inverted fundamental diagram, on analytic fields.
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 5000, 50)
        t = rng.uniform(0, 240, 50)
        # v(x,t) = c0 + c1 sin(kx x) cos(kt t), kept inside (0, v_free)
        c0, c1, kx, kt = 12.0, 8.0, 2 * np.pi / 700.0, 2 * np.pi / 90.0
        v = c0 + c1 * np.sin(kx * x) * np.cos(kt * t)
        v_x = c1 * kx * np.cos(kx * x) * np.cos(kt * t)
        v_t = -c1 * kt * np.sin(kx * x) * np.sin(kt * t)
        rho = density_of_velocity(v, P)
        rho_x = -(P.rho_max / P.v_free) * v_x
        rho_t = -(P.rho_max / P.v_free) * v_t
        flow_prime = P.v_free * (1.0 - 2.0 * rho / P.rho_max)
        oracle = flow_prime * rho_x + rho_t
        got = lwr_residual(v, v_x, v_t, P)
        np.testing.assert_allclose(got, oracle, rtol=1e-10)
