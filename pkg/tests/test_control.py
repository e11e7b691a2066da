"""Outer loops and the constrained-least-squares input resolution."""

import numpy as np
import pytest

from splinefollow import control, curves, dynamics, projection
from splinefollow.dynamics import Limits, State
from splinefollow.errors import NearSingularDecouplingError, ParameterError


def _kkt_oracle(alpha, beta, v, r, W):
    """Solve min (u-r)' W (u-r) s.t. beta u = v - alpha via the KKT system."""
    p, N = beta.shape
    K = np.block([[W, beta.T], [beta, np.zeros((p, p))]])
    rhs = np.concatenate([W @ r, v - alpha])
    sol = np.linalg.solve(K, rhs)
    return sol[:N]


class TestResolveInput:
    def test_matches_kkt_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            N = int(rng.integers(2, 6))
            p = int(rng.integers(1, N))
            beta = rng.normal(size=(p, N))
            if np.linalg.cond(beta @ beta.T) > 1e6:
                continue
            alpha = rng.normal(size=p)
            v = rng.normal(size=p)
            r = rng.normal(size=N)
            L = rng.normal(size=(N, N))
            W = L @ L.T + N * np.eye(N)
            u = control.resolve_input(alpha, beta, v, r, W)
            np.testing.assert_allclose(
                u, _kkt_oracle(alpha, beta, v, r, W), atol=1e-8
            )

    def test_constraint_satisfied(self):
        rng = np.random.default_rng(13)
        beta = rng.normal(size=(2, 4))
        alpha, v, r = rng.normal(size=2), rng.normal(size=2), rng.normal(size=4)
        u = control.resolve_input(alpha, beta, v, r)
        np.testing.assert_allclose(beta @ u + alpha, v, atol=1e-12)

    def test_null_space_identity(self):
        """With v = alpha and r in the row space, u has no null component."""
        rng = np.random.default_rng(14)
        beta = rng.normal(size=(2, 4))
        r_row = beta.T @ rng.normal(size=2)
        u = control.resolve_input(np.zeros(2), beta, np.zeros(2), r_row)
        # u solves beta u = 0 with minimum W-distance to r_row: u = P r_row
        P = np.eye(4) - np.linalg.pinv(beta) @ beta
        np.testing.assert_allclose(u, P @ r_row, atol=1e-12)

    def test_square_beta_ignores_bias(self):
        rng = np.random.default_rng(15)
        beta = rng.normal(size=(3, 3))
        alpha, v = rng.normal(size=3), rng.normal(size=3)
        u1 = control.resolve_input(alpha, beta, v, np.zeros(3))
        u2 = control.resolve_input(alpha, beta, v, rng.normal(size=3))
        np.testing.assert_allclose(u1, u2, atol=1e-10)
        np.testing.assert_allclose(u1, np.linalg.solve(beta, v - alpha), atol=1e-10)

    def test_near_singular_raises(self):
        beta = np.array([[1.0, 0.0], [1.0, 1e-14]])
        with pytest.raises(NearSingularDecouplingError):
            control.resolve_input(np.zeros(2), beta, np.zeros(2), np.zeros(2))

    def test_invalid_weight_rejected(self):
        with pytest.raises(ParameterError):
            control.RedundancyConfig(W=np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ParameterError):
            control.RedundancyConfig(W=np.ones((2, 3)))


class TestBias:
    def test_endpoints(self):
        limits = Limits(q_min=[-1.0], q_max=[3.0], u_min=[-5.0], u_max=[5.0])
        assert control.bias_r([-1.0], limits)[0] == pytest.approx(5.0)
        assert control.bias_r([3.0], limits)[0] == pytest.approx(-5.0)
        assert control.bias_r([1.0], limits)[0] == pytest.approx(0.0)


class TestTangential:
    def test_position_mode(self):
        gains = control.OuterLoopGains(
            tangential_mode="position", K_P=4.0, K_D=3.0, eta1_ref=2.0
        )
        v, st = control.tangential_v(
            np.array([1.5, 0.2]), control.ControllerState(), gains, dt=0.02
        )
        assert v == pytest.approx(4.0 * 0.5 - 3.0 * 0.2)
        assert st.integral == 0.0

    def test_velocity_mode_integrates(self):
        gains = control.OuterLoopGains(K_P=2.0, K_I=1.0, eta2_ref=1.0)
        st = control.ControllerState()
        v, st = control.tangential_v(np.array([0.0, 0.0]), st, gains, dt=0.1)
        assert st.integral == pytest.approx(0.1)
        assert v == pytest.approx(2.0 + 0.1)

    def test_anti_windup_clamp(self):
        gains = control.OuterLoopGains(
            K_P=1.0, K_I=1.0, eta2_ref=100.0, integral_limit=0.5
        )
        st = control.ControllerState()
        for _ in range(50):
            _, st = control.tangential_v(np.array([0.0, 0.0]), st, gains, dt=1.0)
        assert st.integral == pytest.approx(0.5)

    def test_reference_table(self):
        gains = control.OuterLoopGains(
            eta2_ref_table=((0.0, 0.0), (1.0, 2.0))
        )
        assert gains.eta2_reference(0.5) == pytest.approx(1.0)
        assert gains.eta2_reference(5.0) == pytest.approx(2.0)


class TestTransversal:
    def test_pd_componentwise(self):
        gains = control.OuterLoopGains(xi_Kp=(10.0, 20.0), xi_Kd=(1.0, 2.0))
        xi = np.array([[0.1, -0.2], [0.3, 0.4]])
        v = control.transversal_v(xi, gains)
        np.testing.assert_allclose(v, [-10 * 0.1 - 1 * 0.3, 20 * 0.2 - 2 * 0.4])

    def test_robust_continuous_at_boundary_layer(self):
        mu = 0.05
        gains = control.OuterLoopGains(
            transversal_mode="robust",
            robust_K=((-3.0, -1.0),),
            robust_K0=((0.0, 0.0),),
            robust_K2=((-2.0, -0.5),),
            robust_mu=mu,
        )
        direction = np.array([0.6, 0.8])
        inner = control.transversal_v((mu - 1e-9) * direction, gains)
        outer = control.transversal_v((mu + 1e-9) * direction, gains)
        np.testing.assert_allclose(inner, outer, atol=1e-7)

    def test_gain_validation(self):
        with pytest.raises(ParameterError):
            control.OuterLoopGains(xi_Kp=(0.0,))
        with pytest.raises(ParameterError):
            control.OuterLoopGains(tangential_mode="bang-bang")


class TestStep:
    def test_example1_first_input_is_bias(self, example1):
        """On the line path, u_1 never fights the bias: beta = [0, 1/m2]."""
        path = curves.line_path([-5.0], [5.0])
        st = State(q=[0.5, 0.0], qd=[0.0, 0.0])
        ps = projection.global_initialize(path, example1.h(st.q))
        gains = control.OuterLoopGains(
            tangential_mode="position", K_P=4.0, K_D=3.0, eta1_ref=6.0
        )
        u, _, _, diag = control.step(
            example1, path, st, ps, control.ControllerState(), gains
        )
        r = control.bias_r(st.q, example1.default_limits)
        assert u[0] == pytest.approx(r[0], abs=1e-10)
        assert not diag.saturated

    def test_clamps_and_reports_saturation(self, example1):
        path = curves.line_path([-5.0], [5.0])
        st = State(q=[0.0, -4.9], qd=[0.0, 0.0])
        ps = projection.global_initialize(path, example1.h(st.q))
        gains = control.OuterLoopGains(
            tangential_mode="position", K_P=100.0, K_D=1.0, eta1_ref=9.9
        )
        u, _, _, diag = control.step(
            example1, path, st, ps, control.ControllerState(), gains
        )
        assert diag.saturated
        assert np.all(u <= example1.default_limits.u_max + 1e-12)
        assert np.abs(diag.u_unclamped).max() > 5.0
