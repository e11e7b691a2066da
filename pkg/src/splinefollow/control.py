"""Outer-loop controllers and redundancy-resolving feedback transform.

The virtual input v = (v_eta, v_xi) commands the second derivatives of
the tangential and transversal coordinates.  The actuator command solves
the static weighted least-squares problem min (u - r)' W (u - r) subject
to beta u + alpha = v, whose closed form uses the W-weighted right
pseudoinverse of beta.  The null-space bias r steers the redundant
degrees of freedom away from joint limits.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NearSingularDecouplingError, ParameterError

CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class RedundancyConfig:
    """Weighting and bias selection for the input resolution."""

    W: np.ndarray | None = None          # SPD weight, defaults to identity
    bias_mode: str = "joint_limit"       # or "zero"

    def __post_init__(self):
        if self.bias_mode not in ("joint_limit", "zero"):
            raise ParameterError(f"unknown bias_mode {self.bias_mode!r}")
        if self.W is not None:
            W = np.asarray(self.W, dtype=float)
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise ParameterError("W must be square")
            if not np.allclose(W, W.T, atol=1e-12):
                raise ParameterError("W must be symmetric")
            if np.any(np.linalg.eigvalsh(W) <= 0):
                raise ParameterError("W must be positive definite")
            object.__setattr__(self, "W", W)


@dataclass(frozen=True)
class OuterLoopGains:
    """Gains for the tangential and transversal outer loops.

    Tangential modes: ``velocity`` is a PI loop on eta_2 tracking
    eta2_ref; ``position`` is a PD loop regulating eta_1 to eta1_ref.
    Transversal modes: ``pd`` is componentwise -Kp xi_1 - Kd xi_2;
    ``robust`` applies the norm-switched law (K + K0) xi plus
    K1 xi/||xi|| outside the boundary layer mu and K2 ||xi|| xi inside.
    K1 = mu^2 K2 is enforced so the switch is continuous.
    """

    tangential_mode: str = "velocity"
    K_P: float = 1.0
    K_I: float = 0.0
    K_D: float = 0.0                     # position mode only
    eta2_ref: float = 0.0
    eta1_ref: float = 0.0
    eta2_ref_table: tuple = ()           # ((t, eta2_ref), ...) ramp profile
    integral_limit: float = 10.0

    transversal_mode: str = "pd"
    xi_Kp: tuple = (1.0,)
    xi_Kd: tuple = (1.0,)
    robust_K: tuple = ()
    robust_K0: tuple = ()
    robust_K2: float = 0.0
    robust_mu: float = 0.01

    def __post_init__(self):
        if self.tangential_mode not in ("velocity", "position"):
            raise ParameterError(f"bad tangential_mode {self.tangential_mode!r}")
        if self.transversal_mode not in ("pd", "robust"):
            raise ParameterError(f"bad transversal_mode {self.transversal_mode!r}")
        if self.K_P < 0 or self.K_I < 0 or self.K_D < 0:
            raise ParameterError("tangential gains must be nonnegative")
        if self.transversal_mode == "pd":
            if min(self.xi_Kp) <= 0 or min(self.xi_Kd) <= 0:
                raise ParameterError("PD transversal gains must be positive")
        if self.robust_mu <= 0:
            raise ParameterError("robust boundary layer mu must be positive")

    @property
    def robust_K1(self):
        # continuity of the switched term at ||xi|| = mu
        return self.robust_mu**2 * np.atleast_2d(
            np.asarray(self.robust_K2, dtype=float)
        )

    def eta2_reference(self, t):
        """Reference speed at time t (piecewise-linear table, else constant)."""
        if not self.eta2_ref_table:
            return self.eta2_ref
        pts = np.asarray(self.eta2_ref_table, dtype=float)
        return float(np.interp(t, pts[:, 0], pts[:, 1]))


@dataclass(frozen=True)
class ControllerState:
    """Integrator memory of the tangential PI loop."""

    integral: float = 0.0


def bias_r(x_c, limits):
    """Joint-limit avoidance bias: affine, u_max at q_min, u_min at q_max."""
    x_c = np.asarray(x_c, dtype=float)
    span_u = limits.u_max - limits.u_min
    span_q = limits.q_max - limits.q_min
    return -span_u / span_q * (x_c - limits.q_min) + limits.u_max


def resolve_input(alpha, beta, v, r, W=None):
    """Closed-form constrained least squares: u = b+ (v - a) + (I - b+ b) r.

    b+ is the W-weighted right pseudoinverse W^-1 beta' (beta W^-1 beta')^-1.
    Raises NearSingularDecouplingError when beta W^-1 beta' has condition
    number above 1e10 (the transform is degenerating).
    """
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    p, N = beta.shape
    if W is None:
        Winv_bt = beta.T
    else:
        Winv_bt = np.linalg.solve(W, beta.T)
    M = beta @ Winv_bt
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NearSingularDecouplingError(
            f"decoupling matrix nearly singular (cond(beta W^-1 beta') = {cond:.3e})"
        )
    pinv = Winv_bt @ np.linalg.inv(M)
    u = pinv @ (np.asarray(v, float) - np.asarray(alpha, float))
    r = np.asarray(r, dtype=float)
    return u + r - pinv @ (beta @ r)


def tangential_v(eta, ctrl_state, gains, dt, t=0.0):
    """Tangential virtual input and the updated integrator state.

    Velocity mode is a PI loop on eta_2; position mode is a PD loop on
    eta_1 (used for point stabilization).  The integral uses a
    first-order update and is clamped for anti-windup.
    """
    if gains.tangential_mode == "position":
        v = gains.K_P * (gains.eta1_ref - eta[0]) - gains.K_D * eta[1]
        return v, ctrl_state
    err = gains.eta2_reference(t) - eta[1]
    integral = ctrl_state.integral + dt * err
    lim = gains.integral_limit
    integral = float(np.clip(integral, -lim, lim))
    v = gains.K_P * err + gains.K_I * integral
    return v, replace(ctrl_state, integral=integral)


def transversal_v(xi, gains):
    """Transversal virtual input from the stacked (xi_1; xi_2) array."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi.reshape(2, -1)
    m = xi.shape[1]
    if gains.transversal_mode == "pd":
        Kp = np.resize(np.asarray(gains.xi_Kp, float), m)
        Kd = np.resize(np.asarray(gains.xi_Kd, float), m)
        return -Kp * xi[0] - Kd * xi[1]
    # robust mode operates on the interleaved vector (xi_1^1, xi_2^1, ...)
    z = xi.T.ravel()
    K = np.atleast_2d(np.asarray(gains.robust_K, dtype=float))
    K0 = np.atleast_2d(np.asarray(gains.robust_K0, dtype=float))
    K2 = np.atleast_2d(np.asarray(gains.robust_K2, dtype=float))
    lin = (K + K0) @ z
    nz = np.linalg.norm(z)
    if nz >= gains.robust_mu:
        sw = (gains.robust_K1 @ z) / nz
    else:
        sw = nz * (K2 @ z)
    return lin + sw


@dataclass(frozen=True)
class StepDiagnostics:
    """Everything the logger wants to know about one control step."""

    k_star: int
    lambda_star: float
    eta: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    beta_condition: float
    iterations: int
    saturated: bool
    u_unclamped: np.ndarray


def step(system, path, state, proj_state, ctrl_state, gains,
         redundancy=RedundancyConfig(), limits=None,
         proj_cfg=None, policy=None, dt=0.02, t=0.0):
    """One full control pass: project, transform, outer loops, resolve.

    Returns (u, new_proj_state, new_ctrl_state, diagnostics).  u is
    clamped elementwise to the actuation limits; the pre-clamp value is
    kept in the diagnostics.
    """
    from . import frames, projection, transform

    if limits is None:
        limits = system.default_limits
    if proj_cfg is None:
        proj_cfg = projection.ProjectionConfig()
    if policy is None:
        policy = frames.FRENET

    proj_state = projection.update(proj_state, path, system.h(state.q), proj_cfg)
    lin = transform.linearize(system, state, path, proj_state, policy)
    ts = lin.transformed

    v_eta, ctrl_state = tangential_v(ts.eta, ctrl_state, gains, dt, t)
    if system.p > 1:
        v = np.concatenate([[v_eta], transversal_v(ts.xi, gains)])
    else:
        v = np.array([v_eta])

    if redundancy.bias_mode == "joint_limit":
        r = bias_r(state.q, limits)
    else:
        r = np.zeros(system.N)
    u = resolve_input(lin.alpha, lin.beta, v, r, redundancy.W)

    u_clamped = np.clip(u, limits.u_min, limits.u_max)
    saturated = bool(np.any(u_clamped != u))

    diag = StepDiagnostics(
        k_star=proj_state.k_star,
        lambda_star=proj_state.lambda_star,
        eta=ts.eta,
        xi=ts.xi,
        zeta=ts.zeta,
        v=v,
        alpha=lin.alpha,
        beta_condition=float(np.linalg.cond(lin.beta @ lin.beta.T)),
        iterations=proj_state.last_iterations,
        saturated=saturated,
        u_unclamped=u,
    )
    return u_clamped, proj_state, ctrl_state, diag
