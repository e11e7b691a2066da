"""Closed-loop simulation, scenario plumbing, and zero-dynamics analysis.

The control input is held over each 20 ms (default) period while the
plant integrates with a fixed-step classical Runge-Kutta scheme at a
finer substep.  Zero-dynamics portraits are produced by running the full
controller from states constructed on the path-following manifold, so
the redundant flow reflects the actual pipeline rather than a symbolic
reduction.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import control, curves, dynamics, frames, projection, transform
from .dynamics import Limits, State, drift_and_input
from .errors import DivergenceError, ParameterError, SplineFollowError

DIVERGENCE_BOUND = 1e6
FMT = "%.17g"


# --- scenario ----------------------------------------------------------------


_ANALYTIC_PATHS = {
    "circle": curves.circle_path,
    "ellipse": curves.ellipse_path,
    "line": curves.line_path,
    "helix": curves.helix_path,
}


def _build_path(spec):
    """Path from a scenario path spec (waypoints, analytic, or file)."""
    if "waypoints" in spec:
        return curves.fit_spline(
            np.asarray(spec["waypoints"], dtype=float),
            closed=bool(spec.get("closed", False)),
            smoothness_order=int(spec.get("smoothness_order", 4)),
        )
    if "analytic" in spec:
        kind = spec["analytic"]
        if kind not in _ANALYTIC_PATHS:
            raise ParameterError(f"unknown analytic path {kind!r}")
        return _ANALYTIC_PATHS[kind](**spec.get("params", {}))
    if "file" in spec:
        with open(spec["file"]) as f:
            return curves.SplinePath.from_dict(json.load(f))
    if "segments" in spec:
        return curves.SplinePath.from_dict(spec)
    raise ParameterError("path spec needs waypoints, analytic, file or segments")


@dataclass
class Scenario:
    """Everything needed to reproduce one closed-loop run."""

    plant: str
    path_spec: dict
    q0: np.ndarray
    qd0: np.ndarray
    gains: control.OuterLoopGains
    duration: float = 10.0
    dt: float = 0.02
    substeps: int = 10
    plant_kwargs: dict = field(default_factory=dict)
    redundancy: control.RedundancyConfig = field(
        default_factory=control.RedundancyConfig
    )
    limits: Limits | None = None
    encoder_resolution: np.ndarray | None = None  # per-joint quantization
    frame_mode: str = "frenet_serret"
    frame_fixed: tuple = ()
    name: str = "scenario"

    def __post_init__(self):
        if self.dt <= 0 or self.duration <= 0 or self.substeps < 1:
            raise ParameterError("need dt > 0, duration > 0, substeps >= 1")
        self.q0 = np.asarray(self.q0, dtype=float)
        self.qd0 = np.asarray(self.qd0, dtype=float)

    @property
    def frame_policy(self):
        return frames.FramePolicy(
            mode=self.frame_mode, fixed_vectors=self.frame_fixed
        )

    @classmethod
    def from_dict(cls, d):
        gains = control.OuterLoopGains(
            **{
                k: tuple(map(tuple, v)) if isinstance(v, list)
                and v and isinstance(v[0], list) else tuple(v)
                if isinstance(v, list) else v
                for k, v in d.get("gains", {}).items()
            }
        )
        red = d.get("redundancy", {})
        redundancy = control.RedundancyConfig(
            W=np.asarray(red["W"], float) if "W" in red else None,
            bias_mode=red.get("bias_mode", "joint_limit"),
        )
        limits = None
        if "limits" in d:
            limits = Limits(**d["limits"])
        enc = d.get("encoder_resolution")
        return cls(
            plant=d["plant"],
            path_spec=d["path"],
            q0=d["q0"],
            qd0=d["qd0"],
            gains=gains,
            duration=float(d.get("duration", 10.0)),
            dt=float(d.get("dt", 0.02)),
            substeps=int(d.get("substeps", 10)),
            plant_kwargs=d.get("plant_kwargs", {}),
            redundancy=redundancy,
            limits=limits,
            encoder_resolution=np.asarray(enc, float) if enc else None,
            frame_mode=d.get("frame_mode", "frenet_serret"),
            frame_fixed=tuple(d.get("frame_fixed", ())),
            name=d.get("name", "scenario"),
        )

    @classmethod
    def from_file(cls, filename):
        with open(filename) as f:
            return cls.from_dict(json.load(f))


# --- run log -----------------------------------------------------------------


@dataclass
class RunLog:
    """Uniform-grid time series of one simulation, one row per control step."""

    scenario_name: str
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    u: np.ndarray
    eta: np.ndarray           # (steps, 2)
    xi: np.ndarray            # (steps, 2, p-1)
    zeta: np.ndarray
    k_star: np.ndarray
    lambda_star: np.ndarray
    iterations: np.ndarray
    saturated: np.ndarray

    @property
    def xi_flat(self):
        return self.xi.reshape(len(self.t), -1)

    def summary(self, limits=None, tail_fraction=0.25):
        """Scalar health indicators of the run."""
        n_tail = max(int(len(self.t) * tail_fraction), 1)
        xi1 = self.xi[:, 0, :] if self.xi.shape[2] else np.zeros((len(self.t), 1))
        out = {
            "max_xi1_norm": float(np.max(np.linalg.norm(xi1, axis=1))),
            "tail_xi1_norm": float(
                np.max(np.linalg.norm(xi1[-n_tail:], axis=1))
            ),
            "tail_eta2_mean": float(np.mean(self.eta[-n_tail:, 1])),
            "max_zeta_norm": float(np.max(np.linalg.norm(self.zeta, axis=1))),
            "saturation_steps": int(np.sum(self.saturated)),
            "final_zeta": self.zeta[-1].tolist(),
        }
        if limits is not None:
            viol = np.sum(
                (self.q < limits.q_min - 1e-12) | (self.q > limits.q_max + 1e-12)
            )
            out["joint_limit_violations"] = int(viol)
        return out

    def to_csv(self, filename):
        N = self.q.shape[1]
        p1 = self.xi.shape[2]
        cols = (
            ["t"]
            + [f"q{i}" for i in range(N)]
            + [f"qd{i}" for i in range(N)]
            + [f"u{i}" for i in range(N)]
            + ["eta1", "eta2"]
            + [f"xi1_{j}" for j in range(p1)]
            + [f"xi2_{j}" for j in range(p1)]
            + [f"zeta{i}" for i in range(self.zeta.shape[1])]
            + ["k_star", "lambda_star", "iterations", "saturated"]
        )
        data = np.column_stack(
            [
                self.t, self.q, self.qd, self.u, self.eta,
                self.xi[:, 0, :], self.xi[:, 1, :], self.zeta,
                self.k_star, self.lambda_star, self.iterations,
                self.saturated.astype(float),
            ]
        )
        np.savetxt(filename, data, fmt=FMT, delimiter=",",
                   header=",".join(cols), comments="")


# --- measurement model -------------------------------------------------------


class _Measurement:
    """Optionally quantized state feedback with first-difference velocity."""

    def __init__(self, resolution, dt):
        self.resolution = resolution
        self.dt = dt
        self._prev_q = None

    def observe(self, state):
        if self.resolution is None:
            return state
        q = np.round(state.q / self.resolution) * self.resolution
        if self._prev_q is None:
            qd = np.zeros_like(q)
        else:
            qd = (q - self._prev_q) / self.dt
        self._prev_q = q
        return State(q=q, qd=qd)


# --- simulation --------------------------------------------------------------


def _rk4_hold(system, state, u, h, substeps):
    """Integrate the plant over one control period with u held constant."""
    x = np.concatenate([state.q, state.qd])
    n = len(state.q)

    def f(x):
        return np.concatenate(
            [x[n:], dynamics.acceleration(system, x[:n], x[n:], u)]
        )

    for _ in range(substeps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return State(q=x[:n], qd=x[n:])


def run(scenario, path=None, system=None, proj_cfg=None):
    """Execute a scenario and return its RunLog.

    The controller sees the (optionally quantized) measured state; the
    plant always integrates the true state.  Divergence (state norm above
    1e6) aborts with the failing time stamp.
    """
    if system is None:
        system = dynamics.make_plant(scenario.plant, **scenario.plant_kwargs)
    if path is None:
        path = _build_path(scenario.path_spec)
    limits = scenario.limits or system.default_limits
    if proj_cfg is None:
        proj_cfg = projection.ProjectionConfig()

    policy = scenario.frame_policy
    state = State(q=scenario.q0, qd=scenario.qd0)
    meas = _Measurement(scenario.encoder_resolution, scenario.dt)
    observed = meas.observe(state)
    proj = projection.global_initialize(path, system.h(observed.q), proj_cfg)
    ctrl = control.ControllerState()

    steps = int(round(scenario.duration / scenario.dt))
    h = scenario.dt / scenario.substeps
    rows = {key: [] for key in (
        "t", "q", "qd", "u", "eta", "xi", "zeta",
        "k_star", "lambda_star", "iterations", "saturated")}

    t = 0.0
    for _ in range(steps):
        try:
            u, proj, ctrl, diag = control.step(
                system, path, observed, proj, ctrl, scenario.gains,
                redundancy=scenario.redundancy, limits=limits,
                proj_cfg=proj_cfg, policy=policy, dt=scenario.dt, t=t,
            )
        except SplineFollowError as exc:
            raise type(exc)(f"t={t:.3f}s: {exc}") from exc
        rows["t"].append(t)
        rows["q"].append(state.q)
        rows["qd"].append(state.qd)
        rows["u"].append(u)
        rows["eta"].append(diag.eta)
        rows["xi"].append(diag.xi)
        rows["zeta"].append(diag.zeta)
        rows["k_star"].append(proj.k_star)
        rows["lambda_star"].append(proj.lambda_star)
        rows["iterations"].append(diag.iterations)
        rows["saturated"].append(diag.saturated)

        state = _rk4_hold(system, state, u, h, scenario.substeps)
        if np.linalg.norm(np.concatenate([state.q, state.qd])) > DIVERGENCE_BOUND:
            raise DivergenceError(
                f"state norm exceeded {DIVERGENCE_BOUND:g}", time=t
            )
        observed = meas.observe(state)
        t += scenario.dt

    return RunLog(
        scenario_name=scenario.name,
        t=np.asarray(rows["t"]),
        q=np.asarray(rows["q"]),
        qd=np.asarray(rows["qd"]),
        u=np.asarray(rows["u"]),
        eta=np.asarray(rows["eta"]),
        xi=np.asarray(rows["xi"]),
        zeta=np.asarray(rows["zeta"]),
        k_star=np.asarray(rows["k_star"]),
        lambda_star=np.asarray(rows["lambda_star"]),
        iterations=np.asarray(rows["iterations"]),
        saturated=np.asarray(rows["saturated"]),
    )


def boundedness_report(log, limits=None, zeta_bound=100.0):
    """Verdict on redundant-state boundedness and joint-limit compliance."""
    band = np.deg2rad(2.0)
    verdict = {
        "zeta_bounded": bool(
            np.max(np.linalg.norm(log.zeta, axis=1)) < zeta_bound
        ),
        "max_zeta_norm": float(np.max(np.linalg.norm(log.zeta, axis=1))),
        "saturation_events": int(np.sum(log.saturated)),
    }
    if limits is not None:
        ok = np.all(
            (log.q >= limits.q_min - band) & (log.q <= limits.q_max + band)
        )
        verdict["joint_limits_respected"] = bool(ok)
    return verdict


# --- planar 3R inverse kinematics on the zero-dynamics manifold --------------


def ik_planar3r(y, zeta1, elbow="up"):
    """Joint angles of the unit-link 3R arm: tip at y, tool angle zeta1."""
    y = np.asarray(y, dtype=float)
    w = y - np.array([np.cos(zeta1), np.sin(zeta1)])  # wrist center
    d2 = w @ w
    c2 = (d2 - 2.0) / 2.0
    if abs(c2) > 1.0:
        raise ParameterError(
            f"wrist target at distance {np.sqrt(d2):.3f} unreachable"
        )
    s2 = np.sqrt(max(1.0 - c2 * c2, 0.0))
    if elbow == "down":
        s2 = -s2
    q2 = np.arctan2(s2, c2)
    q1 = np.arctan2(w[1], w[0]) - np.arctan2(s2, 1.0 + c2)
    q3 = zeta1 - q1 - q2
    return np.array([q1, q2, q3])


def zero_dynamics_state(system, path, zeta, eta1_ref=0.0, elbow="up"):
    """State on the manifold eta = (eta1_ref, 0), xi = 0, at the given zeta.

    The configuration comes from the arm's inverse kinematics; the
    velocity solves J qd = 0 (output at rest) together with the redundant
    rate sum(qd) = zeta_2.
    """
    ps = _point_on_path(path, eta1_ref)
    y_ref = path.evaluate(ps.k_star, ps.lambda_star, 0)
    q = ik_planar3r(y_ref, zeta[0], elbow=elbow)
    A = np.vstack([system.J(q), np.ones((1, system.N))])
    qd = np.linalg.solve(A, np.array([0.0, 0.0, zeta[1]]))
    return State(q=q, qd=qd), ps


def _point_on_path(path, eta1_ref):
    """Projection state whose arclength coordinate equals eta1_ref."""
    offs = path.arclength_offsets
    k = int(np.searchsorted(offs, eta1_ref, side="right") - 1)
    k = min(max(k, 0), path.n_segments - 1)
    lo, hi = path.segments[k].domain
    target = eta1_ref - offs[k]
    if target <= 0.0:
        lam = lo
    elif target >= path.cumulative_arclength[k]:
        lam = hi
    else:
        lam = brentq(lambda l: path.arclength(k, l) - target, lo, hi,
                     xtol=1e-12)
    return projection.ProjectionState(k_star=k, lambda_star=float(lam),
                                      step_size=1e-3)


@dataclass
class PhasePortrait:
    """Zero-dynamics flows and classified equilibria."""

    grid: np.ndarray          # (n, 2) initial conditions
    flows: list               # per IC: (steps, 2) zeta trajectory or None
    failed: np.ndarray        # bool mask of controller failures
    equilibria: list          # dicts: zeta, eigenvalues, stable
    field: callable           # zeta -> (zeta2, zetadot2)


def _zero_dynamics_field(system, path, gains, redundancy, limits,
                         eta1_ref, elbow):
    """The redundant flow (zeta1., zeta2.) evaluated through the pipeline."""

    def field(zeta):
        st, ps = zero_dynamics_state(system, path, zeta, eta1_ref, elbow)
        lin = transform.linearize(system, st, path, ps)
        v_eta, _ = control.tangential_v(
            lin.transformed.eta, control.ControllerState(), gains, dt=0.02
        )
        v = np.concatenate([[v_eta],
                            control.transversal_v(lin.transformed.xi, gains)])
        r = (control.bias_r(st.q, limits)
             if redundancy.bias_mode == "joint_limit"
             else np.zeros(system.N))
        u = control.resolve_input(lin.alpha, lin.beta, v, r, redundancy.W)
        u = np.clip(u, limits.u_min, limits.u_max)
        f_v, g_v = drift_and_input(system, st)
        return np.array([zeta[1], float(np.sum(f_v + g_v @ u))])

    return field


def zero_dynamics_portrait(system, path, gains, grid,
                           redundancy=None, limits=None, eta1_ref=0.0,
                           elbow="up", sim_duration=5.0, dt=0.02,
                           substeps=2, equilibrium_tol=1e-6,
                           cluster_radius=1e-3):
    """Phase portrait of the redundant dynamics while a path point is held.

    Each grid point seeds a full closed-loop simulation whose zeta trace
    is recorded; grid points where the controller fails (singular
    decoupling, unreachable kinematics) are marked, not fatal.
    Equilibria are found by driving the flow-field norm to zero along
    zeta_2 = 0 and classified by finite-difference linearization.
    """
    if limits is None:
        limits = system.default_limits
    if redundancy is None:
        redundancy = control.RedundancyConfig()
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    field = _zero_dynamics_field(system, path, gains, redundancy, limits,
                                 eta1_ref, elbow)

    flows = []
    failed = np.zeros(len(grid), dtype=bool)
    steps = int(round(sim_duration / dt))
    h = dt / substeps
    # flows start on the manifold, so a loose descent tolerance suffices
    proj_cfg = projection.ProjectionConfig(eps=1e-6, alpha0=1e-3)
    for i, z0 in enumerate(grid):
        try:
            st, ps = zero_dynamics_state(system, path, z0, eta1_ref, elbow)
            ctrl = control.ControllerState()
            trace = np.empty((steps, 2))
            for s in range(steps):
                u, ps, ctrl, diag = control.step(
                    system, path, st, ps, ctrl, gains,
                    redundancy=redundancy, limits=limits,
                    proj_cfg=proj_cfg, dt=dt, t=s * dt,
                )
                trace[s] = diag.zeta
                st = _rk4_hold(system, st, u, h, substeps)
            flows.append(trace)
        except SplineFollowError:
            flows.append(None)
            failed[i] = True

    equilibria = _find_equilibria(field, grid, equilibrium_tol, cluster_radius)
    return PhasePortrait(grid=grid, flows=flows, failed=failed,
                         equilibria=equilibria, field=field)


def _try_field(field, z1):
    try:
        return field(np.array([z1, 0.0]))[1]
    except SplineFollowError:
        return np.nan


def _find_equilibria(field, grid, tol, cluster_radius):
    """Root-find the flow field along zeta_2 = 0, then classify.

    Interior equilibria come from sign changes of the flow.  At the edges
    of the kinematically feasible zeta_1 interval the flow can vanish in
    the limit (the manifold's singular configurations); those are
    detected by checking that |flow| decays toward the feasibility
    boundary and reported at the boundary itself.
    """
    z1_vals = np.unique(grid[:, 0])
    lo, hi = z1_vals.min(), z1_vals.max()
    span = hi - lo
    scan = np.linspace(lo, hi, 400)
    g = np.array([_try_field(field, z1) for z1 in scan])

    roots = []
    for i in range(len(scan) - 1):
        a, b = g[i], g[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            roots.append(scan[i])
        elif a * b < 0.0:
            roots.append(
                brentq(lambda z: field(np.array([z, 0.0]))[1],
                       scan[i], scan[i + 1], xtol=1e-12)
            )

    # deduplicate interior roots
    roots = sorted(roots)
    merged = []
    for rt in roots:
        if not merged or abs(rt - merged[-1]) > cluster_radius:
            merged.append(rt)

    equilibria = []
    for z1 in merged:
        z = np.array([z1, 0.0])
        if np.linalg.norm(field(z)) > tol:
            continue
        equilibria.append(_classify(field, z, boundary=0))

    for eq in _boundary_equilibria(field, scan, g, span):
        if not any(abs(eq["zeta"][0] - e["zeta"][0]) <= cluster_radius
                   for e in equilibria):
            equilibria.append(eq)
    equilibria.sort(key=lambda e: e["zeta"][0])
    return equilibria


def _boundary_equilibria(field, scan, g, span):
    """Limit equilibria at the edges of the feasible zeta_1 interval."""
    feasible = ~np.isnan(g)
    if not feasible.any():
        return []
    out = []
    idx = np.flatnonzero(feasible)
    for edge, sign in ((idx[0], -1), (idx[-1], +1)):
        nbr = edge + sign
        if 0 <= nbr < len(scan) and feasible[nbr]:
            continue  # feasible through the grid edge: no boundary inside
        # bisect the feasibility boundary between scan[edge] and beyond
        a = scan[edge]
        b = a + sign * (scan[1] - scan[0]) if 0 <= nbr < len(scan) else a
        if a == b:
            # feasibility ends exactly at the grid edge; probe just outside
            b = a + sign * 1e-3 * span
            if not np.isnan(_try_field(field, b)):
                continue
        for _ in range(60):
            mid = 0.5 * (a + b)
            if np.isnan(_try_field(field, mid)):
                b = mid
            else:
                a = mid
        zb = a
        # the flow must decay toward the boundary for a limit equilibrium
        probes = [abs(_try_field(field, zb - sign * d * span))
                  for d in (1e-3, 1e-5, 1e-7)]
        if any(np.isnan(probes)) or not (probes[2] < probes[0]):
            continue
        if probes[2] > 0.05 * (1.0 + probes[0]):
            continue
        eq = _classify(field, np.array([zb, 0.0]), boundary=-sign)
        out.append(eq)
    return out


def _classify(field, z, boundary=0):
    """Stability via eigenvalues of the finite-difference linearization."""
    Jac = _field_jacobian(field, z, side=boundary)
    eig = np.linalg.eigvals(Jac)
    return {
        "zeta": z,
        "jacobian": Jac,
        "eigenvalues": eig,
        "stable": bool(np.all(eig.real < -1e-9)),
        "boundary": boundary != 0,
    }


def _field_jacobian(field, z, h=1e-5, side=0):
    """FD linearization; side != 0 forces one-sided steps in zeta_1.

    At a feasibility-boundary equilibrium the flow itself is taken as
    zero (its limit value), so the one-sided difference uses only the
    interior sample.
    """
    Jac = np.empty((2, 2))
    for j in range(2):
        dz = np.zeros(2)
        dz[j] = h
        if side != 0 and j == 0:
            fi = field(z + side * dz)
            Jac[:, j] = (fi - np.array([z[1], 0.0])) / (side * h)
            continue
        if side != 0:
            base = z + side * h * np.array([1.0, 0.0])
        else:
            base = z
        try:
            fp = field(base + dz)
            fm = field(base - dz)
            Jac[:, j] = (fp - fm) / (2.0 * h)
        except SplineFollowError:
            f0 = field(base)
            try:
                fp = field(base + dz)
                Jac[:, j] = (fp - f0) / h
            except SplineFollowError:
                fm = field(base - dz)
                Jac[:, j] = (f0 - fm) / h
    return Jac


def portrait_to_files(portrait, csv_file, json_file):
    """CSV of flows plus a JSON equilibria summary."""
    rows = []
    for i, trace in enumerate(portrait.flows):
        if trace is None:
            continue
        n = len(trace)
        rows.append(
            np.column_stack([np.full(n, i), np.arange(n), trace])
        )
    data = np.vstack(rows) if rows else np.empty((0, 4))
    np.savetxt(csv_file, data, fmt=FMT, delimiter=",",
               header="ic_index,step,zeta1,zeta2", comments="")
    summary = {
        "equilibria": [
            {
                "zeta": e["zeta"].tolist(),
                "eigenvalues_real": e["eigenvalues"].real.tolist(),
                "eigenvalues_imag": e["eigenvalues"].imag.tolist(),
                "stable": e["stable"],
            }
            for e in portrait.equilibria
        ],
        "failed_grid_points": int(portrait.failed.sum()),
        "grid_points": len(portrait.grid),
    }
    with open(json_file, "w") as f:
        json.dump(summary, f, indent=2)
