"""Closest-point tracking on a composite path.

Maintains the (k*, lambda*) pair: brute-force global initialization on a
quantized path, then per-step monotonic gradient descent with adaptive
step size.  The descent searches only the incumbent segment, so it never
jumps branch at self-intersections; segment hand-off happens only when
lambda* leaves the current domain.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import NonConvergenceError

ON_PATH_TOL = 1e-12  # below this distance, descend on the squared distance


@dataclass(frozen=True)
class ProjectionConfig:
    """Tuning knobs for the descent and the global initializer."""

    eps: float = 1e-8
    alpha0: float = 1e-2
    grow: float = 1.2
    shrink: float = 0.5
    max_iters: int = 200
    init_quantization: float | None = None  # default: arclength / 2000

    def __post_init__(self):
        if not (0.0 < self.shrink < 1.0 < self.grow):
            raise ValueError("need 0 < shrink < 1 < grow")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class ProjectionState:
    """Tracked closest point: segment index, parameter, descent bookkeeping."""

    k_star: int
    lambda_star: float
    step_size: float
    last_iterations: int = 0
    clamped: bool = False  # lambda* pinned to an open-path endpoint


def _objective_and_gradient(path, k, lam, y):
    sigma = path.evaluate_unchecked(k, lam, 0)
    dsigma = path.evaluate_unchecked(k, lam, 1)
    diff = y - sigma
    dist = np.linalg.norm(diff)
    if dist < ON_PATH_TOL:
        # the norm is not differentiable on the path; use squared distance
        return dist, -2.0 * (diff @ dsigma)
    return dist, -(diff @ dsigma) / dist


def initial_step_size(path, eta2_ref, dt):
    """Step-size hint: expected parameter motion per control period.

    Scales the tangential reference speed by the path's minimum segment
    speed so chord-length (near unit-speed) splines get eta2_ref * dt.
    """
    min_speed = np.inf
    for k, seg in enumerate(path.segments):
        lo, hi = seg.domain
        grid = np.linspace(lo, hi, 32)
        speeds = np.linalg.norm(seg.evaluate(grid, 1), axis=1)
        min_speed = min(min_speed, float(speeds.min()))
    min_speed = max(min_speed, 1e-9)
    return abs(eta2_ref) * dt / min_speed


def update(state, path, y, cfg):
    """One Algorithm-1 pass: monotone descent, then segment hand-off.

    Raises NonConvergenceError (carrying the best state so far) if the
    iteration cap is hit.
    """
    y = np.asarray(y, dtype=float)
    k = state.k_star
    lam = state.lambda_star
    alpha = cfg.alpha0
    iters = 0
    clamped = False
    restarts = 0

    while True:
        obj, grad = _objective_and_gradient(path, k, lam, y)
        while True:
            if iters >= cfg.max_iters:
                raise NonConvergenceError(
                    f"projection did not converge in {cfg.max_iters} iterations",
                    state=replace(
                        state, k_star=k, lambda_star=lam, step_size=alpha,
                        last_iterations=iters,
                    ),
                )
            iters += 1
            # exactly-zero gradient (ridge between branches): nudge forward
            direction = np.sign(grad) if grad != 0.0 else -1.0
            lam_new = lam - alpha * direction
            obj_new, grad_new = _objective_and_gradient(path, k, lam_new, y)
            if obj_new < obj:
                lam, obj, grad = lam_new, obj_new, grad_new
                alpha *= cfg.grow
            else:
                alpha *= cfg.shrink
            if alpha < cfg.eps:
                break

        lo, hi = path.segments[k].domain
        if lam > hi:
            if k + 1 < path.n_segments:
                lam = path.segments[k + 1].domain[0] + (lam - hi)
                k += 1
            elif path.closed:
                lam = path.segments[0].domain[0] + (lam - hi)
                k = 0
            else:
                lam, clamped = hi, True
                break
        elif lam < lo:
            if k > 0:
                lam = path.segments[k - 1].domain[1] - (lo - lam)
                k -= 1
            elif path.closed:
                lam = path.segments[-1].domain[1] - (lo - lam)
                k = path.n_segments - 1
            else:
                lam, clamped = lo, True
                break
        else:
            break
        restarts += 1
        if restarts > path.n_segments + 1:
            # pathological: y keeps pushing lambda* around a closed path
            break
        # restart the descent on the new segment (Algorithm 1 re-entry)
        alpha = max(alpha, cfg.eps * 2.0)

    return ProjectionState(
        k_star=k,
        lambda_star=float(lam),
        step_size=alpha,
        last_iterations=iters,
        clamped=clamped,
    )


def global_initialize(path, y, cfg=ProjectionConfig()):
    """Brute-force grid argmin over the whole path, then one local polish.

    Ties are broken lexicographically in (k, lambda), so repeated runs are
    deterministic.
    """
    y = np.asarray(y, dtype=float)
    spacing = cfg.init_quantization
    if spacing is None:
        spacing = path.total_arclength / 2000.0
    best = (np.inf, 0, 0.0)
    for k, seg in enumerate(path.segments):
        lo, hi = seg.domain
        n = max(int(np.ceil((hi - lo) / spacing)) + 1, 2)
        grid = np.linspace(lo, hi, n)
        pts = seg.evaluate(grid, 0)
        dists = np.linalg.norm(pts - y, axis=1)
        i = int(np.argmin(dists))
        # lexicographic tie-break: strictly better distance wins; equal
        # distance keeps the earlier (k, lambda)
        if dists[i] < best[0] - 1e-15:
            best = (float(dists[i]), k, float(grid[i]))
    seed = ProjectionState(
        k_star=best[1], lambda_star=best[2], step_size=spacing
    )
    polish_cfg = replace(cfg, alpha0=spacing)
    return update(seed, path, y, polish_cfg)


def convexity_margin(path, k, lam_star, lams):
    """LHS - RHS of the descent-window convexity inequality, vectorized.

    Negative values mean the squared-distance objective seen from the
    on-path point sigma(lam_star) is still locally convex at lams.
    """
    seg = path.segments[k]
    sstar = seg.evaluate(lam_star, 0)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    s0 = seg.evaluate(lams, 0)
    s1 = seg.evaluate(lams, 1)
    s2 = seg.evaluate(lams, 2)
    d = sstar - s0
    dn2 = np.einsum("ij,ij->i", d, d)
    rhs = np.einsum("ij,ij->i", s1, s1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = (
            np.einsum("ij,ij->i", d, s2)
            + np.einsum("ij,ij->i", d, s1) ** 2 / dn2
        )
    margin = lhs - rhs
    # at lam == lam_star the ratio is 0/0 with limit rhs; treat as tight
    margin[dn2 < 1e-24] = 0.0
    return margin


def _window_ok(path, k, lam_star, delta, n_grid=2048, rel_tol=1e-9):
    lo, hi = path.segments[k].domain
    a = max(lam_star - delta, lo)
    b = min(lam_star + delta, hi)
    lams = np.linspace(a, b, n_grid)
    margin = convexity_margin(path, k, lam_star, lams)
    rhs_scale = np.linalg.norm(path.evaluate_unchecked(k, lam_star, 1)) ** 2
    return bool(np.all(margin <= rel_tol * (1.0 + rhs_scale)))


def allowable_delta_lambda(path, k, samples=64):
    """Largest convex descent window around each sampled lambda*.

    Returns (lam_stars, deltas, path_minimum).  The window is found by
    bisection on delta with an inner grid check of the convexity
    inequality; 0 is reported where the inequality fails immediately.
    """
    lo, hi = path.segments[k].domain
    width = hi - lo
    lam_stars = np.linspace(lo, hi, samples)
    deltas = np.empty(samples)
    for i, ls in enumerate(lam_stars):
        if _window_ok(path, k, ls, width):
            deltas[i] = width
            continue
        tiny = 1e-6 * width
        if not _window_ok(path, k, ls, tiny):
            deltas[i] = 0.0
            continue
        a, b = tiny, width
        while b - a > 1e-5 * width:
            mid = 0.5 * (a + b)
            if _window_ok(path, k, ls, mid):
                a = mid
            else:
                b = mid
        deltas[i] = a
    return lam_stars, deltas, float(deltas.min())
