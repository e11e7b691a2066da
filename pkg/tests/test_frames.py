"""Moving-frame construction: analytic cases, finite differences, fallbacks."""

import numpy as np
import pytest

from splinefollow import curves, frames
from splinefollow.errors import DegenerateFrameError


class TestCircleFrame:
    def test_tangent_and_normal(self):
        path = curves.circle_path(radius=2.0)
        for lam in np.linspace(0.1, 4.0, 5):
            f = frames.frame_at(path, 0, lam)
            t = lam / 2.0
            np.testing.assert_allclose(
                f.vectors[0], [-np.sin(t), np.cos(t)], atol=1e-10
            )
            np.testing.assert_allclose(
                f.vectors[1], [-np.cos(t), -np.sin(t)], atol=1e-10
            )

    def test_curvature_is_inverse_radius(self):
        for radius in (0.5, 2.0, 3.7):
            path = curves.circle_path(radius=radius)
            chi = frames.curvatures_at(path, 0, 1.0)
            assert chi[0] == pytest.approx(1.0 / radius, rel=1e-10)


class TestHelixFrame:
    def test_curvature_and_torsion(self):
        R, c = 2.0, 0.5
        path = curves.helix_path(radius=R, pitch=c)
        chi = frames.curvatures_at(path, 0, 1.3)
        denom = R * R + c * c
        assert chi[0] == pytest.approx(R / denom, rel=1e-9)
        assert chi[1] == pytest.approx(c / denom, rel=1e-9)

    def test_frame_is_orthonormal(self):
        path = curves.helix_path()
        for lam in np.linspace(0.5, 10.0, 7):
            f = frames.frame_at(path, 0, lam)
            np.testing.assert_allclose(
                f.vectors @ f.vectors.T, np.eye(3), atol=1e-12
            )


class TestJetDerivatives:
    @pytest.mark.parametrize("fixture", ["wavy_path", "fig8_path", "twisted_path"])
    def test_finite_difference_oracle(self, fixture, request):
        path = request.getfixturevalue(fixture)
        policy = (
            frames.FramePolicy(mode="planar_fallback")
            if fixture == "fig8_path"
            else frames.FRENET
        )
        h = 1e-5
        rng = np.random.default_rng(11)
        for _ in range(6):
            k = int(rng.integers(path.n_segments))
            lo, hi = path.segments[k].domain
            lam = rng.uniform(lo + 2 * h, hi - 2 * h)
            fj = frames.frame_jet(path, k, lam, policy)
            fp = frames.frame_jet(path, k, lam + h, policy)
            fm = frames.frame_jet(path, k, lam - h, policy)
            np.testing.assert_allclose(
                (fp.e - fm.e) / (2.0 * h), fj.de, atol=1e-5
            )
            np.testing.assert_allclose(
                (fp.e - 2.0 * fj.e + fm.e) / h**2, fj.dde, atol=2e-4
            )

    def test_fs_equations_hold(self, twisted_path):
        """e' = ||sigma'|| S(chi) e with S the skew tridiagonal matrix."""
        rng = np.random.default_rng(5)
        for _ in range(5):
            k = int(rng.integers(twisted_path.n_segments))
            lo, hi = twisted_path.segments[k].domain
            lam = rng.uniform(lo, hi)
            fj = frames.frame_jet(twisted_path, k, lam)
            S = frames.fs_coefficient_matrix(fj.curvatures, fj.speed[0])
            np.testing.assert_allclose(fj.de, S @ fj.e, atol=1e-8)

    def test_speed_jet(self):
        path = curves.ellipse_path()
        lam = 0.7
        fj = frames.frame_jet(path, 0, lam)
        speed = lambda t: np.linalg.norm(path.evaluate(0, t, 1))  # noqa: E731
        h = 1e-6
        assert fj.speed[0] == pytest.approx(speed(lam), rel=1e-12)
        assert fj.speed[1] == pytest.approx(
            (speed(lam + h) - speed(lam - h)) / (2 * h), abs=1e-6
        )


class TestFallbacks:
    def test_line_needs_completion_vectors(self):
        path = curves.line_path([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(DegenerateFrameError):
            frames.frame_at(path, 0, 0.5)
        policy = frames.FramePolicy(
            mode="line_fallback", fixed_vectors=([0.0, 1.0],)
        )
        f = frames.frame_at(path, 0, 0.5, policy)
        np.testing.assert_allclose(f.vectors, np.eye(2), atol=1e-12)

    def test_planar_fallback_survives_inflection(self, fig8_path):
        """Strict Gram-Schmidt degenerates somewhere on the figure-eight;
        the rotated-tangent frame does not."""
        policy = frames.FramePolicy(mode="planar_fallback")
        degenerate_hits = 0
        for k in range(fig8_path.n_segments):
            lo, hi = fig8_path.segments[k].domain
            for lam in np.linspace(lo, hi, 16):
                f = frames.frame_at(fig8_path, k, lam, policy)
                np.testing.assert_allclose(
                    f.vectors @ f.vectors.T, np.eye(2), atol=1e-12
                )
                try:
                    frames.frame_at(fig8_path, k, lam)
                except DegenerateFrameError:
                    degenerate_hits += 1
        assert degenerate_hits > 0

    def test_planar_fallback_orientation_continuous(self, fig8_path):
        policy = frames.FramePolicy(mode="planar_fallback")
        prev = None
        for k in range(fig8_path.n_segments):
            lo, hi = fig8_path.segments[k].domain
            for lam in np.linspace(lo, hi, 24):
                e = frames.frame_at(fig8_path, k, lam, policy).vectors
                if prev is not None:
                    assert prev[1] @ e[1] > 0.5
                prev = e

    def test_planar_fallback_3d_requires_planar_curve(self):
        helix = curves.helix_path()
        policy = frames.FramePolicy(
            mode="planar_fallback", fixed_vectors=([0.0, 0.0, 1.0],)
        )
        with pytest.raises(DegenerateFrameError):
            # helix tangent is not orthogonal to z: not a planar curve
            frames.frame_at(helix, 0, 1.0, policy)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            frames.FramePolicy(mode="parallel_transport")
