"""Scale/shift alignment: exact recovery, noise behavior, and an
independent grid-search check of the least-squares optimum."""

import numpy as np
import numpy.testing as npt
import pytest

from nvsforge.camera import Intrinsics, RigidPose
from nvsforge.depthalign import (
    AlignmentParams,
    DepthSequence,
    apply_alignment,
    depth_centroid,
    solve_scale_shift,
)
from nvsforge.errors import (
    DegenerateVariance,
    InsufficientSamples,
    NoValidDepth,
    ShapeMismatch,
)

from conftest import exact_inverse_pair


def sequences_from_pair(count, alpha, beta, shape):
    metric, relative = exact_inverse_pair(count, alpha, beta)
    return (
        DepthSequence.from_frames(relative.reshape(shape), "relative"),
        DepthSequence.from_frames(metric.reshape(shape), "metric"),
    )


def sse_on_grid(x, y, alphas, betas):
    """Sum of squared residuals of y - (a*x + b) for every grid cell.

    Evaluated through sufficient statistics only, so this shares no code
    path with the closed-form solver.
    """
    n = x.size
    sx, sy = x.sum(), y.sum()
    sxx, sxy, syy = (x * x).sum(), (x * y).sum(), (y * y).sum()
    a, b = np.meshgrid(alphas, betas, indexing="ij")
    return syy - 2 * a * sxy - 2 * b * sy + a * a * sxx + 2 * a * b * sx + b * b * n


class TestDepthSequence:
    def test_from_frames_derives_validity(self):
        frames = np.array([[[1.0, 0.0], [np.nan, 2.0]]])
        seq = DepthSequence.from_frames(frames, "metric")
        npt.assert_array_equal(seq.validity, [[[True, False], [False, True]]])
        assert seq.frames[0, 0, 1] == 0.0
        assert seq.frames[0, 1, 0] == 0.0

    def test_invalid_pixels_are_zeroed(self):
        seq = DepthSequence(
            np.full((1, 2, 2), 3.0), np.array([[[True, False], [True, True]]]), "metric"
        )
        assert seq.frames[0, 0, 1] == 0.0

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            DepthSequence.from_frames(np.ones((1, 2, 2)), "absolute")

    def test_rejects_negative_valid_pixel(self):
        with pytest.raises(ValueError):
            DepthSequence(np.full((1, 2, 2), -1.0), np.ones((1, 2, 2), bool), "metric")

    def test_frames_are_frozen(self):
        seq = DepthSequence.from_frames(np.ones((1, 2, 2)), "metric")
        with pytest.raises(ValueError):
            seq.frames[0, 0, 0] = 5.0


class TestSolveScaleShift:
    def test_exact_recovery(self):
        relative, metric = sequences_from_pair(2 * 48 * 64, 2.0, 0.5, (2, 48, 64))
        params = solve_scale_shift(relative, metric)
        assert abs(params.alpha - 2.0) / 2.0 < 1e-11
        assert abs(params.beta - 0.5) / 0.5 < 1e-11
        assert params.rms_residual < 1e-12
        assert params.sample_count == 2 * 48 * 64

    def test_identical_inputs_give_identity_transform(self):
        frames = np.linspace(1.0, 2.0, 96).reshape(1, 8, 12)
        relative = DepthSequence.from_frames(frames, "relative")
        metric = DepthSequence.from_frames(frames, "metric")
        params = solve_scale_shift(relative, metric)
        assert params.alpha == pytest.approx(1.0, abs=1e-12)
        assert params.beta == pytest.approx(0.0, abs=1e-12)

    def test_only_jointly_valid_pixels_count(self):
        relative, metric = sequences_from_pair(96, 2.0, 0.5, (1, 8, 12))
        # Corrupt half the metric pixels but flag them invalid: the fit
        # must not move.
        bad_validity = metric.validity.copy()
        bad_validity[0, :4] = False
        frames = metric.frames.copy()
        frames[0, :4] = 7.7
        corrupted = DepthSequence(frames, bad_validity, "metric")
        params = solve_scale_shift(relative, corrupted)
        assert params.sample_count == 48
        assert params.alpha == pytest.approx(2.0, rel=1e-9)

    def test_noisy_recovery_within_one_percent(self):
        relative, metric = sequences_from_pair(2 * 48 * 64, 2.0, 0.5, (2, 48, 64))
        inv_metric = 1.0 / metric.frames[metric.validity]
        for seed in range(20):
            rng = np.random.Generator(np.random.Philox(seed))
            noisy_inv = inv_metric * (1.0 + 0.01 * rng.standard_normal(inv_metric.size))
            noisy = DepthSequence.from_frames(
                (1.0 / noisy_inv).reshape(metric.frames.shape), "metric"
            )
            params = solve_scale_shift(relative, noisy)
            assert abs(params.alpha - 2.0) / 2.0 < 0.01

    def test_grid_search_confirms_global_optimum(self):
        relative, metric = sequences_from_pair(2 * 48 * 64, 2.0, 0.5, (2, 48, 64))
        rng = np.random.Generator(np.random.Philox(3))
        inv_metric = 1.0 / metric.frames[metric.validity]
        noisy_inv = inv_metric * (1.0 + 0.01 * rng.standard_normal(inv_metric.size))
        noisy = DepthSequence.from_frames(
            (1.0 / noisy_inv).reshape(metric.frames.shape), "metric"
        )
        params = solve_scale_shift(relative, noisy)

        x = 1.0 / relative.frames[relative.validity]
        y = 1.0 / noisy.frames[noisy.validity]
        alphas = np.linspace(1.5, 2.5, 200)
        betas = np.linspace(0.45, 0.55, 200)
        sse = sse_on_grid(x, y, alphas, betas)
        ia, ib = np.unravel_index(np.argmin(sse), sse.shape)

        # The solver's optimum must be at least as good as the best grid
        # cell and must land in (or at the boundary of) that cell.
        solver_sse = float(np.sum((y - (params.alpha * x + params.beta)) ** 2))
        assert solver_sse <= sse[ia, ib] + 1e-9 * abs(sse[ia, ib])
        assert abs(params.alpha - alphas[ia]) <= 1.5 * (alphas[1] - alphas[0])
        assert abs(params.beta - betas[ib]) <= 1.5 * (betas[1] - betas[0])

    def test_insufficient_samples(self):
        relative = DepthSequence(
            np.ones((1, 2, 2)), np.array([[[True, False], [False, False]]]), "relative"
        )
        metric = DepthSequence.from_frames(np.ones((1, 2, 2)) * 2.0, "metric")
        with pytest.raises(InsufficientSamples):
            solve_scale_shift(relative, metric)

    def test_constant_relative_depth_is_degenerate(self):
        relative = DepthSequence.from_frames(np.full((1, 4, 4), 3.0), "relative")
        metric = DepthSequence.from_frames(
            np.linspace(1.0, 2.0, 16).reshape(1, 4, 4), "metric"
        )
        with pytest.raises(DegenerateVariance):
            solve_scale_shift(relative, metric)

    def test_kind_ordering_enforced(self):
        a = DepthSequence.from_frames(np.linspace(1, 2, 16).reshape(1, 4, 4), "metric")
        b = DepthSequence.from_frames(np.linspace(1, 2, 16).reshape(1, 4, 4), "relative")
        with pytest.raises(ValueError):
            solve_scale_shift(a, b)

    def test_shape_mismatch(self):
        relative = DepthSequence.from_frames(np.ones((1, 4, 4)), "relative")
        metric = DepthSequence.from_frames(np.ones((1, 4, 5)), "metric")
        with pytest.raises(ShapeMismatch):
            solve_scale_shift(relative, metric)


class TestAlignmentParams:
    def test_rejects_tiny_sample_count(self):
        with pytest.raises(ValueError):
            AlignmentParams(alpha=1.0, beta=0.0, rms_residual=0.0, sample_count=1)

    def test_rejects_negative_residual(self):
        with pytest.raises(ValueError):
            AlignmentParams(alpha=1.0, beta=0.0, rms_residual=-0.1, sample_count=5)


class TestApplyAlignment:
    def test_aligned_matches_metric(self):
        relative, metric = sequences_from_pair(96, 2.0, 0.5, (1, 8, 12))
        params = solve_scale_shift(relative, metric)
        aligned = apply_alignment(relative, params)
        assert aligned.kind == "metric"
        npt.assert_allclose(
            aligned.frames[aligned.validity], metric.frames[metric.validity], rtol=1e-9
        )

    def test_nonpositive_aligned_depth_is_invalidated(self):
        relative = DepthSequence.from_frames(np.full((1, 2, 2), 4.0), "relative")
        # alpha/d + beta = 0.25 - 0.5 < 0 for every pixel
        params = AlignmentParams(alpha=1.0, beta=-0.5, rms_residual=0.0, sample_count=4)
        aligned = apply_alignment(relative, params)
        assert not aligned.validity.any()

    def test_invalid_input_pixels_stay_invalid(self):
        frames = np.ones((1, 2, 2))
        validity = np.array([[[True, True], [True, False]]])
        relative = DepthSequence(frames, validity, "relative")
        params = AlignmentParams(alpha=1.0, beta=0.0, rms_residual=0.0, sample_count=4)
        aligned = apply_alignment(relative, params)
        npt.assert_array_equal(aligned.validity, validity)


class TestDepthCentroid:
    def test_plane_centroid_sits_on_optical_axis(self):
        intr = Intrinsics(fx=50.0, fy=50.0, cx=15.5, cy=11.5, width=32, height=24)
        depth = np.full((24, 32), 2.0)
        centroid = depth_centroid(depth, intr, RigidPose.identity())
        npt.assert_allclose(centroid, [0.0, 0.0, 2.0], atol=1e-9)

    def test_validity_mask_shifts_centroid(self):
        intr = Intrinsics(fx=50.0, fy=50.0, cx=15.5, cy=11.5, width=32, height=24)
        depth = np.full((24, 32), 2.0)
        validity = np.zeros((24, 32), bool)
        validity[:, :16] = True  # left half only: mean x < 0
        centroid = depth_centroid(depth, intr, RigidPose.identity(), validity)
        assert centroid[0] < -0.1
        assert centroid[2] == pytest.approx(2.0, abs=1e-12)

    def test_all_invalid_raises(self):
        intr = Intrinsics(fx=50.0, fy=50.0, cx=15.5, cy=11.5, width=32, height=24)
        with pytest.raises(NoValidDepth):
            depth_centroid(np.zeros((24, 32)), intr, RigidPose.identity())
