"""Quality metrics: closed-form PSNR cases, SSIM identities, and
sequence-level aggregation."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from nvsforge.errors import FrameTooSmall, ShapeMismatch
from nvsforge.metrics import PSNR_CAP_DB, MetricReport, psnr, sequence_metrics, ssim


def gray(value, shape=(32, 32)):
    return np.full(shape, value, dtype=np.uint8)


class TestPsnr:
    def test_identical_frames_hit_the_cap(self):
        frame = np.arange(64, dtype=np.uint8).reshape(8, 8)
        assert psnr(frame, frame) == PSNR_CAP_DB

    def test_single_pixel_error_closed_form(self):
        # One full-range error among 64 pixels: 10*log10(64) dB.
        a = np.zeros((8, 8), dtype=np.uint8)
        b = a.copy()
        b[3, 4] = 255
        assert psnr(a, b) == pytest.approx(10.0 * math.log10(64.0), abs=1e-12)

    def test_full_range_error_is_zero_db(self):
        assert psnr(gray(0), gray(255)) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset_closed_form(self):
        assert psnr(gray(100), gray(101)) == pytest.approx(
            20.0 * math.log10(255.0), abs=1e-12
        )

    def test_color_frames_average_over_channels(self):
        a = np.zeros((8, 8, 3), dtype=np.uint8)
        b = a.copy()
        b[0, 0, 0] = 255  # one channel of one pixel: MSE = 255^2 / 192
        assert psnr(a, b) == pytest.approx(10.0 * math.log10(192.0), abs=1e-12)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            psnr(gray(0), gray(0, shape=(32, 33)))

    def test_rejects_bad_peak(self):
        with pytest.raises(ValueError):
            psnr(gray(0), gray(1), max_value=0.0)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 4, 4)), np.zeros((4, 4, 4, 4)))


class TestSsim:
    def test_identical_frames_score_one(self):
        rng = np.random.default_rng(5)
        frame = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        value = ssim(frame, frame)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_in_its_arguments(self):
        rng = np.random.default_rng(6)
        a = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        b = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_constant_frames_closed_form(self):
        # Variances vanish, so only the luminance term survives.
        p, q = 100.0, 120.0
        c1 = (0.01 * 255.0) ** 2
        expected = (2.0 * p * q + c1) / (p * p + q * q + c1)
        assert ssim(gray(100), gray(120)) == pytest.approx(expected, abs=1e-12)

    def test_noise_lowers_the_score(self):
        rng = np.random.default_rng(7)
        a = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        noisy = np.clip(
            a.astype(np.int32) + rng.integers(-40, 41, a.shape), 0, 255
        ).astype(np.uint8)
        assert 0.5 < ssim(a, noisy) < 0.98

    def test_color_reduces_to_channel_mean(self):
        rng = np.random.default_rng(8)
        a = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        b = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        direct = ssim(a, b)
        reduced = ssim(a.astype(np.float64).mean(axis=2), b.astype(np.float64).mean(axis=2))
        assert direct == pytest.approx(reduced, abs=1e-12)

    def test_rejects_frames_below_the_window(self):
        with pytest.raises(FrameTooSmall):
            ssim(gray(0, shape=(10, 32)), gray(0, shape=(10, 32)))

    def test_rejects_bad_dynamic_range(self):
        with pytest.raises(ValueError):
            ssim(gray(0), gray(0), dynamic_range=-1.0)


class TestMetricReport:
    def test_dict_round_trip(self):
        report = MetricReport(
            per_frame_psnr=(30.0, 40.0),
            per_frame_ssim=(0.9, 0.95),
            mean_psnr=35.0,
            mean_ssim=0.925,
            occluded_fraction_mean=0.1,
            occluded_fraction_variance=0.0,
        )
        d = report.to_dict()
        assert d["frame_count"] == 2
        assert d["per_frame_psnr"] == [30.0, 40.0]
        assert d["mean_ssim"] == 0.925
        assert d["occluded_fraction_mean"] == 0.1

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            MetricReport(
                per_frame_psnr=(30.0,),
                per_frame_ssim=(0.9, 0.95),
                mean_psnr=30.0,
                mean_ssim=0.925,
                occluded_fraction_mean=None,
                occluded_fraction_variance=None,
            )

    def test_rejects_empty_report(self):
        with pytest.raises(ValueError):
            MetricReport(
                per_frame_psnr=(),
                per_frame_ssim=(),
                mean_psnr=0.0,
                mean_ssim=0.0,
                occluded_fraction_mean=None,
                occluded_fraction_variance=None,
            )


class TestSequenceMetrics:
    def make_sequences(self):
        rng = np.random.default_rng(9)
        ref = rng.integers(0, 256, (3, 32, 32, 3), dtype=np.uint8)
        gen = ref.copy()
        gen[1] = np.clip(gen[1].astype(np.int32) + 5, 0, 255).astype(np.uint8)
        return gen, ref

    def test_per_frame_then_mean(self):
        gen, ref = self.make_sequences()
        report = sequence_metrics(gen, ref)
        assert report.frame_count == 3
        assert report.per_frame_psnr[0] == PSNR_CAP_DB
        assert report.per_frame_psnr[1] < PSNR_CAP_DB
        assert report.mean_psnr == pytest.approx(np.mean(report.per_frame_psnr), abs=1e-12)
        assert report.mean_ssim == pytest.approx(np.mean(report.per_frame_ssim), abs=1e-12)
        assert report.occluded_fraction_mean is None
        assert report.occluded_fraction_variance is None

    def test_occlusion_statistics_closed_form(self):
        gen, ref = self.make_sequences()
        masks = np.zeros((3, 32, 32), dtype=np.uint8)
        masks[1, :16, :16] = 1  # quarter
        masks[2, :16, :] = 1  # half
        report = sequence_metrics(gen, ref, masks=masks)
        assert report.occluded_fraction_mean == pytest.approx(0.25, abs=1e-15)
        assert report.occluded_fraction_variance == pytest.approx(1.0 / 24.0, abs=1e-15)

    def test_grayscale_sequences_supported(self):
        rng = np.random.default_rng(10)
        ref = rng.integers(0, 256, (2, 32, 32), dtype=np.uint8)
        report = sequence_metrics(ref, ref)
        assert report.mean_psnr == PSNR_CAP_DB
        assert report.mean_ssim == pytest.approx(1.0, abs=1e-12)

    def test_rejects_shape_mismatch(self):
        gen, ref = self.make_sequences()
        with pytest.raises(ShapeMismatch):
            sequence_metrics(gen[:, :16], ref)

    def test_rejects_bad_masks(self):
        gen, ref = self.make_sequences()
        with pytest.raises(ShapeMismatch):
            sequence_metrics(gen, ref, masks=np.zeros((3, 16, 32), np.uint8))
        with pytest.raises(ValueError):
            sequence_metrics(gen, ref, masks=np.full((3, 32, 32), 3, np.uint8))

    def test_rejects_empty_sequence(self):
        with pytest.raises(ValueError):
            sequence_metrics(
                np.zeros((0, 32, 32), np.uint8), np.zeros((0, 32, 32), np.uint8)
            )
