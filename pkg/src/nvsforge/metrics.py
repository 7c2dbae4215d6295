"""Reference image and sequence quality metrics.

PSNR and SSIM are computed per frame in float64 and averaged over the
sequence (per-frame-then-mean is the canonical order everywhere in this
package).  SSIM follows the standard Gaussian-weighted formulation:
11x11 window, sigma 1.5, k1 = 0.01, k2 = 0.03, color reduced to grayscale
by channel mean, statistics taken over the valid (fully windowed) region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FrameTooSmall, ShapeMismatch

__all__ = ["MetricReport", "psnr", "ssim", "sequence_metrics"]

# PSNR reported for identical inputs (MSE of zero).
PSNR_CAP_DB = 99.0


def _as_float_frame(frame, name: str) -> np.ndarray:
    arr = np.asarray(frame)
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr.astype(np.float64)
    if arr.ndim == 2:
        return arr.astype(np.float64)
    raise ValueError(f"{name} must be (H, W) or (H, W, 3), got {arr.shape}")


def psnr(frame_a, frame_b, max_value: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99.0 for identical inputs."""
    a = _as_float_frame(frame_a, "frame_a")
    b = _as_float_frame(frame_b, "frame_b")
    if a.shape != b.shape:
        raise ShapeMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")
    if max_value <= 0 or not math.isfinite(max_value):
        raise ValueError("max_value must be positive and finite")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(max_value * max_value / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _local_mean(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    # Separable valid-mode correlation; the window is symmetric.
    out = sliding_window_view(img, window.size, axis=0) @ window
    return sliding_window_view(out, window.size, axis=1) @ window


def ssim(
    frame_a,
    frame_b,
    window_size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    dynamic_range: float = 255.0,
) -> float:
    """Mean structural similarity between two frames.

    Color frames are reduced to grayscale by channel mean.  Pass
    ``dynamic_range=1.0`` for content normalized to [0, 1].

    Raises:
        FrameTooSmall: either frame dimension is below the window size.
    """
    a = _as_float_frame(frame_a, "frame_a")
    b = _as_float_frame(frame_b, "frame_b")
    if a.shape != b.shape:
        raise ShapeMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a = a.mean(axis=2)
        b = b.mean(axis=2)
    if min(a.shape) < window_size:
        raise FrameTooSmall(f"frame {a.shape} is smaller than the {window_size}px window")
    if dynamic_range <= 0 or not math.isfinite(dynamic_range):
        raise ValueError("dynamic_range must be positive and finite")

    win = _gaussian_window(window_size, sigma)
    mu_a = _local_mean(a, win)
    mu_b = _local_mean(b, win)
    var_a = _local_mean(a * a, win) - mu_a * mu_a
    var_b = _local_mean(b * b, win) - mu_b * mu_b
    cov = _local_mean(a * b, win) - mu_a * mu_b

    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    ssim_map = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


@dataclass(frozen=True)
class MetricReport:
    """Per-frame and aggregate quality numbers for one sequence."""

    per_frame_psnr: tuple[float, ...]
    per_frame_ssim: tuple[float, ...]
    mean_psnr: float
    mean_ssim: float
    occluded_fraction_mean: float | None  # None when no masks were given
    occluded_fraction_variance: float | None  # population variance

    def __post_init__(self) -> None:
        if len(self.per_frame_psnr) != len(self.per_frame_ssim):
            raise ValueError("per-frame metric lengths differ")
        if len(self.per_frame_psnr) < 1:
            raise ValueError("report needs at least one frame")
        object.__setattr__(self, "per_frame_psnr", tuple(float(x) for x in self.per_frame_psnr))
        object.__setattr__(self, "per_frame_ssim", tuple(float(x) for x in self.per_frame_ssim))

    @property
    def frame_count(self) -> int:
        return len(self.per_frame_psnr)

    def to_dict(self) -> dict:
        return {
            "frame_count": self.frame_count,
            "per_frame_psnr": list(self.per_frame_psnr),
            "per_frame_ssim": list(self.per_frame_ssim),
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "occluded_fraction_mean": self.occluded_fraction_mean,
            "occluded_fraction_variance": self.occluded_fraction_variance,
        }


def sequence_metrics(generated, reference, masks=None, dynamic_range: float = 255.0) -> MetricReport:
    """Score a generated sequence against its reference, frame by frame.

    ``masks`` (optional, (T, H, W) of {0, 1}) only feeds the occluded
    fraction statistics; metrics are always computed over full frames.

    Raises:
        ShapeMismatch: sequences (or masks) disagree in shape.
    """
    gen = np.asarray(generated)
    ref = np.asarray(reference)
    if gen.shape != ref.shape:
        raise ShapeMismatch(f"sequence shapes differ: {gen.shape} vs {ref.shape}")
    if gen.ndim not in (3, 4) or gen.shape[0] < 1:
        raise ValueError("sequences must be (T, H, W) or (T, H, W, 3) with T >= 1")

    psnr_values = []
    ssim_values = []
    for t in range(gen.shape[0]):
        psnr_values.append(psnr(gen[t], ref[t], max_value=dynamic_range))
        ssim_values.append(ssim(gen[t], ref[t], dynamic_range=dynamic_range))

    occ_mean = None
    occ_var = None
    if masks is not None:
        m = np.asarray(masks)
        if m.shape != gen.shape[:3]:
            raise ShapeMismatch(f"masks shape {m.shape} != sequence shape {gen.shape[:3]}")
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("mask values must be 0 or 1")
        fractions = m.reshape(m.shape[0], -1).mean(axis=1)
        occ_mean = float(fractions.mean())
        occ_var = float(fractions.var())  # population variance

    return MetricReport(
        per_frame_psnr=tuple(psnr_values),
        per_frame_ssim=tuple(ssim_values),
        mean_psnr=float(np.mean(psnr_values)),
        mean_ssim=float(np.mean(ssim_values)),
        occluded_fraction_mean=occ_mean,
        occluded_fraction_variance=occ_var,
    )
