"""Kernel constructors: Gaussian, scale-normalized derivative, and the ring.

The ring filter is the difference of two unnormalized Gaussians whose sigmas
differ by the factor k (0.999 by default). Because the two are so close, the
filter is assembled as two separate separable smoothings whose results are
subtracted, never as a single difference kernel per axis; the separable
product of differences would not equal the difference of products.
"""

import math
from dataclasses import dataclass

import numpy as np

from .grid import Kernel1D, convolve_separable, validate_field
from .scalecalc import DEFAULT_K


def _exact_sum(taps: np.ndarray, target: float) -> np.ndarray:
    # absorb the rounding residual into the center tap until the float sum
    # lands on the target exactly; converges in one or two passes
    r = taps.size // 2
    for _ in range(8):
        err = taps.sum() - target
        if err == 0.0:
            break
        taps[r] -= err
    return taps


def gaussian_kernel(sigma: float) -> Kernel1D:
    """Unit-sum Gaussian taps at integer offsets, radius ceil(4*sigma)."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(4.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return Kernel1D(_exact_sum(taps, 1.0))


def gaussian_derivative_kernel(sigma: float, gamma: float) -> Kernel1D:
    """First-derivative Gaussian taps scaled by sigma^gamma, radius ceil(4*sigma).

    The taps sample d/dx of the normalized Gaussian; the mean is removed so
    the sum is exactly zero and constant fields produce exactly zero response
    despite truncation.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    r = int(math.ceil(4.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))
    taps = (-x / (sigma * sigma)) * g * sigma ** gamma
    # the truncated sample is exactly antisymmetric, so its exact mean is
    # zero; computing it with fsum (not pairwise) keeps the removal from
    # injecting rounding dust that would break the antisymmetry
    taps -= math.fsum(taps) / taps.size
    return Kernel1D(taps)


@dataclass(frozen=True)
class RingSpec:
    """Ring filter geometry: outer Gaussian sigma_r, inner sigma_r * k."""

    sigma_r: float
    k: float = DEFAULT_K

    def __post_init__(self):
        if self.sigma_r <= 0.0:
            raise ValueError(f"sigma_r must be positive, got {self.sigma_r}")
        if not 0.0 < self.k < 1.0:
            raise ValueError(f"k must be in (0, 1), got {self.k}")

    def kernels(self) -> tuple:
        """Unnormalized (outer, inner) 1D taps on the shared outer radius."""
        r = int(math.ceil(4.0 * self.sigma_r))
        x = np.arange(-r, r + 1, dtype=np.float64)
        s_out = self.sigma_r
        s_in = self.sigma_r * self.k
        outer = np.exp(-(x * x) / (2.0 * s_out * s_out))
        inner = np.exp(-(x * x) / (2.0 * s_in * s_in))
        return Kernel1D(outer), Kernel1D(inner)

    def normalization(self, ndim: int) -> float:
        """Unit-sum divisor Z for an ndim-dimensional application.

        Equals the sum of the effective N-D kernel: product of outer 1D tap
        sums minus product of inner 1D tap sums. Positive because k < 1 makes
        every inner tap strictly smaller off center.
        """
        outer, inner = self.kernels()
        return float(outer.taps.sum() ** ndim - inner.taps.sum() ** ndim)


def apply_ring(field, spec: RingSpec) -> np.ndarray:
    """Ring-integrate a field: (outer smoothing - inner smoothing) / Z.

    The effective N-D kernel is nonnegative, exactly zero at the center
    sample, peaks near radius ring_peak_radius(sigma_r, k), and sums to one,
    so constants pass through unchanged and the center of a feature does not
    feed its own tensor.
    """
    arr = validate_field(field, min_rank=1)
    outer, inner = spec.kernels()
    z = spec.normalization(arr.ndim)
    smoothed_out = convolve_separable(arr, [outer] * arr.ndim)
    smoothed_in = convolve_separable(arr, [inner] * arr.ndim)
    return (smoothed_out - smoothed_in) / z
