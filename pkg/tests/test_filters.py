import math

import numpy as np
import pytest

from tensorscale.filters import (RingSpec, apply_ring,
                                 gaussian_derivative_kernel, gaussian_kernel)
from tensorscale.grid import convolve_axis
from tensorscale.scalecalc import ring_peak_radius

import reference


# ---------------------------------------------------------------- gaussian


def test_gaussian_unit_sum_exact():
    for sigma in (0.7, 1.0, 2.0, 3.7, 11.0):
        taps = gaussian_kernel(sigma).taps
        assert math.fsum(taps) == 1.0
        assert taps.sum() == 1.0


def test_gaussian_symmetric():
    taps = gaussian_kernel(2.3).taps
    np.testing.assert_array_equal(taps, taps[::-1])


def test_gaussian_radius():
    assert gaussian_kernel(1.0).radius == 4
    assert gaussian_kernel(2.5).radius == 10


def test_gaussian_tap_variance():
    taps = gaussian_kernel(2.0).taps
    x = np.arange(-(taps.size // 2), taps.size // 2 + 1)
    var = float((taps * x * x).sum())
    assert abs(var - 4.0) < 0.04


def test_gaussian_domain():
    with pytest.raises(ValueError):
        gaussian_kernel(0.0)
    with pytest.raises(ValueError):
        gaussian_kernel(-1.0)


# ---------------------------------------------------------------- derivative


def test_derivative_sum_exactly_zero():
    for sigma in (1.0, 1.3, 2.0, 3.7, 5.0, 11.0):
        taps = gaussian_derivative_kernel(sigma, 1.2).taps
        assert math.fsum(taps) == 0.0
        np.testing.assert_array_equal(taps, -taps[::-1])


def test_derivative_constant_response_exactly_zero():
    field = np.full((5, 40), 7.5)
    out = convolve_axis(field, gaussian_derivative_kernel(2.0, 1.2), axis=1)
    np.testing.assert_array_equal(out, np.zeros_like(field))


def test_derivative_domain():
    with pytest.raises(ValueError):
        gaussian_derivative_kernel(0.0, 1.2)
    with pytest.raises(ValueError):
        gaussian_derivative_kernel(1.0, 0.9)


def test_step_response_peak():
    """The continuum peak is sigma^(gamma-1)/sqrt(2*pi); on the integer grid
    the Riemann sum undershoots at sigma = 1 (by about 9%) and converges from
    below as sigma grows."""
    step = np.zeros(256)
    step[128:] = 1.0
    resp = convolve_axis(step, gaussian_derivative_kernel(1.0, 1.2), axis=0)
    peak = float(np.abs(resp).max())
    edge = int(np.argmax(np.abs(resp)))
    assert abs(peak - 0.3989) < 0.04
    assert edge in (127, 128)

    resp6 = convolve_axis(step, gaussian_derivative_kernel(6.0, 1.2), axis=0)
    cont = 6.0 ** 0.2 / math.sqrt(2.0 * math.pi)
    assert abs(float(np.abs(resp6).max()) - cont) < 0.005 * cont


def test_rectangle_discrete_scale_argmax():
    prof = np.zeros(128)
    prof[54:74] = 1.0  # width 20
    peaks = {s: float(np.abs(convolve_axis(
        prof, gaussian_derivative_kernel(float(s), 1.2), 0)).max())
        for s in range(1, 16)}
    assert max(peaks, key=peaks.get) in (7, 8)


def test_normalization_law_between_scales():
    step = np.zeros(256)
    step[128:] = 1.0
    peaks = {}
    for s in (2.0, 4.0, 8.0):
        resp = convolve_axis(step, gaussian_derivative_kernel(s, 1.2), axis=0)
        peaks[s] = float(np.abs(resp).max())
    assert abs(peaks[4.0] / peaks[2.0] - 2.0 ** 0.2) < 0.02 * 2.0 ** 0.2
    assert abs(peaks[8.0] / peaks[4.0] - 2.0 ** 0.2) < 0.02 * 2.0 ** 0.2


# ---------------------------------------------------------------- ring


def test_ring_spec_validation():
    RingSpec(2.0)
    with pytest.raises(ValueError):
        RingSpec(0.0)
    with pytest.raises(ValueError):
        RingSpec(2.0, k=1.0)
    with pytest.raises(ValueError):
        RingSpec(2.0, k=0.0)


def test_ring_normalization_is_sum_difference():
    spec = RingSpec(2.5, k=0.9)
    outer, inner = spec.kernels()
    for nd in (1, 2, 3):
        z = spec.normalization(nd)
        assert z > 0.0
        want = outer.taps.sum() ** nd - inner.taps.sum() ** nd
        assert z == pytest.approx(want, rel=1e-15)


def test_ring_kernel_nonnegative_and_zero_center():
    for sigma_r, k in ((1.0, 0.999), (2.5, 0.9), (4.0, 0.5)):
        spec = RingSpec(sigma_r, k=k)
        outer, inner = spec.kernels()
        dense = (np.multiply.outer(outer.taps, outer.taps)
                 - np.multiply.outer(inner.taps, inner.taps))
        assert dense.min() >= -1e-15
        r = outer.radius
        assert dense[r, r] == 0.0


def test_ring_constant_passthrough():
    field = np.full((24, 30), 4.5)
    out = apply_ring(field, RingSpec(2.0))
    np.testing.assert_allclose(out, field, rtol=1e-12)


def test_ring_impulse_imprint():
    n = 41
    field = np.zeros((n, n))
    field[n // 2, n // 2] = 1.0
    out = apply_ring(field, RingSpec(3.0))
    assert out[n // 2, n // 2] == 0.0
    assert np.array_equal(out, out.T)
    assert np.array_equal(out, np.rot90(out))
    i, j = np.unravel_index(np.argmax(out), out.shape)
    dist = math.hypot(i - n // 2, j - n // 2)
    assert abs(dist - ring_peak_radius(3.0, 0.999)) < 0.75


def test_ring_matches_dense_kernel_oracle():
    rng = np.random.default_rng(5)
    field = rng.normal(size=(16, 16))
    spec = RingSpec(1.5, k=0.9)
    outer, inner = spec.kernels()
    dense = (np.multiply.outer(outer.taps, outer.taps)
             - np.multiply.outer(inner.taps, inner.taps))
    dense /= spec.normalization(2)
    got = apply_ring(field, spec)
    want = reference.correlate_dense_mirror(field, dense)
    scale = np.abs(want).max()
    np.testing.assert_allclose(got, want, atol=1e-9 * scale)


def test_ring_3d_constant_and_oracle():
    field = np.full((10, 10, 10), 2.0)
    np.testing.assert_allclose(apply_ring(field, RingSpec(1.2)), field,
                               rtol=1e-12)
    rng = np.random.default_rng(9)
    field = rng.normal(size=(9, 9, 9))
    spec = RingSpec(1.0, k=0.8)
    outer, inner = spec.kernels()
    dense = (reference.outer_kernel([outer.taps] * 3)
             - reference.outer_kernel([inner.taps] * 3))
    dense /= spec.normalization(3)
    got = apply_ring(field, spec)
    want = reference.correlate_dense_mirror(field, dense)
    np.testing.assert_allclose(got, want, atol=1e-9 * np.abs(want).max())


def test_ring_disk_rotation_equivariance():
    # separable application sums per axis in sequence, so 90-degree rotation
    # agrees to summation-order rounding, not bitwise
    n = 33
    yy, xx = np.mgrid[0:n, 0:n] - n // 2
    disk = (yy * yy + xx * xx <= 64).astype(float)
    out = apply_ring(disk, RingSpec(2.5))
    np.testing.assert_allclose(out, np.rot90(out), atol=1e-12)
