"""Acceptance checks: one test per shipping criterion, each with a wall
budget and a visible PASS/FAIL line carrying the measured numbers.

These run the library end to end on synthetic fixtures; per-module behavior
lives in the other test files. Budgets are generous so a loaded CI box does
not flap, but every numeric tolerance is the contractual one.
"""

import time

import numpy as np
import pytest

import tensorscale as ts
from tensorscale.tensor import (TensorField, eigendecompose, measures_2d,
                                measures_3d, tensor_pairs)

import conftest
import reference


def _report(label: str, ok: bool, detail: str) -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------

def test_c01_optimal_ratio_for_default_exponent():
    ts.gamma_to_t(1.2)  # warm up
    t, elapsed = _timed(lambda: ts.gamma_to_t(1.2))
    ok = abs(t - 0.372) <= 1e-3 and elapsed < 1e-3
    _report("analytic filter/feature ratio", ok,
            f"t(1.2)={t:.6f}, {elapsed * 1e6:.0f} us")


# 2 ---------------------------------------------------------------------

def test_c02_grid_search_matches_analytic_ratio():
    x_f = 100.0
    sigmas = np.arange(20.0, 60.0, 1e-3)

    def search():
        worst = 0.0
        for gamma in (1.1, 1.2, 1.3, 1.5):
            responses = ts.rect_response(x_f, sigmas, gamma)
            argmax = sigmas[int(np.argmax(responses))]
            want = ts.gamma_to_t(gamma) * x_f
            worst = max(worst, abs(argmax - want) / want)
        return worst

    worst, elapsed = _timed(search)
    ok = worst <= 0.002 and elapsed < 1.0
    _report("grid search vs analytic ratio", ok,
            f"worst rel dev {worst * 100:.4f}%, {elapsed:.2f}s")


# 3 ---------------------------------------------------------------------

def test_c03_ring_geometry_constants():
    def geometry():
        radius = ts.ring_peak_radius(1.0, 0.999)
        ratio = ts.sigma_r_from_scale(1.0, 0.999, ts.gamma_to_t(1.2))
        return radius, ratio

    geometry()  # warm up
    (radius, ratio), elapsed = _timed(geometry)
    ok = (abs(radius - 1.414) <= 1e-3 and abs(ratio - 0.95) <= 5e-3
          and elapsed < 1e-3)
    _report("ring geometry constants", ok,
            f"peak radius {radius:.5f}, sigma_R/sigma* {ratio:.5f}, "
            f"{elapsed * 1e6:.0f} us")


# 4 ---------------------------------------------------------------------

def test_c04_lambert_branch_accuracy():
    x = -np.logspace(np.log10(1.0 / np.e), -12.0, 1000)
    ts.lambert_w_m1(x)  # warm up
    w, elapsed = _timed(lambda: ts.lambert_w_m1(x))
    residual = float(np.abs(w * np.exp(w) - x).max())
    branch = ts.lambert_w_m1(-1.0 / np.e)
    ok = residual < 1e-12 and branch == -1.0 and elapsed < 10e-3
    _report("Lambert W branch", ok,
            f"max residual {residual:.2e}, W(-1/e)={branch}, "
            f"{elapsed * 1e3:.2f} ms")


# 5 ---------------------------------------------------------------------

def _skeleton_center(phantom, label):
    points = np.argwhere(phantom.skeleton & (phantom.labels == label))
    return tuple(np.round(points.mean(axis=0)).astype(int))


def test_c05_scene_scale_gap_and_corrected_widths():
    def analyze():
        scene = ts.three_feature_scene(width=20.0, shape=(256, 256))
        result = ts.sweep(scene.field, ts.ScaleGrid.linear(1.0, 14.0, 0.25))
        centers = {label: _skeleton_center(scene, label) for label in (1, 2, 3)}
        ratio = result.scale[centers[1]] / result.scale[centers[2]]
        widths = {label: float(result.width[c]) for label, c in centers.items()}
        return ratio, widths

    (ratio, widths), elapsed = _timed(analyze)
    ok = (abs(ratio - 2.0 / 3.0) <= 0.10
          and all(abs(w - 20.0) <= 2.0 for w in widths.values())
          and elapsed < 60.0)
    _report("isotropic/anisotropic scale gap", ok,
            f"S_disk/S_line={ratio:.4f}, widths disk/line/ellipse "
            f"{widths[1]:.2f}/{widths[2]:.2f}/{widths[3]:.2f} px, "
            f"{elapsed:.1f}s")


# 6 ---------------------------------------------------------------------

def test_c06_line_overshoot_calibration():
    result, elapsed = _timed(
        lambda: ts.calibrate_anis_ratio((10.0, 20.0, 30.0, 40.0)))
    spread = float(np.std(result.ratios))
    ok = (abs(result.mean_ratio - 1.0675) <= 0.01
          and spread < 0.01 * result.mean_ratio
          and elapsed < 300.0)
    _report("line overshoot calibration", ok,
            f"mean {result.mean_ratio:.5f}, std {spread:.5f}, {elapsed:.1f}s")


# 7 ---------------------------------------------------------------------

def test_c07_banded_lines_under_streaky_noise():
    def analyze():
        spec = ts.PhantomSpec(ts.PhantomKind.INCREASING_LINES_2D, width=4.0,
                              shape=(256, 288), width_max=24.0, bands=6)
        phantom = ts.generate(spec)
        noisy = ts.add_noise(phantom.field, ts.NoiseKind.ANISOTROPIC, 0.25,
                             axis=0, smoothing_sigma=2.0, seed=0)
        bands = sorted(b for b in np.unique(phantom.labels) if b > 0)

        def band_means(anisotropy):
            return np.array([
                anisotropy[phantom.skeleton & (phantom.labels == b)].mean()
                for b in bands])

        swept = band_means(
            ts.sweep(noisy, ts.ScaleGrid.linear(1.0, 12.0, 0.5))
            .measures.anisotropy)
        # even the most favorable fixed scale must lose a band badly
        dips = []
        for sigma in (2.0, 6.0, 12.0):
            single = ts.single_scale_analyze(noisy, sigma, rho=2.0 * sigma)
            dips.append((swept - band_means(single.measures.anisotropy)).max())
        return float(swept.min()), float(min(dips))

    (sweep_floor, best_single_dip), elapsed = _timed(analyze)
    ok = sweep_floor >= 0.9 and best_single_dip >= 0.1 and elapsed < 300.0
    _report("banded lines under streaky noise", ok,
            f"sweep band-A floor {sweep_floor:.3f}, best fixed-scale dip "
            f"{best_single_dip:.3f}, {elapsed:.1f}s")


# 8 ---------------------------------------------------------------------

def _axial_mean_degrees(a, b, mask):
    dot = np.clip(np.abs((a * b).sum(axis=0)), 0.0, 1.0)
    return float(np.degrees(np.arccos(dot))[mask].mean())


def _upsample_vectors(vectors):
    out = vectors
    for axis in (1, 2, 3):
        out = np.repeat(out, 2, axis=axis)
    return out


def test_c08_resolution_invariance_of_orientation():
    def analyze():
        shape = (96, 96, 96)
        zz, yy, xx = np.indices(shape, dtype=np.float64)
        mask = np.zeros(shape, dtype=bool)
        # two diameters, two directions, disjoint placements
        mask |= (yy - 32) ** 2 + (xx - 24) ** 2 < 36.0   # d=12 along z
        mask |= (yy - 64) ** 2 + (xx - 72) ** 2 < 36.0
        mask |= (zz - 32) ** 2 + (xx - 48) ** 2 < 9.0    # d=6 along y
        mask |= (zz - 64) ** 2 + (xx - 48) ** 2 < 9.0
        volume = np.where(mask, 1.0, 0.0)

        noisy = ts.add_noise(volume, ts.NoiseKind.IID, 0.05, seed=0)
        half = ts.downscale2(noisy)
        grid = ts.ScaleGrid.geometric(1.0, 8.0, 2.0 ** 0.25)

        full_sweep = ts.sweep(noisy, grid, threads=4)
        half_sweep = ts.sweep(half, grid, threads=4)
        d_ss = _axial_mean_degrees(full_sweep.orientation,
                                   _upsample_vectors(half_sweep.orientation),
                                   mask)

        full_single = ts.single_scale_analyze(noisy, 6.0, rho=12.0)
        half_single = ts.single_scale_analyze(half, 6.0, rho=12.0)
        d_single = _axial_mean_degrees(full_single.orientation,
                                       _upsample_vectors(half_single.orientation),
                                       mask)
        return d_ss, d_single

    (d_ss, d_single), elapsed = _timed(analyze)
    ok = d_ss < d_single and d_ss < 0.5 * d_single and elapsed < 1200.0
    _report("orientation stability across resolution", ok,
            f"swept {d_ss:.3f} deg vs fixed-scale {d_single:.3f} deg, "
            f"{elapsed:.1f}s")


# 9 ---------------------------------------------------------------------

def test_c09_shape_correction_equalizes_widths():
    def analyze():
        grid = ts.ScaleGrid.linear(1.5, 6.5, 0.125)
        widths = []
        for kind in (ts.PhantomKind.SPHERE_3D, ts.PhantomKind.CYLINDER_3D,
                     ts.PhantomKind.SLAB_3D):
            phantom = ts.generate(
                ts.PhantomSpec(kind, width=12.0, shape=(64, 64, 64)))
            result = ts.sweep(phantom.field, grid, threads=4)
            center = tuple(n // 2 for n in phantom.field.shape)
            widths.append(float(result.width[center]))
        return widths

    widths, elapsed = _timed(analyze)
    worst = max(a / b for a in widths for b in widths)
    ok = worst <= 1.15 and elapsed < 600.0
    _report("3D shape correction", ok,
            f"center widths sphere/cylinder/slab {widths[0]:.2f}/"
            f"{widths[1]:.2f}/{widths[2]:.2f} px, worst pair x{worst:.4f}, "
            f"{elapsed:.1f}s")


# 10 --------------------------------------------------------------------

def _diag_tensor_3d(values, shape=(4, 4, 4)):
    channels = np.zeros((6,) + shape)
    for axis, value in enumerate(values):
        channels[tensor_pairs(3).index((axis, axis))] = value
    return TensorField(channels)


def test_c10_measure_identities_on_random_tensors():
    def identities():
        rng = np.random.default_rng(42)
        basis = rng.normal(size=(3, 3, 10, 10, 100))
        matrices = np.einsum("ik...,jk...->ij...", basis, basis)
        channels = np.stack([matrices[i, j]
                             for i, j in tensor_pairs(3)])
        shape = measures_3d(eigendecompose(TensorField(channels)))
        partition = shape.linearity + shape.planarity + shape.sphericity
        partition_err = float(np.abs(partition - 1.0).max())

        fa_iso = measures_3d(eigendecompose(
            _diag_tensor_3d((2.5, 2.5, 2.5)))).fa.max()
        fa_stick = measures_3d(eigendecompose(
            _diag_tensor_3d((0.0, 0.0, 1.0)))).fa.max()

        planar_2d = np.zeros((3, 4, 4))
        planar_2d[2] = 3.0  # eigenvalues (0, 3)
        a_edge = measures_2d(eigendecompose(TensorField(planar_2d))).anisotropy
        return partition_err, float(fa_iso), float(fa_stick), float(a_edge.max())

    (partition_err, fa_iso, fa_stick, a_edge), elapsed = _timed(identities)
    ok = (partition_err <= 1e-9 and abs(fa_iso) <= 1e-12
          and abs(fa_stick - 1.0) <= 1e-12 and abs(a_edge - 1.0) <= 1e-12
          and elapsed < 1.0)
    _report("tensor measure identities", ok,
            f"partition err {partition_err:.1e}, FA(iso)={fa_iso:.1e}, "
            f"FA(stick)={fa_stick}, A(edge)={a_edge}, {elapsed:.2f}s")


# 11 --------------------------------------------------------------------

def test_c11_convolution_equals_dense_oracle():
    def compare():
        rng = np.random.default_rng(17)
        worst = 0.0
        for shape in ((16, 13), (7, 16), (12, 9, 16), (16, 16, 16)):
            field = rng.normal(size=shape)
            tap_lists = [rng.normal(size=int(rng.choice((3, 5, 7))))
                         for _ in shape]
            got = ts.convolve_separable(
                field, [ts.Kernel1D(t) for t in tap_lists])
            want = reference.correlate_dense_mirror(
                field, reference.outer_kernel(tap_lists))
            worst = max(worst,
                        float(np.abs(got - want).max() / np.abs(want).max()))

        for shape, spec in (((16, 16), ts.RingSpec(1.5, k=0.9)),
                            ((9, 9, 9), ts.RingSpec(1.0, k=0.8))):
            field = rng.normal(size=shape)
            outer, inner = spec.kernels()
            dense = (reference.outer_kernel([outer.taps] * len(shape))
                     - reference.outer_kernel([inner.taps] * len(shape)))
            dense /= spec.normalization(len(shape))
            got = ts.apply_ring(field, spec)
            want = reference.correlate_dense_mirror(field, dense)
            worst = max(worst,
                        float(np.abs(got - want).max() / np.abs(want).max()))
        return worst

    worst, elapsed = _timed(compare)
    ok = worst <= 1e-9 and elapsed < 30.0
    _report("separable and ring vs dense oracle", ok,
            f"worst rel dev {worst:.2e}, {elapsed:.1f}s")


# 12 --------------------------------------------------------------------

def test_c12_scale_histogram_advice():
    def advise(scale_values, grid):
        hist = ts.scale_histogram(np.asarray(scale_values, dtype=float),
                                  bins=16,
                                  span=(grid.sigmas[0], grid.sigmas[-1]))
        return ts.range_advice(hist, grid).value

    def contract():
        low_grid = ts.ScaleGrid.linear(1.0, 14.0, 1.0)
        high_grid = ts.ScaleGrid.linear(5.0, 20.0, 1.0)
        rng = np.random.default_rng(3)
        interior = rng.uniform(6.0, 9.0, size=(64, 64))
        saturated = np.full((64, 64), 14.0)
        floored = np.where(rng.random((64, 64)) < 0.6, 1.0,
                           rng.uniform(4.0, 9.0, size=(64, 64)))
        floored_high = np.where(rng.random((64, 64)) < 0.6, 5.0,
                                rng.uniform(10.0, 18.0, size=(64, 64)))
        return (advise(saturated, low_grid), advise(floored, low_grid),
                advise(floored_high, high_grid), advise(interior, low_grid))

    got, elapsed = _timed(contract)
    want = ("EXPAND_HIGH", "NOISE_WARNING", "EXPAND_LOW", "OK")
    ok = got == want and elapsed < 1.0
    _report("scale histogram advice", ok, f"{got}, {elapsed:.2f}s")


# 13 --------------------------------------------------------------------

def test_c13_analyze_is_deterministic(tmp_path):
    from tensorscale.cli import main
    from tensorscale.fieldio import write_field

    phantom = ts.generate(ts.PhantomSpec(ts.PhantomKind.DISK_2D, width=10.0,
                                         shape=(64, 64)))
    noisy = ts.add_noise(phantom.field, ts.NoiseKind.IID, 0.05, seed=1)
    write_field(tmp_path / "field", noisy)

    def analyze(outdir):
        argv = ["analyze", "--input", str(tmp_path / "field.f32"),
                "--outdir", str(outdir), "--sigma-min", "1",
                "--sigma-max", "6", "--bins", "8"]
        code, elapsed = _timed(lambda: main(argv))
        assert code == 0
        return elapsed

    t_first = analyze(tmp_path / "a")
    t_second = analyze(tmp_path / "b")

    t0 = time.perf_counter()
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    identical = (names == sorted(p.name for p in (tmp_path / "b").iterdir())
                 and all((tmp_path / "a" / n).read_bytes()
                         == (tmp_path / "b" / n).read_bytes() for n in names))
    t_compare = time.perf_counter() - t0

    total = t_first + t_second + t_compare
    ok = identical and total < 2.0 * max(t_first, t_second) + 1.0
    _report("analyze determinism", ok,
            f"{len(names)} files byte-identical={identical}, runs "
            f"{t_first:.2f}s+{t_second:.2f}s, compare {t_compare * 1e3:.0f}ms")
