"""Per-pixel scale selection and everything downstream of it.

The sweep evaluates the ring-integrated structure tensor at every scale of a
grid and keeps, per pixel, the scale with the largest tensor trace (ties go
to the smaller scale, biasing toward less smoothing). Only the running best
(trace, scale, tensor channels) is stored, so memory is independent of grid
length. The winning tensors are then eigendecomposed once, measured, and the
scale map is corrected for the known selection bias: scales on elongated
features overshoot by a constant factor (1.0675 at the default settings) and
scales on isotropic blobs undershoot by the gamma-dependent factor
gamma/(3-gamma).
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .filters import RingSpec
from .grid import validate_field
from .scalecalc import (DEFAULT_GAMMA, DEFAULT_K, GammaParams,
                        calibrate_anis_ratio, default_params,
                        sigma_r_from_scale)
from .tensor import (MeasureField, TensorField, classic_structure_tensor,
                     eigendecompose, measures, orientation, structure_tensor)

logger = logging.getLogger(__name__)

# reference 2D overshoot ratio on line features at (gamma=1.2, k=0.999)
DEFAULT_ANIS_RATIO = 1.0675
# 3D correction denominator: c0 * (1 + c_s*m_s) * (1 + c_p*m_p) * (1 + c_l*m_l)
DEFAULT_CORRECTION_3D = (0.53, 0.0158, 1.0, 0.327)


class Spacing(enum.Enum):
    LINEAR = "linear"
    GEOMETRIC = "geometric"


@dataclass(frozen=True)
class ScaleGrid:
    """Ascending positive sigmas plus the spacing they were built with.

    Normal use provides at least two scales; a single-scale grid is accepted
    and degenerates the sweep into single-scale analysis.
    """

    sigmas: tuple
    spacing: Spacing = Spacing.LINEAR

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigmas)
        if len(sigmas) < 1:
            raise ValueError("scale grid is empty")
        if any(s <= 0.0 for s in sigmas):
            raise ValueError(f"scales must be positive, got {sigmas}")
        if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
            raise ValueError(f"scales must be strictly increasing, got {sigmas}")
        if not isinstance(self.spacing, Spacing):
            raise ValueError(f"unknown spacing: {self.spacing!r}")
        object.__setattr__(self, "sigmas", sigmas)

    @classmethod
    def linear(cls, lo: float, hi: float, step: float = 1.0) -> "ScaleGrid":
        if lo <= 0.0 or hi < lo or step <= 0.0:
            raise ValueError(f"invalid linear grid: lo={lo}, hi={hi}, step={step}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return cls(tuple(lo + i * step for i in range(n)), Spacing.LINEAR)

    @classmethod
    def geometric(cls, lo: float, hi: float, ratio: float = 2.0 ** 0.25) -> "ScaleGrid":
        if lo <= 0.0 or hi < lo or ratio <= 1.0:
            raise ValueError(f"invalid geometric grid: lo={lo}, hi={hi}, ratio={ratio}")
        sigmas = [lo]
        while sigmas[-1] * ratio <= hi * (1.0 + 1e-9):
            sigmas.append(sigmas[-1] * ratio)
        return cls(tuple(sigmas), Spacing.GEOMETRIC)


@dataclass(frozen=True)
class ScaleSpaceResult:
    scale: np.ndarray
    corrected_scale: np.ndarray
    width: np.ndarray
    best_trace: np.ndarray
    measures: MeasureField
    orientation: np.ndarray
    tensors: TensorField
    grid: ScaleGrid
    params: GammaParams
    k: float


def sweep(field, grid: ScaleGrid, params: GammaParams = None,
          k: float = DEFAULT_K, post_smooth_sigma: float = None,
          correct: bool = True, anis_ratio: float = None,
          threads: int = 1) -> ScaleSpaceResult:
    """Run the scale sweep and return per-pixel scale, measures, orientation.

    anis_ratio overrides the 2D correction's elongated-feature ratio; when
    left unset and (gamma, k) are not the defaults, the ratio is measured by
    calibrate_anis_ratio instead of assuming 1.0675. Scales may be evaluated
    concurrently (threads > 1); the winner merge is order-independent, so
    results are identical to the sequential run.
    """
    arr = validate_field(field)
    if not isinstance(grid, ScaleGrid):
        raise ValueError("grid must be a ScaleGrid")
    if params is None:
        params = default_params()
    nd = arr.ndim
    n_channels = nd * (nd + 1) // 2

    best_trace = np.full(arr.shape, -np.inf)
    best_sigma = np.full(arr.shape, np.inf)
    best_channels = np.zeros((n_channels,) + arr.shape)

    def tensor_at(sigma):
        ring = RingSpec(sigma_r_from_scale(sigma, k, params.t), k)
        tf = structure_tensor(arr, sigma, params.gamma, ring, post_smooth_sigma)
        return sigma, tf

    def merge(sigma, tf):
        trace = tf.trace()
        better = (trace > best_trace) | ((trace == best_trace) & (sigma < best_sigma))
        best_trace[better] = trace[better]
        best_sigma[better] = sigma
        np.copyto(best_channels, tf.channels, where=better[None])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(tensor_at, s) for s in grid.sigmas]
            for fut in as_completed(futures):
                merge(*fut.result())
    else:
        for sigma in grid.sigmas:
            merge(*tensor_at(sigma))

    tensors = TensorField(best_channels)
    eigen = eigendecompose(tensors)
    meas = measures(eigen)
    orient = orientation(eigen)
    scale = best_sigma

    if not correct:
        corrected = scale.copy()
    elif nd == 2:
        ratio = anis_ratio
        if ratio is None:
            if params.gamma == DEFAULT_GAMMA and k == DEFAULT_K:
                ratio = DEFAULT_ANIS_RATIO
            else:
                logger.info("non-default gamma=%g k=%g: measuring the line "
                            "overshoot ratio instead of assuming %.4f",
                            params.gamma, k, DEFAULT_ANIS_RATIO)
                ratio = calibrate_anis_ratio((10.0, 20.0, 30.0),
                                             params.gamma, k).mean_ratio
        iso_ratio = params.gamma / (3.0 - params.gamma)
        corrected = correct_scale_2d(scale, meas.anisotropy, ratio, iso_ratio)
    else:
        if not (params.gamma == DEFAULT_GAMMA and k == DEFAULT_K):
            logger.info("3D correction coefficients were fit at gamma=1.2, "
                        "k=0.999; consider optimize_correction_3d for "
                        "gamma=%g k=%g", params.gamma, k)
        corrected = correct_scale_3d(scale, meas)

    return ScaleSpaceResult(scale=scale, corrected_scale=corrected,
                            width=width_map(corrected, params.t),
                            best_trace=best_trace, measures=meas,
                            orientation=orient, tensors=tensors, grid=grid,
                            params=params, k=k)


def correct_scale_2d(scale, anisotropy, anis_ratio: float = DEFAULT_ANIS_RATIO,
                     iso_ratio: float = 2.0 / 3.0):
    """Divide out the 2D selection bias.

    Elongated features (A=1) select anis_ratio too high; isotropic blobs
    (A=0) select iso_ratio (= gamma/(3-gamma), 2/3 at gamma=1.2) too low;
    intermediate A blends the two factors linearly.
    """
    a = np.asarray(anisotropy, dtype=np.float64)
    denom = (1.0 + (anis_ratio - 1.0) * a) * (1.0 - (1.0 - iso_ratio) * (1.0 - a))
    return np.asarray(scale, dtype=np.float64) / denom


def correct_scale_3d(scale, m: MeasureField,
                     coefficients: tuple = DEFAULT_CORRECTION_3D):
    """Divide out the 3D selection bias using the shape fractions."""
    c0, c_s, c_p, c_l = coefficients
    denom = (c0 * (1.0 + c_s * np.asarray(m.sphericity))
             * (1.0 + c_p * np.asarray(m.planarity))
             * (1.0 + c_l * np.asarray(m.linearity)))
    return np.asarray(scale, dtype=np.float64) / denom


def width_map(corrected_scale, t: float):
    """Feature width implied by a scale map: x_f = sigma / t."""
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    return np.asarray(corrected_scale, dtype=np.float64) / t


class Histogram(NamedTuple):
    centers: np.ndarray
    counts: np.ndarray


def scale_histogram(scale, mask=None, bins: int = 16,
                    span: tuple = None) -> Histogram:
    """Histogram of a scale map, optionally restricted to a mask.

    span defaults to the data range; pass the grid span (sigmas[0],
    sigmas[-1]) to make boundary bins meaningful for range_advice.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    arr = np.asarray(scale, dtype=np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != arr.shape:
            raise ValueError(f"mask shape {mask.shape} != scale shape {arr.shape}")
        values = arr[mask]
    else:
        values = arr.ravel()
    if values.size == 0:
        raise ValueError("no pixels selected for the histogram")
    if span is None:
        lo, hi = float(values.min()), float(values.max())
    else:
        lo, hi = float(span[0]), float(span[1])
    if hi <= lo:
        hi = lo + 1.0  # uniform map: everything lands in the first bin
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(centers=0.5 * (edges[:-1] + edges[1:]), counts=counts)


class Advice(enum.Enum):
    OK = "OK"
    EXPAND_LOW = "EXPAND_LOW"
    EXPAND_HIGH = "EXPAND_HIGH"
    NOISE_WARNING = "NOISE_WARNING"


def range_advice(hist: Histogram, grid: ScaleGrid,
                 theta: float = 0.15) -> Advice:
    """Flag a scale grid whose boundary bins caught too much mass.

    Mass piled on the top bin means features larger than the grid covers;
    mass on the bottom bin means either noise (if the grid already reaches
    sigma <= 3 px) or features below the grid.
    """
    total = int(hist.counts.sum())
    if total == 0:
        raise ValueError("histogram is empty")
    if hist.counts[-1] / total > theta:
        return Advice.EXPAND_HIGH
    if hist.counts[0] / total > theta:
        if grid.sigmas[0] <= 3.0:
            return Advice.NOISE_WARNING
        return Advice.EXPAND_LOW
    return Advice.OK


@dataclass(frozen=True)
class SingleScaleResult:
    measures: MeasureField
    orientation: np.ndarray
    tensors: TensorField


def single_scale_analyze(field, sigma: float, rho: float,
                         params: GammaParams = None, k: float = DEFAULT_K,
                         use_ring: bool = False) -> SingleScaleResult:
    """Fixed-scale baseline: measures and orientation at one (sigma, rho).

    By default uses the conventional Gaussian-integrated tensor. With
    use_ring=True the ring replaces the rho integration (rho is ignored),
    which matches a sweep over a one-scale grid exactly.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if use_ring:
        if params is None:
            params = default_params()
        ring = RingSpec(sigma_r_from_scale(sigma, k, params.t), k)
        tensors = structure_tensor(field, sigma, params.gamma, ring)
    else:
        tensors = classic_structure_tensor(field, sigma, rho)
    eigen = eigendecompose(tensors)
    return SingleScaleResult(measures=measures(eigen),
                             orientation=orientation(eigen), tensors=tensors)


class CorrectionFit(NamedTuple):
    coefficients: tuple
    objective_start: float
    objective_end: float
    improved: bool


def _fit_correction(objective, start) -> CorrectionFit:
    start = np.asarray(start, dtype=np.float64)
    f0 = float(objective(start))
    res = minimize(objective, start, method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000})
    if res.fun <= f0:
        return CorrectionFit(tuple(float(c) for c in res.x), f0,
                             float(res.fun), res.fun < f0)
    return CorrectionFit(tuple(float(c) for c in start), f0, f0, False)


def optimize_correction_3d(phantom_width: float, grid: ScaleGrid,
                           params: GammaParams = None, k: float = DEFAULT_K,
                           shape: tuple = (64, 64, 64),
                           start: tuple = DEFAULT_CORRECTION_3D) -> CorrectionFit:
    """Refit the 3D correction coefficients on sphere/cylinder/slab phantoms.

    Sweeps each phantom, reads mean scale and shape fractions at the center
    voxels, and direct-searches the coefficients so corrected center scales
    hit t*width for all three shapes at once.
    """
    from . import synth

    if params is None:
        params = default_params()
    target = params.t * phantom_width
    if not grid.sigmas[0] <= target <= grid.sigmas[-1]:
        raise ValueError(
            f"target scale {target:.2f} px for width {phantom_width} lies "
            f"outside the grid [{grid.sigmas[0]}, {grid.sigmas[-1]}]")

    rows = []
    for kind in (synth.PhantomKind.SPHERE_3D, synth.PhantomKind.CYLINDER_3D,
                 synth.PhantomKind.SLAB_3D):
        phantom = synth.generate(synth.PhantomSpec(kind=kind, width=phantom_width,
                                                   shape=shape))
        result = sweep(phantom.field, grid, params=params, k=k, correct=False)
        center = _center_block_mask(shape)
        rows.append((float(result.scale[center].mean()),
                     float(result.measures.sphericity[center].mean()),
                     float(result.measures.planarity[center].mean()),
                     float(result.measures.linearity[center].mean())))

    def objective(c):
        c0, c_s, c_p, c_l = c
        err = 0.0
        for s, m_s, m_p, m_l in rows:
            denom = c0 * (1.0 + c_s * m_s) * (1.0 + c_p * m_p) * (1.0 + c_l * m_l)
            if denom <= 0.0:
                return 1e300
            err += (s / denom - target) ** 2
        return err

    return _fit_correction(objective, start)


def optimize_correction_2d(phantom_width: float, grid: ScaleGrid,
                           params: GammaParams = None, k: float = DEFAULT_K,
                           start: tuple = (DEFAULT_ANIS_RATIO - 1.0, 1.0 / 3.0)
                           ) -> CorrectionFit:
    """Refit the 2D correction factors (a, b) of S / ((1+a*A)(1-b*(1-A)))
    on a disk/bar pair of the given width."""
    from . import synth

    if params is None:
        params = default_params()
    target = params.t * phantom_width
    if not grid.sigmas[0] <= target <= grid.sigmas[-1]:
        raise ValueError(
            f"target scale {target:.2f} px for width {phantom_width} lies "
            f"outside the grid [{grid.sigmas[0]}, {grid.sigmas[-1]}]")

    side = max(128, int(10 * phantom_width))
    # the bar is uniform along axis 0, but that extent must still hold the
    # largest kernel of the sweep (radius ceil(4*sigma_top))
    height = max(32, int(math.ceil(4.0 * grid.sigmas[-1])) + 1)
    disk = synth.generate(synth.PhantomSpec(kind=synth.PhantomKind.DISK_2D,
                                            width=phantom_width,
                                            shape=(side, side)))
    bar = synth.generate(synth.PhantomSpec(kind=synth.PhantomKind.LINE_2D,
                                           width=phantom_width,
                                           shape=(height, side)))
    rows = []
    for phantom in (disk, bar):
        result = sweep(phantom.field, grid, params=params, k=k, correct=False)
        mask = phantom.skeleton
        rows.append((float(result.scale[mask].mean()),
                     float(result.measures.anisotropy[mask].mean())))

    def objective(c):
        a, b = c
        err = 0.0
        for s, anis in rows:
            denom = (1.0 + a * anis) * (1.0 - b * (1.0 - anis))
            if denom <= 0.0:
                return 1e300
            err += (s / denom - target) ** 2
        return err

    return _fit_correction(objective, start)


def _center_block_mask(shape: tuple) -> np.ndarray:
    grids = np.ogrid[tuple(slice(0, n) for n in shape)]
    mask = np.ones(shape, dtype=bool)
    for g, n in zip(grids, shape):
        mask &= np.abs(g - 0.5 * (n - 1)) <= 0.5
    return mask
