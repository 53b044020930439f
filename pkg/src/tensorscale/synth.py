"""Synthetic binary phantoms, noise models, and block downscaling.

Rasterization rule: a pixel belongs to the foreground iff its center lies
inside the continuous shape. Shape centers sit at the continuous grid center
((n-1)/2 per axis), so even widths straddle two pixels and odd widths center
on one; skeletons follow the rasterized feature (middle column(s) of a bar,
center pixel block of a disk), which keeps them exact for both parities.

Axis conventions: bars and lines run along axis 0 (vertical) and vary along
axis 1; the 3D cylinder axis runs along the last array axis; the 3D slab is
stacked along axis 0 (its normal).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .filters import gaussian_kernel
from .grid import validate_field


class PhantomKind(enum.Enum):
    RECT_1D = "rect1d"
    DISK_2D = "disk2d"
    LINE_2D = "line2d"
    ELLIPSE_2D = "ellipse2d"
    INCREASING_LINES_2D = "lines2d-increasing"
    SPHERE_3D = "sphere3d"
    CYLINDER_3D = "cylinder3d"
    SLAB_3D = "slab3d"


class NoiseKind(enum.Enum):
    IID = "iid"
    ANISOTROPIC = "anisotropic"


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry and intensity record for one synthetic feature.

    width is the feature diameter/thickness in px. aspect applies to the
    ellipse only (major/minor ratio). width_max and bands apply to the
    increasing-lines pattern only: bar widths step geometrically from width
    to width_max (default 6*width) over `bands` vertical bands.
    """

    kind: PhantomKind
    width: float
    shape: tuple
    foreground: float = 1.0
    background: float = 0.0
    seed: int = 0
    aspect: float = 3.0
    width_max: float = None
    bands: int = 6

    def __post_init__(self):
        if not isinstance(self.kind, PhantomKind):
            raise ValueError(f"unknown phantom kind: {self.kind!r}")
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        rank = {PhantomKind.RECT_1D: 1,
                PhantomKind.DISK_2D: 2, PhantomKind.LINE_2D: 2,
                PhantomKind.ELLIPSE_2D: 2, PhantomKind.INCREASING_LINES_2D: 2,
                PhantomKind.SPHERE_3D: 3, PhantomKind.CYLINDER_3D: 3,
                PhantomKind.SLAB_3D: 3}[self.kind]
        if len(shape) != rank or any(n < 1 for n in shape):
            raise ValueError(f"{self.kind.value} needs rank {rank} positive extents, "
                             f"got {shape}")
        if self.width < 2.0:
            raise ValueError(f"width must be >= 2 px, got {self.width}")
        if self.width >= min(shape):
            raise ValueError(f"width {self.width} exceeds the smallest extent of {shape}")
        if self.kind is PhantomKind.ELLIPSE_2D:
            if self.aspect < 1.0:
                raise ValueError(f"aspect must be >= 1, got {self.aspect}")
            if self.aspect * self.width >= shape[0]:
                raise ValueError("ellipse major axis exceeds the field height")
        if self.kind is PhantomKind.INCREASING_LINES_2D:
            wmax = self.width_max if self.width_max is not None else 6.0 * self.width
            if wmax < self.width:
                raise ValueError("width_max must be >= width")
            if self.bands < 2:
                raise ValueError("need at least 2 bands")


@dataclass(frozen=True)
class Phantom:
    field: np.ndarray
    feature: np.ndarray
    skeleton: np.ndarray
    labels: np.ndarray = None


def _middle_indices(lo: int, hi: int):
    """Index/indices of the middle of the inclusive run [lo, hi]."""
    mid = 0.5 * (lo + hi)
    return sorted({int(math.floor(mid)), int(math.ceil(mid))})


def _bar_columns(extent: int, width: float):
    """Column indices of a centered bar: centers in [c - w/2, c + w/2)."""
    c = 0.5 * (extent - 1)
    xs = np.arange(extent)
    inside = (xs >= c - width / 2.0) & (xs < c + width / 2.0)
    cols = np.nonzero(inside)[0]
    if cols.size == 0:
        raise ValueError(f"width {width} rasterizes to zero pixels on extent {extent}")
    return cols


def generate(spec: PhantomSpec) -> Phantom:
    """Rasterize the phantom: intensity field, feature mask, skeleton mask.

    The increasing-lines pattern also returns a label field (band number on
    the bars, 0 elsewhere).
    """
    kind = spec.kind
    fg, bg = float(spec.foreground), float(spec.background)
    shape = spec.shape
    labels = None

    if kind is PhantomKind.RECT_1D:
        cols = _bar_columns(shape[0], spec.width)
        feature = np.zeros(shape, dtype=bool)
        feature[cols] = True
        skeleton = np.zeros(shape, dtype=bool)
        skeleton[_middle_indices(cols[0], cols[-1])] = True

    elif kind is PhantomKind.LINE_2D:
        cols = _bar_columns(shape[1], spec.width)
        feature = np.zeros(shape, dtype=bool)
        feature[:, cols] = True
        skeleton = np.zeros(shape, dtype=bool)
        skeleton[:, _middle_indices(cols[0], cols[-1])] = True

    elif kind is PhantomKind.SLAB_3D:
        rows = _bar_columns(shape[0], spec.width)
        feature = np.zeros(shape, dtype=bool)
        feature[rows] = True
        skeleton = np.zeros(shape, dtype=bool)
        skeleton[_middle_indices(rows[0], rows[-1])] = True

    elif kind in (PhantomKind.DISK_2D, PhantomKind.SPHERE_3D):
        centers = [0.5 * (n - 1) for n in shape]
        grids = np.ogrid[tuple(slice(0, n) for n in shape)]
        rr = sum((g - c) ** 2 for g, c in zip(grids, centers))
        feature = rr < (spec.width / 2.0) ** 2
        skeleton = np.ones(shape, dtype=bool)
        for g, c in zip(grids, centers):
            skeleton &= np.abs(g - c) <= 0.5

    elif kind is PhantomKind.CYLINDER_3D:
        centers = [0.5 * (n - 1) for n in shape[:2]]
        g0, g1 = np.ogrid[0:shape[0], 0:shape[1]]
        rr = (g0 - centers[0]) ** 2 + (g1 - centers[1]) ** 2
        disk = rr < (spec.width / 2.0) ** 2
        feature = np.broadcast_to(disk[:, :, None], shape).copy()
        core = (np.abs(g0 - centers[0]) <= 0.5) & (np.abs(g1 - centers[1]) <= 0.5)
        skeleton = np.broadcast_to(core[:, :, None], shape).copy()

    elif kind is PhantomKind.ELLIPSE_2D:
        c0, c1 = 0.5 * (shape[0] - 1), 0.5 * (shape[1] - 1)
        semi_minor = spec.width / 2.0
        semi_major = spec.aspect * semi_minor
        g0, g1 = np.ogrid[0:shape[0], 0:shape[1]]
        feature = (((g0 - c0) / semi_major) ** 2 + ((g1 - c1) / semi_minor) ** 2) < 1.0
        # medial axis of an ellipse: the major-axis segment between the
        # evolute cusps at distance (a^2 - b^2)/a from the center
        reach = (semi_major ** 2 - semi_minor ** 2) / semi_major
        skeleton = (np.abs(g1 - c1) <= 0.5) & (np.abs(g0 - c0) <= reach)

    elif kind is PhantomKind.INCREASING_LINES_2D:
        feature, skeleton, labels = _increasing_lines(spec)

    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unhandled kind {kind}")

    field = np.where(feature, fg, bg).astype(np.float64)
    return Phantom(field=field, feature=feature, skeleton=skeleton, labels=labels)


def _band_widths(spec: PhantomSpec):
    wmax = spec.width_max if spec.width_max is not None else 6.0 * spec.width
    steps = np.geomspace(spec.width, wmax, spec.bands)
    return [max(2, int(round(w))) for w in steps]


def _increasing_lines(spec: PhantomSpec):
    """Vertical bars of geometrically stepped width, edge to edge.

    Each band fills one horizontal slice with repeated (bar, gap) pairs of
    equal width; no flat margins, so no band presents a wide envelope that
    would read as a large-scale feature of its own.
    """
    height, width_total = spec.shape
    widths = _band_widths(spec)
    slice_w = width_total // spec.bands
    feature = np.zeros(spec.shape, dtype=bool)
    skeleton = np.zeros(spec.shape, dtype=bool)
    labels = np.zeros(spec.shape, dtype=np.int16)
    for band, w in enumerate(widths):
        x0 = band * slice_w
        x_end = width_total if band == spec.bands - 1 else x0 + slice_w
        pairs = (x_end - x0) // (2 * w)
        if pairs == 0:
            raise ValueError(
                f"band width {w} px does not fit a bar/gap pair into its "
                f"{x_end - x0} px slice; widen the field or lower width_max")
        for p in range(pairs):
            bar = x0 + p * 2 * w
            feature[:, bar:bar + w] = True
            labels[:, bar:bar + w] = band + 1
            for col in _middle_indices(bar, bar + w - 1):
                skeleton[:, col] = True
    return feature, skeleton, labels


def three_feature_scene(width: float = 20.0, shape: tuple = (256, 256),
                        foreground: float = 1.0, background: float = 0.0) -> Phantom:
    """One field holding a disk, a full-height bar, and a 3:1 ellipse of
    equal width, far enough apart that their filter responses stay separate.

    Labels: 1 = disk, 2 = bar, 3 = ellipse.
    """
    height, width_total = shape
    if min(shape) < int(10 * width):
        raise ValueError(f"shape {shape} too small for three width-{width} features")
    feature = np.zeros(shape, dtype=bool)
    skeleton = np.zeros(shape, dtype=bool)
    labels = np.zeros(shape, dtype=np.int16)
    g0, g1 = np.ogrid[0:height, 0:width_total]
    r = width / 2.0

    disk_c = (0.25 * (height - 1), 0.28 * (width_total - 1))
    disk = ((g0 - disk_c[0]) ** 2 + (g1 - disk_c[1]) ** 2) < r * r
    feature |= disk
    labels[disk] = 1
    skeleton |= ((np.abs(g0 - disk_c[0]) <= 0.5) & (np.abs(g1 - disk_c[1]) <= 0.5))

    bar_c = 0.75 * (width_total - 1)
    xs = np.arange(width_total)
    cols = np.nonzero((xs >= bar_c - r) & (xs < bar_c + r))[0]
    feature[:, cols] = True
    labels[:, cols] = 2
    skeleton[:, _middle_indices(cols[0], cols[-1])] = True

    ell_c = (0.70 * (height - 1), 0.33 * (width_total - 1))
    semi_major = 3.0 * r
    ell = (((g0 - ell_c[0]) / semi_major) ** 2 + ((g1 - ell_c[1]) / r) ** 2) < 1.0
    feature |= ell
    labels[ell] = 3
    reach = (semi_major ** 2 - r ** 2) / semi_major
    skeleton |= ((np.abs(g1 - ell_c[1]) <= 0.5) & (np.abs(g0 - ell_c[0]) <= reach))

    field = np.where(feature, foreground, background).astype(np.float64)
    return Phantom(field=field, feature=feature, skeleton=skeleton, labels=labels)


def add_noise(field, kind: NoiseKind, amplitude: float, axis: int = 0,
              smoothing_sigma: float = 2.0, seed: int = 0) -> np.ndarray:
    """Add seeded Gaussian noise; anisotropic noise is white noise smoothed
    along one axis and rescaled so its sample standard deviation equals
    amplitude, which turns it into faint streaks along that axis."""
    arr = validate_field(field, min_rank=1)
    if amplitude < 0.0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    if not isinstance(kind, NoiseKind):
        raise ValueError(f"unknown noise kind: {kind!r}")
    if amplitude == 0.0:
        return arr.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(arr.shape)
    if kind is NoiseKind.ANISOTROPIC:
        if smoothing_sigma <= 0.0:
            raise ValueError(f"smoothing_sigma must be positive, got {smoothing_sigma}")
        taps = gaussian_kernel(smoothing_sigma).taps
        noise = ndimage.correlate1d(noise, taps, axis=axis, mode="mirror")
        noise *= amplitude / noise.std()
    else:
        noise *= amplitude
    return arr + noise


def downscale2(field) -> np.ndarray:
    """Halve every extent by 2x block mean pooling (odd trailing samples
    are dropped first)."""
    arr = validate_field(field, min_rank=1)
    if any(n < 2 for n in arr.shape):
        raise ValueError(f"every extent must be >= 2, got {arr.shape}")
    arr = arr[tuple(slice(0, (n // 2) * 2) for n in arr.shape)]
    for ax in range(arr.ndim):
        even = [slice(None)] * arr.ndim
        odd = [slice(None)] * arr.ndim
        even[ax] = slice(0, None, 2)
        odd[ax] = slice(1, None, 2)
        arr = 0.5 * (arr[tuple(even)] + arr[tuple(odd)])
    return arr
