"""Closed-form scale relations for feature-centered derivative filtering.

The package rests on one dimensionless constant: the ratio t between the
standard deviation of a first-derivative Gaussian filter and the width of the
rectangular feature whose edge response it maximizes. This module computes t
from the normalization exponent gamma (and back), the response model behind
that relation, the geometry of the ring filter built from two unnormalized
Gaussians, and the alignment model predicting where a thin ring best overlaps
a straight bar. All functions here are pure scalar/vector math; filtering on
actual images lives in filters/tensor/scalespace.

Defaults used throughout the package: gamma = 1.2 (t close to 0.372) and
ring shape factor k = 0.999.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

DEFAULT_GAMMA = 1.2
DEFAULT_K = 0.999

# Leftmost point of the solvable domain of w*e^w = x on the w <= -1 branch.
_BRANCH_X = -math.exp(-1.0)


class NumericalModelError(ArithmeticError):
    """A closed-form model was evaluated outside its valid regime."""


@dataclass(frozen=True)
class GammaParams:
    """Normalization exponent gamma and its filter-to-feature ratio t."""

    gamma: float
    t: float

    def __post_init__(self):
        if not 1.0 < self.gamma <= 3.0:
            raise ValueError(f"gamma must be in (1, 3], got {self.gamma}")
        if not 0.0 < self.t < 1.0:
            raise ValueError(f"t must be in (0, 1), got {self.t}")

    @classmethod
    def from_gamma(cls, gamma: float) -> "GammaParams":
        return cls(float(gamma), gamma_to_t(gamma))


def default_params() -> GammaParams:
    """The package-wide default configuration (gamma = 1.2)."""
    return GammaParams.from_gamma(DEFAULT_GAMMA)


def lambert_w_m1(x):
    """Lower real branch of the Lambert W function (w <= -1).

    Solves w*e^w = x for -1/e <= x < 0 by safeguarded bisection plus a few
    Newton polish steps; returns exactly -1.0 at the branch point. Accepts a
    scalar or an array.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.size == 0:
        return arr if not scalar else float("nan")
    if np.any(arr < _BRANCH_X) or np.any(arr >= 0.0):
        raise ValueError("lambert_w_m1 domain is -1/e <= x < 0")

    w = np.full(arr.shape, -1.0)
    solve = arr != _BRANCH_X
    if np.any(solve):
        xs = arr[solve]
        # f(w) = w*e^w - x: f(-1) <= 0 on the domain; at w = -750 the product
        # underflows to -0, leaving f = -x > 0, so [-750, -1] always brackets.
        lo = np.full(xs.shape, -750.0)
        hi = np.full(xs.shape, -1.0)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = mid * np.exp(mid) - xs <= 0.0
            hi = np.where(below, mid, hi)
            lo = np.where(below, lo, mid)
        wi = 0.5 * (lo + hi)
        for _ in range(4):
            ew = np.exp(wi)
            f = wi * ew - xs
            df = (1.0 + wi) * ew
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = wi - f / df
            # fall back to the bisection iterate wherever Newton escapes
            ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi)
            wi = np.where(ok, cand, wi)
        w[solve] = wi
    return float(w[0]) if scalar else w


def gamma_to_t(gamma: float) -> float:
    """Filter-to-feature ratio t for a normalization exponent gamma.

    Strictly increasing on (1, 3]; gamma = 1.2 gives t close to 0.372. At
    gamma = 3 the underlying Lambert argument hits its branch point and t
    diverges; math.inf is returned for that limit.
    """
    gamma = float(gamma)
    if not 1.0 < gamma <= 3.0:
        raise ValueError(f"gamma must be in (1, 3], got {gamma}")
    a = 0.5 * (1.0 - gamma)
    w = lambert_w_m1(a * math.exp(a))
    denom = 1.0 - gamma - 2.0 * w
    if denom <= 0.0:
        return math.inf
    return 1.0 / math.sqrt(denom)


def t_to_gamma(t: float) -> float:
    """Inverse of gamma_to_t: the exponent whose optimal ratio is t.

    Defined for any positive t (the ratio passes 1 near gamma = 2.52 on its
    way to the gamma = 3 divergence); maps (0, inf) onto (1, 3).
    """
    t = float(t)
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    with np.errstate(over="ignore"):
        e = np.exp(1.0 / (2.0 * t * t))  # overflows to inf for tiny t: gamma -> 1+
    return float(1.0 / (t * t * (e - 1.0)) + 1.0)


def rect_response(x_f, sigma, gamma):
    """Edge response of a width-x_f rectangular profile under a
    sigma^gamma-normalized first-derivative Gaussian.

    Closed form (4*sigma^(gamma-1)/sqrt(2*pi)) * (1 - exp(-x_f^2/(2 sigma^2))).
    Vectorized over x_f and sigma.
    """
    x_f = np.asarray(x_f, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(x_f <= 0.0) or np.any(sigma <= 0.0):
        raise ValueError("rect_response requires x_f > 0 and sigma > 0")
    out = (4.0 * sigma ** (gamma - 1.0) / math.sqrt(2.0 * math.pi)
           * (1.0 - np.exp(-(x_f * x_f) / (2.0 * sigma * sigma))))
    return float(out) if out.ndim == 0 else out


def ring_peak_radius(sigma_r: float, k: float) -> float:
    """Radius where the difference of Gaussians exp(-x^2/2s^2) - exp(-x^2/2(sk)^2)
    peaks: sigma_r * k * sqrt(2 ln(k^2) / (k^2 - 1))."""
    if sigma_r <= 0.0:
        raise ValueError(f"sigma_r must be positive, got {sigma_r}")
    if not 0.0 < k < 1.0:
        raise ValueError(f"k must be in (0, 1), got {k}")
    return sigma_r * k * math.sqrt(2.0 * math.log(k * k) / (k * k - 1.0))


def sigma_r_from_scale(sigma_star: float, k: float, t: float) -> float:
    """Ring Gaussian sigma whose peak radius spans the feature selected at
    scale sigma_star: sigma_star / (2 * t * c(k)), c(k) the unit peak radius.

    For the defaults this is close to 0.95 * sigma_star.
    """
    if sigma_star <= 0.0:
        raise ValueError(f"sigma_star must be positive, got {sigma_star}")
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must be in (0, 1), got {t}")
    return sigma_star / (2.0 * t * ring_peak_radius(1.0, k))


def circular_segment_area(x: float, r: float) -> float:
    """Area of the circular segment of radius r cut off at abscissa x >= 0."""
    if r <= 0.0:
        raise ValueError(f"r must be positive, got {r}")
    if not 0.0 <= x <= r:
        raise ValueError(f"x must be in [0, r], got x={x}, r={r}")
    return r * r * math.acos(x / r) - x * math.sqrt(max(r * r - x * x, 0.0))


def _segment_area_gradient(x, r):
    # d/dr of the segment area at fixed cut x; zero once the cut clears the circle
    x = np.asarray(x, dtype=np.float64)
    ratio = np.clip(x / r, -1.0, 1.0)
    return 2.0 * r * np.arccos(ratio)


def ring_line_gradient(psi, a_r: float, w_r: float, w_x: float,
                       sigma: float = 1.0):
    """Overlap-area derivative for the ring/line alignment model.

    Derivative of the annulus/bar intersection area with respect to the
    annulus radius, evaluated with the bar edge at offset psi*sigma; zero at
    the optimum located by ring_line_ratio. Exposed so that root can be
    verified directly. Vectorized over psi.
    """
    psi = np.asarray(psi, dtype=np.float64)
    r1 = sigma * (a_r - w_r)
    r2 = sigma * (a_r + w_r)
    x1 = psi * sigma - sigma * w_x
    x2 = psi * sigma + sigma * w_x
    outer = _segment_area_gradient(x1, r2) - _segment_area_gradient(x2, r2)
    inner = _segment_area_gradient(x1, r1) - _segment_area_gradient(x2, r1)
    out = outer - inner
    return float(out) if out.ndim == 0 else out


def ring_line_ratio(a_r: float, w_r: float, w_x: float,
                    sigma: float = 1.0) -> float:
    """Offset-to-sigma ratio psi at which an annulus (mid radius a_r*sigma,
    half-width w_r*sigma) maximally overlaps a straight bar of half-width
    w_x*sigma whose edge sits at distance psi*sigma from the ring center.

    The ratio depends only on (a_r, w_r, w_x); sigma merely scales the
    unsimplified gradient and is accepted to make that checkable. The model
    assumes a bar thinner than the inner ring radius; if the overlap gradient
    never changes sign on (0, a_r + w_r + w_x) the regime is invalid and a
    NumericalModelError is raised.
    """
    if not a_r > w_r > 0.0:
        raise ValueError(f"need a_r > w_r > 0, got a_r={a_r}, w_r={w_r}")
    if w_x <= 0.0:
        raise ValueError(f"w_x must be positive, got {w_x}")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    top = a_r + w_r + w_x
    psis = np.linspace(0.0, top, 4097)[1:]
    vals = ring_line_gradient(psis, a_r, w_r, w_x, sigma)
    signs = np.signbit(vals)
    flips = np.nonzero(signs[:-1] != signs[1:])[0]
    if flips.size == 0:
        raise NumericalModelError(
            "overlap gradient has no sign change; ring/line alignment model "
            f"invalid for a_r={a_r}, w_r={w_r}, w_x={w_x}")
    i = int(flips[0])
    root = brentq(ring_line_gradient, psis[i], psis[i + 1],
                  args=(a_r, w_r, w_x, sigma), xtol=1e-14, rtol=8.9e-16)
    return float(root)


class CalibrationResult(NamedTuple):
    mean_ratio: float
    ratios: tuple
    widths: tuple


def calibrate_anis_ratio(widths, gamma: float = DEFAULT_GAMMA,
                         k: float = DEFAULT_K) -> CalibrationResult:
    """Measure how far the scale sweep overshoots on straight line features.

    For each width a binary vertical line is synthesized, the full sweep is
    run on a fine geometric grid, and the selected scale along the line's
    middle column(s) is divided by t*width. Returns the mean ratio and the
    per-width ratios. With the package defaults the mean lands near 1.06,
    the reference value used by the 2D scale correction being 1.0675.
    """
    widths = tuple(float(w) for w in widths)
    if len(widths) < 3:
        raise ValueError(f"need at least 3 widths, got {len(widths)}")
    if any(w < 4.0 for w in widths):
        raise ValueError("every width must be >= 4 px")
    params = GammaParams.from_gamma(gamma)
    ratios = tuple(_line_scale_ratio(w, params, k) for w in widths)
    return CalibrationResult(float(np.mean(ratios)), ratios, widths)


def _line_scale_ratio(width: float, params: GammaParams, k: float) -> float:
    # deferred: the sweep sits above this module in the layering
    from . import scalespace, synth

    target = params.t * width
    lo, hi = 0.7 * target, 1.6 * target
    if lo < 0.6:
        raise ValueError(
            f"width {width} px is too small for the calibration scale grid "
            f"at gamma={params.gamma} (grid bottom {lo:.3f} px is sub-pixel)")
    # the line is uniform along axis 0, but that extent must still hold the
    # largest kernel of the sweep (radius ceil(4*sigma_top))
    height = max(32, int(math.ceil(4.0 * hi)) + 1)
    spec = synth.PhantomSpec(kind=synth.PhantomKind.LINE_2D, width=width,
                             shape=(height, max(192, int(10 * width))))
    phantom = synth.generate(spec)
    grid_ = scalespace.ScaleGrid.geometric(lo, hi, ratio=1.002)
    result = scalespace.sweep(phantom.field, grid_, params=params, k=k,
                              correct=False)
    return float(result.scale[phantom.skeleton].mean()) / target
