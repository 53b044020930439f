"""Structure tensor assembly, eigendecomposition, and shape measures.

Tensors are stored channel-first: an array of shape (C, *field.shape) holding
the upper triangle of the symmetric matrix in row-major order over array
axes, so 2D is (J00, J01, J11) and 3D is (J00, J01, J02, J11, J12, J22).
Axis names x, y, z in docstrings refer to array axes 0, 1, 2.

Orientation conventions (documented, the math does not impose one):
in 2D the principal direction is reported as an angle in (0, pi], measured
from the last (column) axis toward the first (row) axis, so a vertical bar
reads pi/2 and degenerate pixels read pi. In 3D the canonical unit vector is
flipped so its last component above 1e-12 magnitude is positive.
"""

from dataclasses import dataclass

import numpy as np

from .filters import RingSpec, apply_ring, gaussian_derivative_kernel, gaussian_kernel
from .grid import Kernel1D, convolve_separable, validate_field

_PAIRS = {2: ((0, 0), (0, 1), (1, 1)),
          3: ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))}
_DIAG = {2: (0, 2), 3: (0, 3, 5)}
_NDIM_FROM_CHANNELS = {3: 2, 6: 3}

# relative eigenvalue gap below which the analytic 3x3 eigenvector loses
# accuracy and the pixel is re-solved iteratively
_GAP_FALLBACK = 1e-4


def tensor_pairs(ndim: int):
    """Upper-triangle (i, j) index pairs in channel order."""
    return _PAIRS[ndim]


def channel_index(ndim: int, i: int, j: int) -> int:
    i, j = min(i, j), max(i, j)
    return _PAIRS[ndim].index((i, j))


@dataclass(frozen=True)
class TensorField:
    """Symmetric per-pixel matrices, channels stacked on axis 0."""

    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim < 2 or ch.shape[0] not in _NDIM_FROM_CHANNELS:
            raise ValueError(f"expected 3 or 6 leading channels, got shape {ch.shape}")
        if ch.ndim - 1 != _NDIM_FROM_CHANNELS[ch.shape[0]]:
            raise ValueError(
                f"{ch.shape[0]} channels imply a {_NDIM_FROM_CHANNELS[ch.shape[0]]}D "
                f"field, got rank {ch.ndim - 1}")
        object.__setattr__(self, "channels", ch)

    @property
    def ndim_space(self) -> int:
        return _NDIM_FROM_CHANNELS[self.channels.shape[0]]

    @property
    def shape(self) -> tuple:
        return self.channels.shape[1:]

    def trace(self) -> np.ndarray:
        return sum(self.channels[i] for i in _DIAG[self.ndim_space])


@dataclass(frozen=True)
class EigenField:
    """Ascending eigenvalues (N, *shape) and the unit eigenvector of the
    smallest one (the direction of least intensity change)."""

    lambdas: np.ndarray
    principal: np.ndarray


@dataclass(frozen=True)
class MeasureField:
    """Shape measures in [0, 1]; 2D fills anisotropy, 3D fills the rest."""

    anisotropy: np.ndarray = None
    fa: np.ndarray = None
    linearity: np.ndarray = None
    planarity: np.ndarray = None
    sphericity: np.ndarray = None


def gradient(field, sigma: float, gamma: float = 1.0) -> list:
    """Per-axis sigma^gamma-normalized Gaussian derivatives.

    Component i is the field convolved with the derivative kernel along axis
    i and plain Gaussians of the same sigma along the other axes. The grid
    engine correlates, so the derivative taps are flipped here to get true
    convolution: a rising ramp reports a positive derivative.
    """
    arr = validate_field(field)
    smooth = gaussian_kernel(sigma)
    deriv = Kernel1D(gaussian_derivative_kernel(sigma, gamma).taps[::-1])
    comps = []
    for axis in range(arr.ndim):
        kernels = [deriv if ax == axis else smooth for ax in range(arr.ndim)]
        comps.append(convolve_separable(arr, kernels))
    return comps


def structure_tensor(field, sigma: float, gamma: float, ring: RingSpec,
                     post_smooth_sigma: float = None) -> TensorField:
    """Ring-integrated gradient products at one scale.

    The caller is responsible for pairing sigma and ring.sigma_r (see
    sigma_r_from_scale); this function applies whatever it is given.
    """
    comps = gradient(field, sigma, gamma)
    nd = len(comps)
    post = None
    if post_smooth_sigma is not None and post_smooth_sigma > 0.0:
        post = gaussian_kernel(post_smooth_sigma)
    channels = []
    for i, j in tensor_pairs(nd):
        ch = apply_ring(comps[i] * comps[j], ring)
        if post is not None:
            ch = convolve_separable(ch, [post] * nd)
        channels.append(ch)
    return TensorField(np.stack(channels))


def classic_structure_tensor(field, sigma: float, rho: float) -> TensorField:
    """Gaussian-integrated tensor: rho-smoothed products of plain gradients.

    The conventional construction used as the single-scale baseline; gamma is
    fixed at 1 (no scale normalization). rho = 0 returns the raw products.
    """
    if rho < 0.0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    comps = gradient(field, sigma, gamma=1.0)
    nd = len(comps)
    post = gaussian_kernel(rho) if rho > 0.0 else None
    channels = []
    for i, j in tensor_pairs(nd):
        ch = comps[i] * comps[j]
        if post is not None:
            ch = convolve_separable(ch, [post] * nd)
        channels.append(ch)
    return TensorField(np.stack(channels))


def eigendecompose(tensors: TensorField) -> EigenField:
    """Sorted eigenvalues and the canonicalized eigenvector of the smallest.

    2x2 pixels use the closed form. 3x3 pixels use the trigonometric solver
    for symmetric matrices with eigenvectors from cross products of the
    shifted rows; pixels whose low eigenvalue gap is below 1e-4 of the
    matrix magnitude (where the cross products degrade) are re-solved with
    the iterative symmetric solver.
    """
    ch = tensors.channels
    if not np.all(np.isfinite(ch)):
        raise ValueError("tensor channels contain non-finite samples")
    if tensors.ndim_space == 2:
        lam, vec = _eigen2(ch)
    else:
        lam, vec = _eigen3(ch)
    return EigenField(lambdas=lam, principal=vec)


def _eigen2(ch):
    a, b, d = ch[0], ch[1], ch[2]
    half_tr = 0.5 * (a + d)
    disc = np.sqrt((0.5 * (a - d)) ** 2 + b * b)
    l1 = half_tr - disc
    l2 = half_tr + disc
    # eigenvector of l1 from whichever matrix row is better conditioned
    n_row0 = b * b + (l1 - a) ** 2
    n_row1 = (l1 - d) ** 2 + b * b
    use0 = n_row0 >= n_row1
    v0 = np.where(use0, b, l1 - d)
    v1 = np.where(use0, l1 - a, b)
    norm = np.hypot(v0, v1)
    flat = norm <= 0.0
    v0 = np.where(flat, 0.0, v0)
    v1 = np.where(flat, 1.0, v1)  # isotropic pixels fold to angle pi
    norm = np.where(flat, 1.0, norm)
    v0, v1 = v0 / norm, v1 / norm
    # canonical sign: angle folded into (0, pi]
    theta = np.arctan2(v0 + 0.0, v1)
    theta = np.where(theta <= 0.0, theta + np.pi, theta)
    return np.stack([l1, l2]), np.stack([np.sin(theta), np.cos(theta)])


def _eigen3(ch):
    a00, a01, a02, a11, a12, a22 = ch
    q = (a00 + a11 + a22) / 3.0
    b00, b11, b22 = a00 - q, a11 - q, a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * (a01 * a01 + a02 * a02 + a12 * a12)
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    ps = np.where(p > 0.0, p, 1.0)
    c00, c11, c22 = b00 / ps, b11 / ps, b22 / ps
    c01, c02, c12 = a01 / ps, a02 / ps, a12 / ps
    half_det = 0.5 * (c00 * (c11 * c22 - c12 * c12)
                      - c01 * (c01 * c22 - c12 * c02)
                      + c02 * (c01 * c12 - c11 * c02))
    phi = np.arccos(np.clip(half_det, -1.0, 1.0)) / 3.0
    l3 = q + 2.0 * p * np.cos(phi)
    l1 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l2 = 3.0 * q - l1 - l3

    # eigenvector of l1: cross products of rows of (A - l1*I); the best pair
    # fails only when l1 is (nearly) repeated, handled by the fallback below
    r0 = (a00 - l1, a01, a02)
    r1 = (a01, a11 - l1, a12)
    r2 = (a02, a12, a22 - l1)
    cands = [_cross(r0, r1), _cross(r1, r2), _cross(r2, r0)]
    norms = [c[0] * c[0] + c[1] * c[1] + c[2] * c[2] for c in cands]
    best = np.argmax(np.stack(norms), axis=0)
    v = [np.choose(best, [c[i] for c in cands]) for i in range(3)]
    best_norm = np.sqrt(np.choose(best, norms))

    mag = np.maximum(np.abs(l1), np.abs(l3))
    weak = (l2 - l1) <= _GAP_FALLBACK * mag
    degenerate = weak | (p2 <= 0.0) | (best_norm <= 1e-150)

    safe = np.where(best_norm > 0.0, best_norm, 1.0)
    v = [np.where(degenerate, 0.0, vi / safe) for vi in v]

    lam = np.stack([l1, l2, l3])
    vec = np.stack(v)
    if np.any(degenerate):
        idx = np.nonzero(degenerate)
        mats = np.empty(idx[0].shape + (3, 3))
        mats[..., 0, 0] = a00[idx]
        mats[..., 0, 1] = mats[..., 1, 0] = a01[idx]
        mats[..., 0, 2] = mats[..., 2, 0] = a02[idx]
        mats[..., 1, 1] = a11[idx]
        mats[..., 1, 2] = mats[..., 2, 1] = a12[idx]
        mats[..., 2, 2] = a22[idx]
        w, u = np.linalg.eigh(mats)
        for comp in range(3):
            lam[comp][idx] = w[..., comp]
            vec[comp][idx] = u[..., comp, 0]
    return lam, _canonical3(vec)


def _cross(u, v):
    return (u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0])


def _canonical3(vec, tol: float = 1e-12):
    v0, v1, v2 = vec[0], vec[1], vec[2]
    sign = np.where(np.abs(v2) > tol, np.sign(v2),
                    np.where(np.abs(v1) > tol, np.sign(v1), np.sign(v0)))
    sign = np.where(sign == 0.0, 1.0, sign)
    return vec * sign


def _degeneracy_threshold(lambdas) -> float:
    # absolute floor tied to the strongest tensor in the field, so measure
    # conventions do not depend on intensity units
    trace = lambdas.sum(axis=0)
    top = float(trace.max()) if trace.size else 0.0
    return 1e-12 * max(top, 0.0)


def measures_2d(eigen: EigenField) -> MeasureField:
    """Anisotropy A = 1 - l1/l2, zero where the tensor is degenerate."""
    l1, l2 = eigen.lambdas[0], eigen.lambdas[1]
    eps = _degeneracy_threshold(eigen.lambdas)
    safe = np.where(l2 > eps, l2, 1.0)
    a = np.where(l2 > eps, 1.0 - l1 / safe, 0.0)
    return MeasureField(anisotropy=np.clip(a, 0.0, 1.0))


def measures_3d(eigen: EigenField) -> MeasureField:
    """Fractional anisotropy plus the linear/planar/spherical fractions.

    m_l = (l2-l1)/l3, m_p = (l3-l2)/l3, m_s = l1/l3; they sum to one where
    l3 is above the degeneracy floor, and degenerate pixels report the
    isotropic convention (FA=0, m_s=1).
    """
    l1, l2, l3 = eigen.lambdas[0], eigen.lambdas[1], eigen.lambdas[2]
    eps = _degeneracy_threshold(eigen.lambdas)
    ok = l3 > eps
    safe3 = np.where(ok, l3, 1.0)
    m_l = np.where(ok, (l2 - l1) / safe3, 0.0)
    m_p = np.where(ok, (l3 - l2) / safe3, 0.0)
    m_s = np.where(ok, l1 / safe3, 1.0)
    mean = (l1 + l2 + l3) / 3.0
    num = (l1 - mean) ** 2 + (l2 - mean) ** 2 + (l3 - mean) ** 2
    den = l1 * l1 + l2 * l2 + l3 * l3
    fa = np.where(ok, np.sqrt(1.5 * num / np.where(ok, den, 1.0)), 0.0)
    clip = lambda m: np.clip(m, 0.0, 1.0)
    return MeasureField(fa=clip(fa), linearity=clip(m_l),
                        planarity=clip(m_p), sphericity=clip(m_s))


def measures(eigen: EigenField) -> MeasureField:
    """Dimensionality dispatch for measures_2d/measures_3d."""
    if eigen.lambdas.shape[0] == 2:
        return measures_2d(eigen)
    return measures_3d(eigen)


def orientation(eigen: EigenField):
    """2D: principal angle in (0, pi]; 3D: the canonical unit vector field."""
    if eigen.lambdas.shape[0] == 2:
        theta = np.arctan2(eigen.principal[0] + 0.0, eigen.principal[1])
        return np.where(theta <= 0.0, theta + np.pi, theta)
    return eigen.principal.copy()
