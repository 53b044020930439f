"""Dense scalar fields and separable correlation with mirrored boundaries.

Every filtering step in this package runs through the two functions in this
module. Fields are plain float64 numpy arrays on integer lattices with unit
spacing; kernels are short odd-length 1D tap vectors applied axis by axis.

Boundary handling is fixed to mirror reflection about the edge sample (index
-1 maps to 1, index n maps to n-2, repeating with period 2(n-1) when a kernel
overhangs a short line). Mirroring avoids the fake gradient response that
zero or constant padding would create at image borders.

All arithmetic is 64-bit. The ring filter downstream subtracts two nearly
identical smoothings, and lower precision loses that difference to
cancellation.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class BoundaryRule(enum.Enum):
    """How a 1D line continues past its ends."""

    MIRROR = "mirror"


@dataclass(frozen=True)
class Kernel1D:
    """Odd-length tap vector centered on its middle element."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 != 1:
            raise ValueError(f"kernel must be 1D with odd length, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        object.__setattr__(self, "taps", taps)

    @property
    def radius(self) -> int:
        return self.taps.size // 2

    def __len__(self) -> int:
        return self.taps.size


def validate_field(field, min_rank: int = 2, max_rank: int = 3) -> np.ndarray:
    """Coerce to a float64 array and check rank and finiteness.

    Rank 1 is permitted by callers that work on profiles (min_rank=1); the
    image pipeline itself handles 2D and 3D fields.
    """
    arr = np.asarray(field, dtype=np.float64)
    if not (min_rank <= arr.ndim <= max_rank):
        raise ValueError(f"field must have rank {min_rank}..{max_rank}, got {arr.ndim}")
    if arr.size == 0:
        raise ValueError("field must have every extent >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite samples")
    return arr


def convolve_axis(field, kernel: Kernel1D, axis: int,
                  boundary: BoundaryRule = BoundaryRule.MIRROR) -> np.ndarray:
    """Correlate one axis of the field with a 1D kernel.

    The output has the field's shape. Lines are mirror-extended; kernels of
    length up to 2n+1 for extent n are accepted (the overhang re-reflects),
    longer ones are rejected as a sizing error.
    """
    arr = validate_field(field, min_rank=1)
    if not isinstance(kernel, Kernel1D):
        kernel = Kernel1D(kernel)
    if not isinstance(boundary, BoundaryRule):
        raise ValueError(f"unknown boundary rule: {boundary!r}")
    if not -arr.ndim <= axis < arr.ndim:
        raise ValueError(f"axis {axis} out of range for rank {arr.ndim}")
    n = arr.shape[axis]
    if len(kernel) > 2 * n + 1:
        raise ValueError(
            f"kernel length {len(kernel)} exceeds mirrored line capacity "
            f"{2 * n + 1} on axis {axis} (extent {n})")
    # correlate1d's "mirror" mode is exactly the period-2(n-1) reflection,
    # including repeated reflection for kernels overhanging short lines.
    return ndimage.correlate1d(arr, kernel.taps, axis=axis, mode="mirror")


def convolve_separable(field, kernels,
                       boundary: BoundaryRule = BoundaryRule.MIRROR) -> np.ndarray:
    """Apply one 1D kernel per axis in sequence (axis 0 first)."""
    arr = validate_field(field, min_rank=1)
    kernels = list(kernels)
    if len(kernels) != arr.ndim:
        raise ValueError(f"need {arr.ndim} kernels, got {len(kernels)}")
    out = arr
    for axis, kernel in enumerate(kernels):
        out = convolve_axis(out, kernel, axis, boundary)
    return out
