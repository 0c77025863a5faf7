"""Discrete 2D fields and the matrix-free operators built on them.

Conventions used throughout the package:

* A scalar field is a 2D ``float64`` array of shape ``(height, width)``,
  indexed ``f[j, i]`` with ``i`` the column (x) and ``j`` the row (y).
  Intensities are nominally in ``[0, 1]`` but the range is not enforced.
* Grid spacing is 1 in both directions.
* All difference operators use forward differences with a replicate
  (clamp-to-edge) boundary: the forward difference in the last column/row
  is zero, and convolution reads out-of-range samples from the nearest
  edge pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np


class Boundary(Enum):
    """Boundary extension rule for stencils and convolution."""

    REPLICATE = "replicate"


class VectorField(NamedTuple):
    """Pair of equally sized scalar fields, e.g. a gradient or a flow (u, v)."""

    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class Kernel:
    """Small 2D stencil with odd dimensions, anchored at its center pixel.

    Applied correlation-style: ``out[j, i] = sum_ab w[b, a] * f[j+b-cy, i+a-cx]``
    with indices clamped to the image (replicate boundary).
    """

    weights: np.ndarray = field()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("kernel weights must be a 2D array")
        kh, kw = w.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"kernel dimensions must be odd, got {kh}x{kw}")
        if not np.all(np.isfinite(w)):
            raise ValueError("kernel weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    @classmethod
    def delta(cls, size: int = 1) -> "Kernel":
        """Identity kernel: 1 at the anchor, 0 elsewhere."""
        w = np.zeros((size, size))
        w[size // 2, size // 2] = 1.0
        return cls(w)

    @classmethod
    def box(cls, size: int = 3) -> "Kernel":
        """Uniform averaging kernel of the given odd size."""
        return cls(np.full((size, size), 1.0 / (size * size)))

    @classmethod
    def binomial3(cls) -> "Kernel":
        """Separable [1,2,1]/4 x [1,2,1]/4 smoothing kernel."""
        r = np.array([1.0, 2.0, 1.0]) / 4.0
        return cls(np.outer(r, r))

    @classmethod
    def gaussian(cls, size: int = 3, sigma: float = 0.8) -> "Kernel":
        """Sampled, normalized Gaussian."""
        half = size // 2
        x = np.arange(-half, half + 1, dtype=np.float64)
        r = np.exp(-0.5 * (x / sigma) ** 2)
        w = np.outer(r, r)
        return cls(w / w.sum())

    @classmethod
    def motion_horizontal(cls, size: int = 3) -> "Kernel":
        """Horizontal motion blur: uniform weights along the center row."""
        w = np.zeros((size, size))
        w[size // 2, :] = 1.0 / size
        return cls(w)

    @classmethod
    def motion_vertical(cls, size: int = 3) -> "Kernel":
        w = np.zeros((size, size))
        w[:, size // 2] = 1.0 / size
        return cls(w)


def ensure_field(f: np.ndarray) -> np.ndarray:
    """Coerce to a 2D float64 array, rejecting non-finite values."""
    a = np.asarray(f, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D field, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("field contains non-finite values")
    return a


def gradient(f: np.ndarray) -> VectorField:
    """Forward-difference gradient with zero differences at the last column/row.

    Returns ``(u, v)`` with ``u[j, i] = f[j, i+1] - f[j, i]`` (x direction)
    and ``v[j, i] = f[j+1, i] - f[j, i]`` (y direction).
    """
    f = np.asarray(f, dtype=np.float64)
    u = np.zeros_like(f)
    v = np.zeros_like(f)
    u[:, :-1] = f[:, 1:] - f[:, :-1]
    v[:-1, :] = f[1:, :] - f[:-1, :]
    return VectorField(u, v)


def divergence(p: VectorField) -> np.ndarray:
    """Backward-difference divergence, the exact negative adjoint of `gradient`.

    Satisfies ``inner(gradient(f).u, p.u) + inner(gradient(f).v, p.v)
    == -inner(f, divergence(p))`` for all fields.
    """
    u = np.asarray(p.u, dtype=np.float64)
    v = np.asarray(p.v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vector field components differ: {u.shape} vs {v.shape}")
    h, w = u.shape
    out = np.zeros_like(u)
    if w > 1:
        out[:, 0] += u[:, 0]
        out[:, 1 : w - 1] += u[:, 1 : w - 1] - u[:, : w - 2]
        out[:, w - 1] += -u[:, w - 2]
    if h > 1:
        out[0, :] += v[0, :]
        out[1 : h - 1, :] += v[1 : h - 1, :] - v[: h - 2, :]
        out[h - 1, :] += -v[h - 2, :]
    return out


def _clamped_axes(shape, kernel_shape):
    """Per-tap clamped index arrays implementing the replicate boundary."""
    h, w = shape
    kh, kw = kernel_shape
    cy, cx = kh // 2, kw // 2
    rows = [np.clip(np.arange(h) + (b - cy), 0, h - 1) for b in range(kh)]
    cols = [np.clip(np.arange(w) + (a - cx), 0, w - 1) for a in range(kw)]
    return rows, cols


def convolve(f: np.ndarray, kernel: Kernel, boundary: Boundary = Boundary.REPLICATE) -> np.ndarray:
    """Apply the kernel to the field (correlation-style, replicate boundary).

    Direct spatial-domain evaluation, linear in ``f``; the delta kernel is
    the exact identity.
    """
    if boundary is not Boundary.REPLICATE:
        raise ValueError(f"unsupported boundary rule {boundary!r}")
    f = np.asarray(f, dtype=np.float64)
    w = kernel.weights
    rows, cols = _clamped_axes(f.shape, w.shape)
    out = np.zeros_like(f)
    for b in range(w.shape[0]):
        fb = f[rows[b], :]
        for a in range(w.shape[1]):
            if w[b, a] != 0.0:
                out += w[b, a] * fb[:, cols[a]]
    return out


def convolve_adjoint(
    f: np.ndarray, kernel: Kernel, boundary: Boundary = Boundary.REPLICATE
) -> np.ndarray:
    """Exact adjoint of `convolve` under the same boundary rule.

    Scatters each tap's contribution back to its clamped source pixel, so
    ``inner(convolve(x, k), y) == inner(x, convolve_adjoint(y, k))`` holds
    to rounding for all x, y.
    """
    if boundary is not Boundary.REPLICATE:
        raise ValueError(f"unsupported boundary rule {boundary!r}")
    f = np.asarray(f, dtype=np.float64)
    w = kernel.weights
    rows, cols = _clamped_axes(f.shape, w.shape)
    out = np.zeros_like(f)
    for b in range(w.shape[0]):
        jr = rows[b][:, None]
        for a in range(w.shape[1]):
            if w[b, a] != 0.0:
                np.add.at(out, (jr, cols[a][None, :]), w[b, a] * f)
    return out


def inner(f: np.ndarray, g: np.ndarray) -> float:
    """Euclidean inner product of two equally sized fields."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    return float(np.dot(f.ravel(), g.ravel()))


def norm2(f: np.ndarray) -> float:
    """Euclidean norm."""
    f = np.asarray(f, dtype=np.float64)
    return float(np.sqrt(np.dot(f.ravel(), f.ravel())))


def norm1(f: np.ndarray) -> float:
    """Sum of absolute values."""
    return float(np.sum(np.abs(np.asarray(f, dtype=np.float64))))
