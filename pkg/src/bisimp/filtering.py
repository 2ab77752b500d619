"""Separable Gaussian density filter and its exact adjoint.

The filter turns raw infill levels into the physical densities that
parameterize the stiffness matrix.  Near the domain boundary the kernel is
truncated and renormalized so every output stays a convex combination of
inputs (constants are fixed points; no void bleeds in from outside).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d


@dataclass(frozen=True)
class FilterSpec:
    """Separable Gaussian kernel: odd width `size`, std dev `sigma` in element units."""

    size: int = 7
    sigma: float = 1.5

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.size}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def gaussian_weights(spec: FilterSpec) -> np.ndarray:
    """1-D Gaussian taps, symmetric about the center and normalized to sum 1."""
    half = spec.size // 2
    x = np.arange(-half, half + 1, dtype=float)
    w = np.exp(-0.5 * (x / spec.sigma) ** 2)
    return w / w.sum()


def _axis_normalizers(field2d: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # per-row/column kernel mass after zero-padded truncation at the boundary
    ny, nx = field2d.shape
    sx = correlate1d(np.ones(nx), w, mode="constant", cval=0.0)
    sy = correlate1d(np.ones(ny), w, mode="constant", cval=0.0)
    return sx, sy


def apply_filter(field: np.ndarray, nx: int, ny: int, spec: FilterSpec) -> np.ndarray:
    """Physical densities C(v): x-pass then y-pass, truncate-and-renormalize boundaries."""
    if field.shape != (nx * ny,):
        raise ValueError(f"field has length {field.shape}, expected {nx * ny}")
    w = gaussian_weights(spec)
    g = field.reshape(ny, nx)
    sx, sy = _axis_normalizers(g, w)
    g = correlate1d(g, w, axis=1, mode="constant", cval=0.0) / sx[None, :]
    g = correlate1d(g, w, axis=0, mode="constant", cval=0.0) / sy[:, None]
    return g.ravel()


def apply_filter_adjoint(field: np.ndarray, nx: int, ny: int, spec: FilterSpec) -> np.ndarray:
    """Exact transpose Cᵀ of apply_filter, boundary renormalization included.

    The forward map factors as (Dy⁻¹ Ky)(Dx⁻¹ Kx) with symmetric zero-padded
    correlations K and diagonal renormalizers D, so the adjoint divides
    first and correlates after, in reverse pass order.
    """
    if field.shape != (nx * ny,):
        raise ValueError(f"field has length {field.shape}, expected {nx * ny}")
    w = gaussian_weights(spec)
    g = field.reshape(ny, nx)
    sx, sy = _axis_normalizers(g, w)
    g = correlate1d(g / sy[:, None], w, axis=0, mode="constant", cval=0.0)
    g = correlate1d(g / sx[None, :], w, axis=1, mode="constant", cval=0.0)
    return g.ravel()
