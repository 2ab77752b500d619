"""Independent reference implementations used as test oracles.

Everything here is deliberately slow and literal (dense assembly, direct
convolution, KKT enumeration) so it shares no code path with the package.
"""
from __future__ import annotations

import numpy as np

from bisimp.fea import GridModel, Material, element_stiffness
from bisimp.filtering import FilterSpec, gaussian_weights


def make_grid(
    nx: int,
    ny: int,
    fixed_dofs: np.ndarray | None = None,
    load: np.ndarray | None = None,
    nu: float = 0.3,
) -> GridModel:
    """Small cantilever unless explicit fixtures/load are given: left edge
    clamped, unit downward load at the right-edge mid-height node."""
    n_dofs = 2 * (nx + 1) * (ny + 1)
    if fixed_dofs is None:
        fixed_dofs = np.zeros(n_dofs, dtype=bool)
        for y in range(ny + 1):
            n = y * (nx + 1)
            fixed_dofs[2 * n] = fixed_dofs[2 * n + 1] = True
    if load is None:
        load = np.zeros(n_dofs)
        tip = (ny // 2) * (nx + 1) + nx
        load[2 * tip + 1] = -1.0
    load = np.where(fixed_dofs, 0.0, load)
    return GridModel(nx=nx, ny=ny, ke=element_stiffness(Material(1.0, nu)),
                     fixed_dofs=fixed_dofs, load=load)


def assemble_dense(grid: GridModel, a: np.ndarray, masked: bool = True) -> np.ndarray:
    """Densely assembled K(a); with masking, fixed rows/columns are zeroed."""
    k = np.zeros((grid.num_dofs, grid.num_dofs))
    for e in range(grid.num_elements):
        idx = grid.edof[e]
        k[np.ix_(idx, idx)] += a[e] * grid.ke
    if masked:
        k[grid.fixed_dofs, :] = 0.0
        k[:, grid.fixed_dofs] = 0.0
    return k


def dense_solve(grid: GridModel, a: np.ndarray) -> np.ndarray:
    """u_f from a dense factorization of the free-DOF submatrix."""
    k = assemble_dense(grid, a, masked=False)
    free = ~grid.fixed_dofs
    u = np.zeros(grid.num_dofs)
    u[free] = np.linalg.solve(k[np.ix_(free, free)], grid.load[free])
    return u


def filter_direct(field: np.ndarray, nx: int, ny: int, spec: FilterSpec) -> np.ndarray:
    """Direct 2D convolution with the separable product kernel, renormalized
    per axis exactly like the production filter (literal quadruple loop)."""
    w = gaussian_weights(spec)
    half = spec.size // 2
    g = field.reshape(ny, nx)
    out_x = np.zeros_like(g)
    for y in range(ny):
        for x in range(nx):
            num = den = 0.0
            for k in range(-half, half + 1):
                if 0 <= x + k < nx:
                    num += w[k + half] * g[y, x + k]
                    den += w[k + half]
            out_x[y, x] = num / den
    out = np.zeros_like(g)
    for y in range(ny):
        for x in range(nx):
            num = den = 0.0
            for k in range(-half, half + 1):
                if 0 <= y + k < ny:
                    num += w[k + half] * out_x[y + k, x]
                    den += w[k + half]
            out[y, x] = num / den
    return out.ravel()


def project_simplex_oracle(v: np.ndarray, lo: float, hi: float, budget: float) -> np.ndarray:
    """Bounded-simplex projection by KKT active-set enumeration.

    The solution is clamp(v − λ, lo, hi); monotonicity of clamp means the
    lower-bound set is a prefix and the upper-bound set a suffix of v sorted
    ascending, so enumerating all (prefix, suffix) pairs and checking the
    KKT conditions for each candidate λ finds the unique minimizer.
    """
    boxed = np.clip(v, lo, hi)
    if boxed.sum() <= budget:
        return boxed
    n = v.size
    order = np.argsort(v)
    vs = v[order]
    for n_lo in range(n + 1):
        for n_hi in range(n - n_lo + 1):
            mid = vs[n_lo:n - n_hi]
            if mid.size > 0:
                lam = (mid.sum() + n_lo * lo + n_hi * hi - budget) / mid.size
            else:
                if not np.isclose(n_lo * lo + n_hi * hi, budget, atol=1e-12):
                    continue
                lam_min = (vs[n - n_hi] - hi) if n_hi > 0 else -np.inf
                lam_max = (vs[n_lo - 1] - lo) if n_lo > 0 else np.inf
                lam = max(lam_min, 0.0)
                if lam > lam_max + 1e-12:
                    continue
            if lam < -1e-12:
                continue
            ok = True
            if mid.size > 0:
                if mid.min() - lam < lo - 1e-12 or mid.max() - lam > hi + 1e-12:
                    ok = False
            if n_lo > 0 and vs[n_lo - 1] - lam > lo + 1e-12:
                ok = False
            if n_hi > 0 and vs[n - n_hi] - lam < hi - 1e-12:
                ok = False
            if ok:
                return np.clip(v - lam, lo, hi)
    raise AssertionError("KKT enumeration found no consistent active set")
