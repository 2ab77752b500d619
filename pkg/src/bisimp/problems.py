"""Benchmark catalog and declarative problem construction.

Geometry is declared in relative coordinates (rx, ry) in [0, 1]^2 with
ry = 0 at the top row, matching the rendered image orientation.  Fixture
and load selectors resolve to grid nodes only at a concrete resolution, so
a spec can be rescaled without touching its geometry.

Selector grammar (plain dicts, strictly validated):
    {"edge": "left"|"right"|"top"|"bottom", "span": [a, b]?, "dofs": "x"|"y"|"xy"}
    {"point": [rx, ry], "dofs": ...}
Loads use the same node selectors with "fx"/"fy" instead of "dofs"; a
multi-node selector spreads the total force equally over its nodes.
Passive regions {"rect": [x0, y0, x1, y1]} pin elements at the minimum
infill and drop them from the volume budget (used to carve the L-shape).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fea import GridModel, Material, element_stiffness
from .filtering import FilterSpec

_EDGES = ("left", "right", "top", "bottom")
_DOFS = ("x", "y", "xy")


def _check_keys(sel: dict, allowed: set[str], kind: str) -> None:
    unknown = set(sel) - allowed
    if unknown:
        raise ValueError(f"unknown {kind} selector keys: {sorted(unknown)}")


def _normalize(sel: dict) -> dict:
    """Canonical selector form so specs from files and code compare equal."""
    out = {}
    for key, val in sel.items():
        if key in ("span", "point", "rect"):
            out[key] = tuple(float(x) for x in val)
        elif key in ("fx", "fy"):
            out[key] = float(val)
        else:
            out[key] = val
    return out


def _selector_nodes(sel: dict, nx: int, ny: int) -> np.ndarray:
    """Node indices matched by an edge/point selector at resolution nx x ny."""
    if "edge" in sel:
        edge = sel["edge"]
        if edge not in _EDGES:
            raise ValueError(f"unknown edge {edge!r}")
        a, b = sel.get("span", (0.0, 1.0))
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError(f"span must satisfy 0 <= a <= b <= 1, got [{a}, {b}]")
        along = ny if edge in ("left", "right") else nx
        idx = np.arange(round(a * along), round(b * along) + 1)
        if edge == "left":
            return idx * (nx + 1)
        if edge == "right":
            return idx * (nx + 1) + nx
        if edge == "top":
            return idx
        return ny * (nx + 1) + idx
    if "point" in sel:
        rx, ry = sel["point"]
        if not (0.0 <= rx <= 1.0 and 0.0 <= ry <= 1.0):
            raise ValueError(f"point {sel['point']} outside the unit square")
        return np.array([round(ry * ny) * (nx + 1) + round(rx * nx)])
    raise ValueError("selector needs an 'edge' or 'point' key")


@dataclass
class ProblemSpec:
    """Full declarative problem: geometry, loads, fixtures, and SIMP parameters."""

    nx: int
    ny: int
    volume_fraction: float
    v_lo: float = 0.1
    eta: float = 3.0
    filter: FilterSpec = field(default_factory=FilterSpec)
    material: Material = field(default_factory=Material)
    fixtures: tuple = ()
    loads: tuple = ()
    passive: tuple = ()

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be at least 1")
        if not self.v_lo < self.volume_fraction <= 1.0:
            raise ValueError(
                f"volume_fraction must lie in ({self.v_lo}, 1], got {self.volume_fraction}"
            )
        if not self.loads:
            raise ValueError("at least one load is required")
        self.fixtures = tuple(_normalize(s) for s in self.fixtures)
        self.loads = tuple(_normalize(s) for s in self.loads)
        self.passive = tuple(_normalize(s) for s in self.passive)
        for sel in self.fixtures:
            _check_keys(sel, {"edge", "point", "span", "dofs"}, "fixture")
            if sel.get("dofs", "xy") not in _DOFS:
                raise ValueError(f"fixture dofs must be one of {_DOFS}")
        for sel in self.loads:
            _check_keys(sel, {"edge", "point", "span", "fx", "fy"}, "load")
        for reg in self.passive:
            _check_keys(reg, {"rect"}, "passive")
            x0, y0, x1, y1 = reg["rect"]
            if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
                raise ValueError(f"passive rect {reg['rect']} is not a valid sub-rectangle")

    @property
    def num_elements(self) -> int:
        return self.nx * self.ny

    def scale(self, factor: float) -> "ProblemSpec":
        """Same geometry at a scaled resolution (relative positions preserved)."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return replace(self, nx=max(1, round(self.nx * factor)), ny=max(1, round(self.ny * factor)))

    def passive_mask(self) -> np.ndarray:
        """Boolean mask over elements, True where pinned at v_lo."""
        mask = np.zeros((self.ny, self.nx), dtype=bool)
        for reg in self.passive:
            x0, y0, x1, y1 = reg["rect"]
            mask[round(y0 * self.ny):round(y1 * self.ny),
                 round(x0 * self.nx):round(x1 * self.nx)] = True
        return mask.ravel()

    def volume_budget(self) -> float:
        """Total-volume bound over all elements, passive pinned material included."""
        n_passive = int(self.passive_mask().sum())
        return self.volume_fraction * (self.num_elements - n_passive) + self.v_lo * n_passive


def resolve(spec: ProblemSpec) -> GridModel:
    """Assemble the fixed-DOF mask and the 2-norm-normalized load vector."""
    n_dofs = 2 * (spec.nx + 1) * (spec.ny + 1)
    fixed = np.zeros(n_dofs, dtype=bool)
    for sel in spec.fixtures:
        nodes = _selector_nodes(sel, spec.nx, spec.ny)
        dofs = sel.get("dofs", "xy")
        if dofs in ("x", "xy"):
            fixed[2 * nodes] = True
        if dofs in ("y", "xy"):
            fixed[2 * nodes + 1] = True
    if int(fixed.sum()) < 3:
        raise ValueError("fixtures resolve to fewer than 3 fixed DOFs")
    load = np.zeros(n_dofs)
    for sel in spec.loads:
        nodes = _selector_nodes(sel, spec.nx, spec.ny)
        fx = sel.get("fx", 0.0) / nodes.size
        fy = sel.get("fy", 0.0) / nodes.size
        load[2 * nodes] += fx
        load[2 * nodes + 1] += fy
    load[fixed] = 0.0
    norm = np.linalg.norm(load)
    if norm == 0.0:
        raise ValueError("load vanishes after removing fixed DOFs")
    load /= norm
    return GridModel(nx=spec.nx, ny=spec.ny, ke=element_stiffness(spec.material),
                     fixed_dofs=fixed, load=load)


def catalog() -> dict[str, ProblemSpec]:
    """The eight named benchmarks with their native resolutions and fractions.

    Each entry is the canonical construction for its family (cantilevers,
    simply supported bridges, a Michell-style arch, an L-bracket)::

        teaser / cantilever        bridge_a/c/d           bridge_b
        #|=========               =========== o          ....o....
        #|========= <-f           =====|===== |f         =========
        #|=========               ^   f v    ^           ^.......^

        michell                    lshape
        ===========               ###
        ===========               ###      (### clamped top edge,
        .^...|f...^.              ###==      = load at arm tip,
                                  ====== <-f    right block passive)

    Loads bear on short edge spans rather than single nodes: a point load
    on a continuum is singular, and the resulting one-element energy spike
    destabilizes the inexact early iterations far more than it changes the
    optimized shape.  Spans stay fixed fractions of the edge, so scaled
    problems remain the same problem.
    """
    entries = {
        "teaser": ProblemSpec(
            nx=256, ny=128, volume_fraction=0.4,
            fixtures=({"edge": "left", "dofs": "xy"},),
            loads=({"edge": "right", "span": (0.94, 1.0), "fy": -1.0},),
        ),
        "bridge_c": ProblemSpec(
            nx=576, ny=192, volume_fraction=0.3,
            fixtures=({"point": (0.0, 1.0), "dofs": "xy"}, {"point": (1.0, 1.0), "dofs": "y"}),
            loads=({"edge": "bottom", "span": (0.45, 0.55), "fy": -1.0},),
        ),
        "bridge_d": ProblemSpec(
            nx=576, ny=192, volume_fraction=0.3,
            fixtures=({"point": (0.0, 1.0), "dofs": "xy"}, {"point": (1.0, 1.0), "dofs": "y"}),
            loads=(
                {"edge": "bottom", "span": (0.30, 0.37), "fy": -0.5},
                {"edge": "bottom", "span": (0.63, 0.70), "fy": -0.5},
            ),
        ),
        "bridge_b": ProblemSpec(
            nx=384, ny=192, volume_fraction=0.3,
            fixtures=(
                {"edge": "bottom", "span": (0.0, 0.05), "dofs": "xy"},
                {"edge": "bottom", "span": (0.95, 1.0), "dofs": "y"},
            ),
            loads=({"edge": "top", "span": (0.47, 0.53), "fy": -1.0},),
        ),
        "michell": ProblemSpec(
            nx=240, ny=160, volume_fraction=0.4,
            fixtures=({"point": (0.1, 1.0), "dofs": "xy"}, {"point": (0.9, 1.0), "dofs": "y"}),
            loads=({"edge": "bottom", "span": (0.47, 0.53), "fy": -1.0},),
        ),
        "lshape": ProblemSpec(
            nx=160, ny=160, volume_fraction=0.5,
            fixtures=({"edge": "top", "span": (0.0, 0.4), "dofs": "xy"},),
            loads=({"edge": "right", "span": (0.6, 0.675), "fy": -1.0},),
            passive=({"rect": (0.4, 0.0, 1.0, 0.6)},),
        ),
        "bridge_a": ProblemSpec(
            nx=384, ny=128, volume_fraction=0.5,
            fixtures=({"point": (0.0, 1.0), "dofs": "xy"}, {"point": (1.0, 1.0), "dofs": "y"}),
            loads=({"edge": "bottom", "span": (0.47, 0.53), "fy": -1.0},),
        ),
        "cantilever": ProblemSpec(
            nx=256, ny=128, volume_fraction=0.3,
            fixtures=({"edge": "left", "dofs": "xy"},),
            loads=({"edge": "right", "span": (0.47, 0.53), "fy": -1.0},),
        ),
    }
    return entries
