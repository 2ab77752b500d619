"""Strict JSON documents for problems and solver configs.

Unknown keys are rejected everywhere: a typo in a step-size key would
otherwise silently fall back to a default and masquerade as divergence.
Parsing fills in the standard defaults (v_lo 0.1, eta 3, 7x7 filter,
Krylov dimension 20, decay exponent 0.75).
"""
from __future__ import annotations

import dataclasses
import json

from .fea import Material
from .filtering import FilterSpec
from .problems import ProblemSpec
from .solvers import SolverConfig


class DocumentError(ValueError):
    """Malformed document or invariant violation, with the offending key."""


_PROBLEM_KEYS = {
    "nx", "ny", "volume_fraction", "v_lo", "eta", "filter", "material",
    "fixtures", "loads", "passive",
}
_FILTER_KEYS = {"size", "sigma"}
_MATERIAL_KEYS = {"young_modulus", "poisson_ratio"}
_CONFIG_KEYS = {
    "algorithm", "alpha0", "m", "beta", "krylov_dim", "eta", "max_iters",
    "tol_dv", "tol_res", "snapshot_every", "seed", "mean_projection",
}


def _load(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DocumentError("document root must be a JSON object")
    return doc


def _reject_unknown(doc: dict, allowed: set, what: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise DocumentError(f"unknown {what} key(s): {sorted(unknown)}")


def parse_problem(text: str) -> ProblemSpec:
    doc = _load(text)
    _reject_unknown(doc, _PROBLEM_KEYS, "problem")
    for req in ("nx", "ny", "volume_fraction", "loads"):
        if req not in doc:
            raise DocumentError(f"missing required problem key {req!r}")
    fdoc = doc.get("filter", {})
    _reject_unknown(fdoc, _FILTER_KEYS, "filter")
    mdoc = doc.get("material", {})
    _reject_unknown(mdoc, _MATERIAL_KEYS, "material")
    try:
        return ProblemSpec(
            nx=int(doc["nx"]),
            ny=int(doc["ny"]),
            volume_fraction=float(doc["volume_fraction"]),
            v_lo=float(doc.get("v_lo", 0.1)),
            eta=float(doc.get("eta", 3.0)),
            filter=FilterSpec(size=int(fdoc.get("size", 7)), sigma=float(fdoc.get("sigma", 1.5))),
            material=Material(
                young_modulus=float(mdoc.get("young_modulus", 1.0)),
                poisson_ratio=float(mdoc.get("poisson_ratio", 0.3)),
            ),
            fixtures=tuple(doc.get("fixtures", ())),
            loads=tuple(doc["loads"]),
            passive=tuple(doc.get("passive", ())),
        )
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, DocumentError):
            raise
        raise DocumentError(str(exc)) from exc


def serialize_problem(spec: ProblemSpec) -> str:
    doc = {
        "nx": spec.nx,
        "ny": spec.ny,
        "volume_fraction": spec.volume_fraction,
        "v_lo": spec.v_lo,
        "eta": spec.eta,
        "filter": {"size": spec.filter.size, "sigma": spec.filter.sigma},
        "material": {
            "young_modulus": spec.material.young_modulus,
            "poisson_ratio": spec.material.poisson_ratio,
        },
        "fixtures": [dict(s) for s in spec.fixtures],
        "loads": [dict(s) for s in spec.loads],
        "passive": [dict(s) for s in spec.passive],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_config(text: str) -> SolverConfig:
    doc = _load(text)
    _reject_unknown(doc, _CONFIG_KEYS, "config")
    kwargs = {}
    for key in _CONFIG_KEYS:
        if key in doc and doc[key] is not None:
            kwargs[key] = doc[key]
    try:
        return SolverConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise DocumentError(str(exc)) from exc


def serialize_config(config: SolverConfig) -> str:
    return json.dumps(dataclasses.asdict(config), indent=2) + "\n"
