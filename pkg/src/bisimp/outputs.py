"""File emission: density snapshots (PGM), convergence logs (CSV), summaries.

All writers are byte-deterministic for a deterministic record: floats are
formatted with repr (shortest round-trip form), lines end with LF, and the
PGM pixel mapping is fixed to round-half-up of 255·(1 − density) so solid
material renders black.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .solvers import ConvergenceRecord, RunResult, SolverConfig

CSV_HEADER = "iter,elapsed_s,compliance,residual_inf,dv_inf,volume"


def write_snapshot(v_phys: np.ndarray, nx: int, ny: int, path) -> None:
    """Binary PGM (P5, maxval 255), rows top to bottom, solid = black."""
    if v_phys.shape != (nx * ny,):
        raise ValueError(f"field has length {v_phys.shape}, expected {nx * ny}")
    if v_phys.min() < 0.0 or v_phys.max() > 1.0:
        raise ValueError("density values must lie in [0, 1]")
    pixels = np.floor(255.0 * (1.0 - v_phys) + 0.5).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_convergence(record: ConvergenceRecord, path) -> None:
    """CSV with one row per logged iteration; floats keep full precision."""
    lines = [CSV_HEADER]
    for k, elapsed, compliance, residual, dv, volume in record.rows():
        lines.append(f"{k},{elapsed!r},{compliance!r},{residual!r},{dv!r},{volume!r}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


@dataclasses.dataclass
class RunSummary:
    """Table-style run report; numbers match the final convergence row."""

    reason: str
    iterations: int
    elapsed_s: float
    compliance: float
    volume: float
    residual_inf: float
    config: dict

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"


def summarize(result: RunResult, config: SolverConfig) -> RunSummary:
    state = result.state
    if len(result.record):
        elapsed = result.record.elapsed_s[-1]
    else:
        elapsed = 0.0
    return RunSummary(
        reason=result.reason,
        iterations=state.iter,
        elapsed_s=elapsed,
        compliance=state.compliance,
        volume=state.volume,
        residual_inf=state.residual_inf,
        config=dataclasses.asdict(config),
    )


def write_summary(summary: RunSummary, path) -> None:
    Path(path).write_bytes(summary.to_json().encode("ascii"))
