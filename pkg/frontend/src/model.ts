/** Editor state and its serialization to the problem document the backend
 * accepts. The document is the single source of truth: the same bytes drive
 * the service and the batch CLI. */

export type Dofs = "x" | "y" | "xy";
export type Edge = "left" | "right" | "top" | "bottom";

export interface FixtureStroke {
  edge?: Edge;
  span?: [number, number];
  point?: [number, number];
  dofs: Dofs;
}

export interface LoadArrow {
  edge?: Edge;
  span?: [number, number];
  point?: [number, number];
  fx: number;
  fy: number;
}

export interface PassiveRect {
  rect: [number, number, number, number];
}

export interface SolverParams {
  algorithm: "cpfbto_krylov" | "fbto" | "pfbto_jacobi" | "pgd_exact";
  alpha0: number | null;
  krylov_dim: number;
  max_iters: number;
  snapshot_every: number;
}

const clamp01 = (x: number) => Math.min(1, Math.max(0, x));
const round3 = (x: number) => Math.round(x * 1000) / 1000;

export class EditorModel {
  nx = 64;
  ny = 64;
  volumeFraction = 0.4;
  fixtures: FixtureStroke[] = [];
  loads: LoadArrow[] = [];
  passive: PassiveRect[] = [];
  params: SolverParams = {
    algorithm: "cpfbto_krylov",
    alpha0: null,
    krylov_dim: 20,
    max_iters: 50000,
    snapshot_every: 10,
  };

  setGrid(nx: number, ny: number): void {
    if (!Number.isInteger(nx) || !Number.isInteger(ny) || nx < 1 || ny < 1) {
      throw new Error(`grid must be positive integers, got ${nx}x${ny}`);
    }
    this.nx = nx;
    this.ny = ny;
  }

  setVolumeFraction(phi: number): void {
    if (!(phi > 0.1 && phi <= 1.0)) {
      throw new Error(`volume fraction must lie in (0.1, 1], got ${phi}`);
    }
    this.volumeFraction = phi;
  }

  fixEdgeSpan(edge: Edge, a: number, b: number, dofs: Dofs = "xy"): void {
    const lo = round3(clamp01(Math.min(a, b)));
    const hi = round3(clamp01(Math.max(a, b)));
    this.fixtures.push({ edge, span: [lo, hi], dofs });
  }

  addLoadAtPoint(rx: number, ry: number, fx: number, fy: number): void {
    this.loads.push({ point: [round3(clamp01(rx)), round3(clamp01(ry))], fx, fy });
  }

  addLoadOnSpan(edge: Edge, a: number, b: number, fx: number, fy: number): void {
    const lo = round3(clamp01(Math.min(a, b)));
    const hi = round3(clamp01(Math.max(a, b)));
    this.loads.push({ edge, span: [lo, hi], fx, fy });
  }

  addPassiveRect(x0: number, y0: number, x1: number, y1: number): void {
    const rect: [number, number, number, number] = [
      round3(clamp01(Math.min(x0, x1))),
      round3(clamp01(Math.min(y0, y1))),
      round3(clamp01(Math.max(x0, x1))),
      round3(clamp01(Math.max(y0, y1))),
    ];
    if (rect[0] >= rect[2] || rect[1] >= rect[3]) {
      throw new Error("passive rectangle is degenerate");
    }
    this.passive.push({ rect });
  }

  clearMarks(): void {
    this.fixtures = [];
    this.loads = [];
    this.passive = [];
  }

  /** The problem document body for PUT /problem (and the batch CLI). */
  serializeProblem(): string {
    if (this.loads.length === 0) {
      throw new Error("paint at least one load before running");
    }
    if (this.fixtures.length === 0) {
      throw new Error("paint at least one fixture before running");
    }
    const doc = {
      nx: this.nx,
      ny: this.ny,
      volume_fraction: this.volumeFraction,
      fixtures: this.fixtures.map(fixtureJson),
      loads: this.loads.map(loadJson),
      passive: this.passive.map((p) => ({ rect: p.rect })),
    };
    return JSON.stringify(doc, null, 2) + "\n";
  }

  /** The config subset sent via PATCH /config before a run starts. */
  configPatch(): Record<string, unknown> {
    const patch: Record<string, unknown> = {
      algorithm: this.params.algorithm,
      krylov_dim: this.params.krylov_dim,
      max_iters: this.params.max_iters,
      snapshot_every: this.params.snapshot_every,
    };
    if (this.params.alpha0 !== null) {
      patch.alpha0 = this.params.alpha0;
    }
    return patch;
  }
}

function fixtureJson(f: FixtureStroke): Record<string, unknown> {
  const out: Record<string, unknown> = { dofs: f.dofs };
  if (f.edge !== undefined) {
    out.edge = f.edge;
    if (f.span) out.span = f.span;
  } else if (f.point) {
    out.point = f.point;
  }
  return out;
}

function loadJson(l: LoadArrow): Record<string, unknown> {
  const out: Record<string, unknown> = { fx: l.fx, fy: l.fy };
  if (l.edge !== undefined) {
    out.edge = l.edge;
    if (l.span) out.span = l.span;
  } else if (l.point) {
    out.point = l.point;
  }
  return out;
}
