/** Convergence chart: compliance (log scale) against iteration, decimated
 * so redraws stay O(1) regardless of run length. */

export interface ChartPoint {
  iter: number;
  value: number;
}

export const MAX_POINTS = 2000;

/** Uniform-stride decimation that always keeps the first and last points. */
export function decimate(points: ChartPoint[], maxPoints: number = MAX_POINTS): ChartPoint[] {
  if (points.length <= maxPoints) {
    return points.slice();
  }
  const stride = (points.length - 1) / (maxPoints - 1);
  const out: ChartPoint[] = [];
  for (let i = 0; i < maxPoints; i++) {
    out.push(points[Math.round(i * stride)]);
  }
  return out;
}

export class ConvergenceChart {
  private points: ChartPoint[] = [];

  constructor(private canvas: HTMLCanvasElement) {}

  clear(): void {
    this.points = [];
    this.draw();
  }

  append(iter: number, value: number): void {
    const last = this.points[this.points.length - 1];
    if (last && iter <= last.iter) {
      return; // stale or duplicate frame
    }
    this.points.push({ iter, value });
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, width, height);
    const pts = decimate(this.points).filter((p) => p.value > 0);
    if (pts.length < 2) return;

    const xMax = pts[pts.length - 1].iter;
    const logs = pts.map((p) => Math.log10(p.value));
    const yMin = Math.min(...logs);
    const yMax = Math.max(...logs);
    const ySpan = yMax - yMin || 1;
    const pad = 8;

    ctx.strokeStyle = "#1565c0";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    pts.forEach((p, i) => {
      const x = pad + ((width - 2 * pad) * p.iter) / Math.max(xMax, 1);
      const y = height - pad - ((height - 2 * pad) * (Math.log10(p.value) - yMin)) / ySpan;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = "#444444";
    ctx.font = "11px sans-serif";
    ctx.fillText(`compliance ${pts[pts.length - 1].value.toPrecision(5)}  iter ${xMax}`, pad, 12);
  }
}
