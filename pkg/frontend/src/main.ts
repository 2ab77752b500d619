/** Page wiring for the design loop: paint the problem, steer the run, watch
 * the live density and convergence history. */

import { PreviewClient, ApiError } from "./api.js";
import { ConvergenceChart } from "./chart.js";
import { FrameGate } from "./frames.js";
import { renderDensity } from "./heatmap.js";
import { EditorModel, Edge } from "./model.js";

type Tool = "fix" | "load" | "void" | "none";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function toast(message: string): void {
  const el = $("toast");
  el.textContent = message;
  el.classList.add("visible");
  window.setTimeout(() => el.classList.remove("visible"), 4000);
}

function edgeNear(rx: number, ry: number): Edge | null {
  const margin = 0.08;
  if (rx < margin) return "left";
  if (rx > 1 - margin) return "right";
  if (ry < margin) return "top";
  if (ry > 1 - margin) return "bottom";
  return null;
}

class EditorView {
  private drag: { rx: number; ry: number } | null = null;
  tool: Tool = "fix";

  constructor(private canvas: HTMLCanvasElement, private model: EditorModel,
              private onEdit: () => void) {
    canvas.addEventListener("mousedown", (e) => (this.drag = this.relative(e)));
    canvas.addEventListener("mouseup", (e) => {
      if (this.drag) this.applyStroke(this.drag, this.relative(e));
      this.drag = null;
    });
  }

  private relative(e: MouseEvent): { rx: number; ry: number } {
    const rect = this.canvas.getBoundingClientRect();
    return {
      rx: (e.clientX - rect.left) / rect.width,
      ry: (e.clientY - rect.top) / rect.height,
    };
  }

  private applyStroke(a: { rx: number; ry: number }, b: { rx: number; ry: number }): void {
    try {
      if (this.tool === "fix") {
        const edge = edgeNear(a.rx, a.ry);
        if (!edge) {
          toast("drag along a domain edge to clamp it");
          return;
        }
        const axis = edge === "left" || edge === "right" ? [a.ry, b.ry] : [a.rx, b.rx];
        this.model.fixEdgeSpan(edge, axis[0], axis[1]);
      } else if (this.tool === "load") {
        const edge = edgeNear(b.rx, b.ry);
        if (edge) {
          const axis = edge === "left" || edge === "right" ? [b.ry - 0.03, b.ry + 0.03]
                                                           : [b.rx - 0.03, b.rx + 0.03];
          this.model.addLoadOnSpan(edge, axis[0], axis[1], 0, -1);
        } else {
          this.model.addLoadAtPoint(b.rx, b.ry, 0, -1);
        }
      } else if (this.tool === "void") {
        this.model.addPassiveRect(a.rx, a.ry, b.rx, b.ry);
      }
      this.onEdit();
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
    this.redraw();
  }

  redraw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#f4f4f4";
    ctx.fillRect(0, 0, width, height);
    ctx.strokeStyle = "#bbbbbb";
    ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
    ctx.fillStyle = "rgba(120,120,120,0.55)";
    for (const p of this.model.passive) {
      const [x0, y0, x1, y1] = p.rect;
      ctx.fillRect(x0 * width, y0 * height, (x1 - x0) * width, (y1 - y0) * height);
    }
    ctx.strokeStyle = "#8d4f00";
    ctx.lineWidth = 5;
    for (const f of this.model.fixtures) {
      if (!f.edge || !f.span) continue;
      ctx.beginPath();
      const [a, b] = f.span;
      if (f.edge === "left") { ctx.moveTo(2, a * height); ctx.lineTo(2, b * height); }
      if (f.edge === "right") { ctx.moveTo(width - 2, a * height); ctx.lineTo(width - 2, b * height); }
      if (f.edge === "top") { ctx.moveTo(a * width, 2); ctx.lineTo(b * width, 2); }
      if (f.edge === "bottom") { ctx.moveTo(a * width, height - 2); ctx.lineTo(b * width, height - 2); }
      ctx.stroke();
    }
    ctx.strokeStyle = "#c62828";
    ctx.fillStyle = "#c62828";
    ctx.lineWidth = 2;
    for (const l of this.model.loads) {
      let [cx, cy] = [0.5, 0.5];
      if (l.point) [cx, cy] = l.point;
      else if (l.edge && l.span) {
        const mid = (l.span[0] + l.span[1]) / 2;
        cx = l.edge === "left" ? 0 : l.edge === "right" ? 1 : mid;
        cy = l.edge === "top" ? 0 : l.edge === "bottom" ? 1 : mid;
      }
      const x = cx * width;
      const y = cy * height;
      const len = 22 * Math.sign(l.fy || 1);
      ctx.beginPath();
      ctx.moveTo(x, y - len);
      ctx.lineTo(x, y);
      ctx.stroke();
      ctx.beginPath();
      ctx.moveTo(x, y + 4);
      ctx.lineTo(x - 4, y - 4);
      ctx.lineTo(x + 4, y - 4);
      ctx.closePath();
      ctx.fill();
    }
  }
}

async function boot(): Promise<void> {
  const client = new PreviewClient();
  const model = new EditorModel();
  const chart = new ConvergenceChart($("chart") as HTMLCanvasElement);
  const heatmap = $("heatmap") as HTMLCanvasElement;
  const gate = new FrameGate();
  let dirty = true;

  const editor = new EditorView($("editor") as HTMLCanvasElement, model, () => (dirty = true));
  editor.redraw();

  const sessionId = await client.createSession();
  $("session-label").textContent = sessionId;

  client.openStream(sessionId, (header, values) => {
    gate.offer(header, values);
  }, toast);

  const tick = () => {
    const frame = gate.take();
    if (frame) {
      renderDensity(heatmap, frame.values, frame.header.nx, frame.header.ny);
      chart.append(frame.header.iter, frame.header.compliance);
    }
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);

  const pollState = async () => {
    try {
      const state = await client.state(sessionId);
      $("status-label").textContent =
        `${state.status}  iter ${state.iter}  compliance ${state.compliance.toPrecision(5)}` +
        (state.error ? `  (${state.error})` : "");
    } catch {
      $("status-label").textContent = "service unreachable";
    }
    window.setTimeout(pollState, 500);
  };
  pollState();

  const readParams = () => {
    model.setGrid(Number(($("nx") as HTMLInputElement).value),
                  Number(($("ny") as HTMLInputElement).value));
    model.setVolumeFraction(Number(($("volfrac") as HTMLInputElement).value));
    model.params.algorithm = ($("algo") as HTMLSelectElement).value as
      typeof model.params.algorithm;
    const alpha0 = ($("alpha0") as HTMLInputElement).value.trim();
    model.params.alpha0 = alpha0 === "" ? null : Number(alpha0);
    model.params.krylov_dim = Number(($("krylov") as HTMLInputElement).value);
    model.params.snapshot_every = Number(($("snapshot") as HTMLInputElement).value);
  };

  const guard = (action: () => Promise<void>) => async () => {
    try {
      await action();
    } catch (err) {
      if (err instanceof ApiError) toast(`${err.status}: ${err.message}`);
      else toast(String(err));
    }
  };

  for (const tool of ["fix", "load", "void"] as const) {
    $(`tool-${tool}`).addEventListener("click", () => {
      editor.tool = tool;
      document.querySelectorAll(".tool").forEach((b) => b.classList.remove("active"));
      $(`tool-${tool}`).classList.add("active");
    });
  }
  $("tool-clear").addEventListener("click", () => {
    model.clearMarks();
    dirty = true;
    editor.redraw();
  });

  $("btn-start").addEventListener("click", guard(async () => {
    readParams();
    if (dirty) {
      await client.putProblem(sessionId, model.serializeProblem());
      dirty = false;
    }
    await client.patchConfig(sessionId, model.configPatch());
    chart.clear();
    await client.verb(sessionId, "start");
  }));
  $("btn-pause").addEventListener("click", guard(() => client.verb(sessionId, "pause")));
  $("btn-resume").addEventListener("click", guard(() => client.verb(sessionId, "resume")));
  $("btn-reset").addEventListener("click", guard(async () => {
    await client.verb(sessionId, "reset");
    chart.clear();
    const ctx = heatmap.getContext("2d");
    if (ctx) {
      ctx.fillStyle = "#ffffff";
      ctx.fillRect(0, 0, heatmap.width, heatmap.height);
    }
    dirty = true;
  }));
  $("btn-alpha").addEventListener("click", guard(async () => {
    const alpha0 = Number(($("alpha0") as HTMLInputElement).value);
    await client.patchConfig(sessionId, { alpha0 });
    toast(`alpha0 -> ${alpha0} at the next iteration boundary`);
  }));
}

boot().catch((err) => toast(String(err)));
