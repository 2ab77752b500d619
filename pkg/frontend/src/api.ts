/** Thin client for the preview service: REST verbs plus the frame stream. */

import { FrameHeader, parseHeader, decodePayload } from "./frames.js";

export interface SessionState {
  status: string;
  iter: number;
  compliance: number;
  residual_inf: number;
  volume: number;
  error?: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      detail = (await response.json()).detail ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return response;
}

export class PreviewClient {
  constructor(private base: string = "") {}

  async createSession(): Promise<string> {
    const response = await expectOk(await fetch(`${this.base}/api/session`, { method: "POST" }));
    return (await response.json()).session_id;
  }

  async putProblem(sessionId: string, document: string): Promise<void> {
    await expectOk(await fetch(`${this.base}/api/session/${sessionId}/problem`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: document,
    }));
  }

  async verb(sessionId: string, verb: "start" | "pause" | "resume" | "reset"): Promise<void> {
    await expectOk(await fetch(`${this.base}/api/session/${sessionId}/${verb}`, { method: "POST" }));
  }

  async patchConfig(sessionId: string, patch: Record<string, unknown>): Promise<void> {
    await expectOk(await fetch(`${this.base}/api/session/${sessionId}/config`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    }));
  }

  async state(sessionId: string): Promise<SessionState> {
    const response = await expectOk(await fetch(`${this.base}/api/session/${sessionId}/state`));
    return (await response.json()) as SessionState;
  }

  /** Message stream: one JSON header, then one binary density frame. */
  openStream(
    sessionId: string,
    onFrame: (header: FrameHeader, values: Float32Array) => void,
    onError: (message: string) => void,
  ): WebSocket {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${scheme}://${location.host}/api/session/${sessionId}/stream`);
    ws.binaryType = "arraybuffer";
    let pending: FrameHeader | null = null;
    ws.onmessage = (event) => {
      try {
        if (typeof event.data === "string") {
          pending = parseHeader(event.data);
        } else if (pending) {
          const header = pending;
          pending = null;
          onFrame(header, decodePayload(header, event.data as ArrayBuffer));
        }
      } catch (err) {
        onError(err instanceof Error ? err.message : String(err));
      }
    };
    return ws;
  }
}
