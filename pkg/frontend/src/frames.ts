/** Stream frame decoding: a JSON header message announces one binary
 * message of row-major little-endian float32 densities. */

export interface FrameHeader {
  iter: number;
  compliance: number;
  residual_inf: number;
  volume: number;
  nx: number;
  ny: number;
  encoding: string;
}

export class FrameFormatError extends Error {}

export function parseHeader(text: string): FrameHeader {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new FrameFormatError("header is not valid JSON");
  }
  const h = raw as FrameHeader;
  for (const key of ["iter", "compliance", "residual_inf", "volume", "nx", "ny"] as const) {
    if (typeof h[key] !== "number") {
      throw new FrameFormatError(`header field ${key} missing or not a number`);
    }
  }
  if (h.encoding !== "f32le") {
    throw new FrameFormatError(`unsupported encoding ${String(h.encoding)}`);
  }
  return h;
}

export function decodePayload(header: FrameHeader, payload: ArrayBuffer): Float32Array {
  const expected = 4 * header.nx * header.ny;
  if (payload.byteLength !== expected) {
    throw new FrameFormatError(
      `payload is ${payload.byteLength} bytes, expected ${expected} for ` +
      `${header.nx}x${header.ny}`,
    );
  }
  const view = new DataView(payload);
  const out = new Float32Array(header.nx * header.ny);
  for (let i = 0; i < out.length; i++) {
    out[i] = view.getFloat32(4 * i, true);
  }
  return out;
}

/** Keeps only the newest frame between animation ticks (latest wins). */
export class FrameGate {
  private pending: { header: FrameHeader; values: Float32Array } | null = null;

  offer(header: FrameHeader, values: Float32Array): void {
    this.pending = { header, values };
  }

  take(): { header: FrameHeader; values: Float32Array } | null {
    const out = this.pending;
    this.pending = null;
    return out;
  }
}
