/** Density heatmap rendering: grayscale with solid material black, matching
 * the PGM snapshot convention. */

export function densityToGray(v: number): number {
  const clamped = Math.min(1, Math.max(0, v));
  return Math.round(255 * (1 - clamped));
}

export function renderDensity(
  canvas: HTMLCanvasElement,
  values: Float32Array,
  nx: number,
  ny: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const image = ctx.createImageData(nx, ny);
  for (let i = 0; i < nx * ny; i++) {
    const gray = densityToGray(values[i]);
    image.data[4 * i] = gray;
    image.data[4 * i + 1] = gray;
    image.data[4 * i + 2] = gray;
    image.data[4 * i + 3] = 255;
  }
  // draw at element resolution, then scale to the canvas with crisp pixels
  const off = document.createElement("canvas");
  off.width = nx;
  off.height = ny;
  off.getContext("2d")!.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}
