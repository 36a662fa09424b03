/**
 * Canvas helpers: map a click on a scaled <img> back to image pixel
 * coordinates, and paint the server's receptive-field overlay PNG on top.
 */

export interface ClickMap {
  displayWidth: number;
  displayHeight: number;
  imageWidth: number;
  imageHeight: number;
}

/** Pixel coordinates of a click, or null when outside the image area. */
export function clickToPixel(
  offsetX: number,
  offsetY: number,
  map: ClickMap,
): { x: number; y: number } | null {
  if (map.displayWidth <= 0 || map.displayHeight <= 0) return null;
  if (offsetX < 0 || offsetY < 0 || offsetX >= map.displayWidth || offsetY >= map.displayHeight) {
    return null;
  }
  const x = Math.floor((offsetX / map.displayWidth) * map.imageWidth);
  const y = Math.floor((offsetY / map.displayHeight) * map.imageHeight);
  if (x < 0 || y < 0 || x >= map.imageWidth || y >= map.imageHeight) return null;
  return { x, y };
}

/** Draw the overlay blob onto the canvas, replacing previous content. */
export async function paintOverlay(canvas: HTMLCanvasElement, overlay: Blob): Promise<void> {
  const bitmap = await createImageBitmap(overlay);
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(bitmap, 0, 0);
}

export function clearOverlay(canvas: HTMLCanvasElement): void {
  const ctx = canvas.getContext("2d");
  if (ctx) ctx.clearRect(0, 0, canvas.width, canvas.height);
}
