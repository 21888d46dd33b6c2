// Display-scale math. Crosshairs are positioned in float screen
// coordinates (pixel-center convention), so mapping a stored point to the
// screen and back is drift-free at any zoom.

export function fitScale(
  imageW: number,
  imageH: number,
  maxW: number,
  maxH: number,
): number {
  return Math.min(maxW / imageW, maxH / imageH);
}

export function imageToScreen(
  x: number,
  y: number,
  scale: number,
): { sx: number; sy: number } {
  return { sx: (x + 0.5) * scale, sy: (y + 0.5) * scale };
}

export function screenToImage(
  sx: number,
  sy: number,
  scale: number,
): { x: number; y: number } {
  return { x: sx / scale - 0.5, y: sy / scale - 0.5 };
}

export function roundTripError(x: number, y: number, scale: number): number {
  const { sx, sy } = imageToScreen(x, y, scale);
  const back = screenToImage(sx, sy, scale);
  return Math.hypot(back.x - x, back.y - y);
}
