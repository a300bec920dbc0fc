/** Canvas rendering of the draft: filled translucent boxes with outlines,
 * selection emphasis, and a fixed per-category color rotation. */

import type { LayoutDraft } from "./model.js";

const GOLDEN = 0.61803398875;

export function categoryColor(category: number, alpha = 1): string {
  const hue = Math.round(((category * GOLDEN) % 1) * 360);
  return `hsla(${hue}, 70%, 55%, ${alpha})`;
}

export interface RenderOptions {
  scale: number; // canvas pixels per layout pixel
}

export function drawDraft(
  ctx: CanvasRenderingContext2D,
  draft: LayoutDraft,
  options: RenderOptions,
): void {
  const { scale } = options;
  const [canvasH, canvasW] = draft.canvas;
  ctx.clearRect(0, 0, canvasW * scale, canvasH * scale);
  ctx.fillStyle = "#15181d";
  ctx.fillRect(0, 0, canvasW * scale, canvasH * scale);

  for (const box of draft.boxes) {
    const x = box.x * scale;
    const y = box.y * scale;
    const w = box.w * scale;
    const h = box.h * scale;
    ctx.fillStyle = categoryColor(box.category, 0.45);
    ctx.fillRect(x, y, w, h);
    ctx.lineWidth = box.id === draft.selectedId ? 3 : 1.5;
    ctx.strokeStyle = categoryColor(box.category, 1);
    ctx.strokeRect(x, y, w, h);
    if (box.id === draft.selectedId) {
      ctx.setLineDash([4, 3]);
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1;
      ctx.strokeRect(x - 2, y - 2, w + 4, h + 4);
      ctx.setLineDash([]);
    }
  }
}

/** Map a pointer event position to layout coordinates. */
export function toLayoutCoords(
  event: { offsetX: number; offsetY: number },
  scale: number,
): { x: number; y: number } {
  return {
    x: Math.floor(event.offsetX / scale),
    y: Math.floor(event.offsetY / scale),
  };
}
