/** Editor app: draw boxes on the canvas, see top-m retrieved backgrounds
 * and composed previews live, pin an entry to steer fusion. */

import { ApiClient } from "./api.js";
import type { EditAction, LayoutDraft } from "./model.js";
import { editBox, emptyDraft, replayHistory } from "./model.js";
import { categoryColor, drawDraft, toLayoutCoords } from "./render.js";
import { RetrievalSync } from "./sync.js";
import type { RetrievalPanelState } from "./sync.js";

const SCALE = 3;

interface AppElements {
  canvas: HTMLCanvasElement;
  category: HTMLSelectElement;
  flip: HTMLButtonElement;
  del: HTMLButtonElement;
  replay: HTMLButtonElement;
  message: HTMLElement;
  banner: HTMLElement;
  results: HTMLElement;
  previews: HTMLElement;
}

function grab(): AppElements {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el as T;
  };
  return {
    canvas: byId<HTMLCanvasElement>("editor"),
    category: byId<HTMLSelectElement>("category"),
    flip: byId<HTMLButtonElement>("flip"),
    del: byId<HTMLButtonElement>("delete"),
    replay: byId<HTMLButtonElement>("replay"),
    message: byId("message"),
    banner: byId("banner"),
    results: byId("results"),
    previews: byId("previews"),
  };
}

async function start(): Promise<void> {
  const els = grab();
  const api = new ApiClient("");
  const taxonomy = await api.taxonomy();
  for (const [id, name] of taxonomy.foreground) {
    const option = document.createElement("option");
    option.value = String(id);
    option.textContent = `${name} (${id})`;
    option.style.color = categoryColor(id);
    els.category.appendChild(option);
  }

  const stats = await (await fetch("/bank/stats")).json();
  const canvas: [number, number] = [stats.canvas[0], stats.canvas[1]];
  els.canvas.height = canvas[0] * SCALE;
  els.canvas.width = canvas[1] * SCALE;

  let draft: LayoutDraft = emptyDraft(canvas, taxonomy.name);
  const ctx = els.canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");

  const sync = new RetrievalSync(api, renderPanel);

  function apply(action: EditAction): void {
    const result = editBox(draft, action);
    if (!result.ok) {
      els.message.textContent = result.message;
      return;
    }
    els.message.textContent = "";
    draft = result.draft;
    drawDraft(ctx!, draft, { scale: SCALE });
    sync.draftChanged(draft);
  }

  function renderPanel(state: RetrievalPanelState): void {
    els.banner.textContent = state.errorBanner ?? "";
    els.banner.style.display = state.errorBanner ? "block" : "none";
    if (state.status === "disabled") {
      els.results.innerHTML = `<p class="hint">${state.hint ?? ""}</p>`;
      els.previews.innerHTML = "";
      return;
    }
    els.results.classList.toggle("stale", state.stale);
    els.results.innerHTML = "";
    for (const row of state.results) {
      const item = document.createElement("div");
      item.className = "result";
      // scores are displayed verbatim as served
      item.textContent = `${row.id}  IoU ${row.score} (${row.score_decimal})`;
      if (row.id === state.pinnedEntryId) item.classList.add("pinned");
      item.addEventListener("click", () => {
        sync.pin(row.id === state.pinnedEntryId ? null : row.id);
      });
      els.results.appendChild(item);
    }
    els.previews.innerHTML = "";
    for (const preview of state.previews) {
      const figure = document.createElement("figure");
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${preview.png_base64}`;
      img.alt = preview.entry_id;
      const caption = document.createElement("figcaption");
      caption.textContent = preview.score !== null
        ? `${preview.entry_id} · ${preview.score}`
        : `${preview.entry_id} (pinned)`;
      figure.appendChild(img);
      figure.appendChild(caption);
      els.previews.appendChild(figure);
    }
  }

  // pointer interactions: drag on empty space draws, drag on a box moves
  let dragStart: { x: number; y: number } | null = null;
  let dragBoxId: number | null = null;
  let dragBoxOrigin: { x: number; y: number } | null = null;

  els.canvas.addEventListener("pointerdown", (event) => {
    const p = toLayoutCoords(event, SCALE);
    dragStart = p;
    const hit = [...draft.boxes].reverse().find(
      (b) => p.x >= b.x && p.x < b.x + b.w && p.y >= b.y && p.y < b.y + b.h);
    if (hit) {
      dragBoxId = hit.id;
      dragBoxOrigin = { x: hit.x, y: hit.y };
      draft = { ...draft, selectedId: hit.id };
      drawDraft(ctx, draft, { scale: SCALE });
    } else {
      dragBoxId = null;
      dragBoxOrigin = null;
    }
  });

  els.canvas.addEventListener("pointerup", (event) => {
    if (!dragStart) return;
    const p = toLayoutCoords(event, SCALE);
    if (dragBoxId !== null && dragBoxOrigin) {
      const dx = p.x - dragStart.x;
      const dy = p.y - dragStart.y;
      if (dx !== 0 || dy !== 0) {
        apply({ type: "move", id: dragBoxId,
                x: dragBoxOrigin.x + dx, y: dragBoxOrigin.y + dy });
      }
    } else {
      const x = Math.min(dragStart.x, p.x);
      const y = Math.min(dragStart.y, p.y);
      const w = Math.abs(p.x - dragStart.x) + 1;
      const h = Math.abs(p.y - dragStart.y) + 1;
      if (w >= 2 && h >= 2) {
        apply({ type: "add", category: Number(els.category.value), x, y, h, w });
      }
    }
    dragStart = null;
    dragBoxId = null;
    dragBoxOrigin = null;
  });

  els.flip.addEventListener("click", () => {
    if (draft.selectedId !== null) {
      apply({ type: "flip", id: draft.selectedId });
    }
  });
  els.del.addEventListener("click", () => {
    if (draft.selectedId !== null) {
      apply({ type: "delete", id: draft.selectedId });
    }
  });
  els.replay.addEventListener("click", () => {
    // sanity control: rebuild the draft from its own history
    draft = replayHistory(draft.canvas, draft.taxonomy, draft.history);
    drawDraft(ctx, draft, { scale: SCALE });
    sync.draftChanged(draft);
  });

  drawDraft(ctx, draft, { scale: SCALE });
  sync.draftChanged(draft);
}

void start();
