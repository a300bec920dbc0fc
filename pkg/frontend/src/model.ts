/**
 * Layout draft model: category-tagged boxes over a fixed canvas, an edit
 * history that replays deterministically, and serialization that matches
 * the service's layout payload field-for-field.
 *
 * Coordinates: x = column, y = row, origin top-left; a box covers rows
 * y..y+h-1 and columns x..x+w-1. Canvas extents are [H, W].
 */

export interface Box {
  id: number;
  category: number;
  x: number;
  y: number;
  h: number;
  w: number;
}

export interface LayoutDraft {
  canvas: [number, number];
  taxonomy: string;
  boxes: Box[];
  selectedId: number | null;
  revision: number;
  history: EditAction[];
  nextId: number;
}

export type EditAction =
  | { type: "add"; category: number; x: number; y: number; h: number; w: number }
  | { type: "move"; id: number; x: number; y: number }
  | { type: "resize"; id: number; h: number; w: number }
  | { type: "flip"; id: number }
  | { type: "delete"; id: number }
  | { type: "retag"; id: number; category: number };

export type EditResult =
  | { ok: true; draft: LayoutDraft }
  | { ok: false; message: string };

export interface LayoutPayload {
  canvas: [number, number];
  taxonomy: string;
  boxes: { category: number; x: number; y: number; h: number; w: number }[];
}

export function emptyDraft(
  canvas: [number, number],
  taxonomy: string,
): LayoutDraft {
  return {
    canvas,
    taxonomy,
    boxes: [],
    selectedId: null,
    revision: 0,
    history: [],
    nextId: 1,
  };
}

function insideCanvas(
  box: { x: number; y: number; h: number; w: number },
  canvas: [number, number],
): boolean {
  const [canvasH, canvasW] = canvas;
  return (
    box.h >= 1 &&
    box.w >= 1 &&
    box.x >= 0 &&
    box.y >= 0 &&
    box.x + box.w <= canvasW &&
    box.y + box.h <= canvasH
  );
}

function findBox(draft: LayoutDraft, id: number): Box | undefined {
  return draft.boxes.find((b) => b.id === id);
}

/** Apply one edit; rejected edits leave the draft untouched and carry an
 * inline message. Accepted edits append to the history and bump the
 * revision. */
export function editBox(draft: LayoutDraft, action: EditAction): EditResult {
  const apply = applyAction(draft, action);
  if (!apply.ok) {
    return apply;
  }
  return {
    ok: true,
    draft: {
      ...apply.draft,
      revision: draft.revision + 1,
      history: [...draft.history, action],
    },
  };
}

function applyAction(draft: LayoutDraft, action: EditAction): EditResult {
  switch (action.type) {
    case "add": {
      const candidate = {
        x: action.x,
        y: action.y,
        h: action.h,
        w: action.w,
      };
      if (!insideCanvas(candidate, draft.canvas)) {
        return { ok: false, message: "box must lie inside the canvas" };
      }
      const box: Box = { id: draft.nextId, category: action.category, ...candidate };
      return {
        ok: true,
        draft: {
          ...draft,
          boxes: [...draft.boxes, box],
          selectedId: box.id,
          nextId: draft.nextId + 1,
        },
      };
    }
    case "move": {
      const box = findBox(draft, action.id);
      if (!box) return { ok: false, message: `no box ${action.id}` };
      const moved = { ...box, x: action.x, y: action.y };
      if (!insideCanvas(moved, draft.canvas)) {
        return { ok: false, message: "move would leave the canvas" };
      }
      return { ok: true, draft: replaceBox(draft, moved) };
    }
    case "resize": {
      const box = findBox(draft, action.id);
      if (!box) return { ok: false, message: `no box ${action.id}` };
      const resized = { ...box, h: action.h, w: action.w };
      if (!insideCanvas(resized, draft.canvas)) {
        return { ok: false, message: "resize would leave the canvas" };
      }
      return { ok: true, draft: replaceBox(draft, resized) };
    }
    case "flip": {
      const box = findBox(draft, action.id);
      if (!box) return { ok: false, message: `no box ${action.id}` };
      // mirror the x-extent across the canvas vertical midline
      const flipped = { ...box, x: draft.canvas[1] - box.x - box.w };
      return { ok: true, draft: replaceBox(draft, flipped) };
    }
    case "delete": {
      if (!findBox(draft, action.id)) {
        return { ok: false, message: `no box ${action.id}` };
      }
      return {
        ok: true,
        draft: {
          ...draft,
          boxes: draft.boxes.filter((b) => b.id !== action.id),
          selectedId:
            draft.selectedId === action.id ? null : draft.selectedId,
        },
      };
    }
    case "retag": {
      const box = findBox(draft, action.id);
      if (!box) return { ok: false, message: `no box ${action.id}` };
      return {
        ok: true,
        draft: replaceBox(draft, { ...box, category: action.category }),
      };
    }
  }
}

function replaceBox(draft: LayoutDraft, box: Box): LayoutDraft {
  return {
    ...draft,
    boxes: draft.boxes.map((b) => (b.id === box.id ? box : b)),
  };
}

/** Rebuild a draft by replaying the edit log from empty; the result equals
 * the live draft (history replay determinism). */
export function replayHistory(
  canvas: [number, number],
  taxonomy: string,
  history: EditAction[],
): LayoutDraft {
  let draft = emptyDraft(canvas, taxonomy);
  for (const action of history) {
    const result = editBox(draft, action);
    if (!result.ok) {
      throw new Error(`history replay rejected ${action.type}: ${result.message}`);
    }
    draft = result.draft;
  }
  return draft;
}

export function toLayoutPayload(draft: LayoutDraft): LayoutPayload {
  return {
    canvas: [draft.canvas[0], draft.canvas[1]],
    taxonomy: draft.taxonomy,
    boxes: draft.boxes.map(({ category, x, y, h, w }) => ({
      category,
      x,
      y,
      h,
      w,
    })),
  };
}

export function fromLayoutPayload(payload: LayoutPayload): LayoutDraft {
  const draft = emptyDraft(
    [payload.canvas[0], payload.canvas[1]],
    payload.taxonomy,
  );
  const boxes = payload.boxes.map((b, i) => ({ id: i + 1, ...b }));
  return {
    ...draft,
    boxes,
    nextId: boxes.length + 1,
  };
}

export interface DraftViolation {
  code: string;
  message: string;
}

/** Client-side mirror of the service's layout validation. */
export function validateDraft(draft: LayoutDraft): DraftViolation[] {
  const violations: DraftViolation[] = [];
  if (draft.boxes.length === 0) {
    violations.push({ code: "empty-layout", message: "draw a box to start" });
  }
  draft.boxes.forEach((box, i) => {
    if (box.h < 1 || box.w < 1) {
      violations.push({
        code: "non-positive-extent",
        message: `box ${i} has h=${box.h}, w=${box.w}`,
      });
    } else if (!insideCanvas(box, draft.canvas)) {
      violations.push({
        code: "out-of-canvas",
        message: `box ${i} leaves the canvas`,
      });
    }
  });
  return violations;
}
