import { describe, expect, it } from "vitest";

import {
  editBox,
  emptyDraft,
  fromLayoutPayload,
  replayHistory,
  toLayoutPayload,
  validateDraft,
} from "../src/model";
import type { EditAction, LayoutDraft } from "../src/model";

const CANVAS: [number, number] = [24, 32]; // [H, W]

function draftWith(...actions: EditAction[]): LayoutDraft {
  let draft = emptyDraft(CANVAS, "toy3x3");
  for (const action of actions) {
    const result = editBox(draft, action);
    if (!result.ok) throw new Error(result.message);
    draft = result.draft;
  }
  return draft;
}

const ADD: EditAction = { type: "add", category: 4, x: 2, y: 3, h: 5, w: 6 };

describe("editBox", () => {
  it("add then delete restores the box list with history length 2", () => {
    const added = draftWith(ADD);
    const result = editBox(added, { type: "delete", id: 1 });
    expect(result.ok).toBe(true);
    if (!result.ok) return;
    expect(result.draft.boxes).toEqual([]);
    expect(result.draft.history).toHaveLength(2);
    expect(result.draft.revision).toBe(2);
  });

  it("flip mirrors across the vertical midline", () => {
    const draft = draftWith(ADD, { type: "flip", id: 1 });
    // x' = W - x - w = 32 - 2 - 6
    expect(draft.boxes[0].x).toBe(24);
    expect(draft.boxes[0].y).toBe(3);
  });

  it("flip twice restores the original geometry", () => {
    const once = draftWith(ADD);
    const twice = draftWith(ADD, { type: "flip", id: 1 },
                            { type: "flip", id: 1 });
    expect(twice.boxes[0]).toEqual(once.boxes[0]);
    expect(twice.history).toHaveLength(3);
  });

  it("move beyond the canvas edge is rejected and leaves the draft", () => {
    const draft = draftWith(ADD);
    const result = editBox(draft, { type: "move", id: 1, x: 30, y: 3 });
    expect(result.ok).toBe(false);
    if (result.ok) return;
    expect(result.message).toMatch(/leave the canvas/);
    expect(draft.boxes[0].x).toBe(2);
    expect(draft.revision).toBe(1);
  });

  it("move inside the canvas succeeds and bumps the revision", () => {
    const draft = draftWith(ADD, { type: "move", id: 1, x: 10, y: 4 });
    expect(draft.boxes[0]).toMatchObject({ x: 10, y: 4 });
    expect(draft.revision).toBe(2);
  });

  it("resize validates extents", () => {
    const good = editBox(draftWith(ADD), { type: "resize", id: 1, h: 2, w: 2 });
    expect(good.ok).toBe(true);
    const bad = editBox(draftWith(ADD), { type: "resize", id: 1, h: 0, w: 2 });
    expect(bad.ok).toBe(false);
  });

  it("retag changes only the category", () => {
    const draft = draftWith(ADD, { type: "retag", id: 1, category: 5 });
    expect(draft.boxes[0].category).toBe(5);
    expect(draft.boxes[0].x).toBe(2);
  });

  it("add outside the canvas is rejected", () => {
    const result = editBox(emptyDraft(CANVAS, "toy3x3"),
                           { type: "add", category: 4, x: 30, y: 0, h: 4, w: 4 });
    expect(result.ok).toBe(false);
  });

  it("unknown target ids are rejected", () => {
    const result = editBox(emptyDraft(CANVAS, "toy3x3"),
                           { type: "flip", id: 9 });
    expect(result.ok).toBe(false);
  });
});

describe("history replay", () => {
  it("replaying the edit log reproduces the draft exactly", () => {
    const draft = draftWith(
      ADD,
      { type: "add", category: 5, x: 10, y: 10, h: 4, w: 4 },
      { type: "flip", id: 1 },
      { type: "move", id: 2, x: 12, y: 8 },
      { type: "delete", id: 1 },
      { type: "add", category: 4, x: 0, y: 0, h: 3, w: 3 },
    );
    const replayed = replayHistory(CANVAS, "toy3x3", draft.history);
    expect(replayed.boxes).toEqual(draft.boxes);
    expect(replayed.nextId).toBe(draft.nextId);
    expect(replayed.revision).toBe(draft.revision);
  });

  it("sequential adds and flips replay deterministically", () => {
    const actions: EditAction[] = [
      { type: "add", category: 4, x: 1, y: 1, h: 4, w: 6 },
      { type: "flip", id: 1 },
      { type: "add", category: 5, x: 8, y: 8, h: 5, w: 5 },
      { type: "flip", id: 2 },
      { type: "flip", id: 1 },
    ];
    const a = replayHistory(CANVAS, "toy3x3", actions);
    const b = replayHistory(CANVAS, "toy3x3", actions);
    expect(a).toEqual(b);
  });
});

describe("serialization", () => {
  it("draft -> payload -> draft round trip preserves the boxes", () => {
    const draft = draftWith(ADD, { type: "add", category: 5, x: 9, y: 2,
                                   h: 3, w: 4 });
    const payload = toLayoutPayload(draft);
    expect(payload).toEqual({
      canvas: [24, 32],
      taxonomy: "toy3x3",
      boxes: [
        { category: 4, x: 2, y: 3, h: 5, w: 6 },
        { category: 5, x: 9, y: 2, h: 3, w: 4 },
      ],
    });
    const back = fromLayoutPayload(payload);
    expect(toLayoutPayload(back)).toEqual(payload);
  });

  it("payload fields carry exactly the service's names", () => {
    const payload = toLayoutPayload(draftWith(ADD));
    expect(Object.keys(payload).sort()).toEqual(
      ["boxes", "canvas", "taxonomy"]);
    expect(Object.keys(payload.boxes[0]).sort()).toEqual(
      ["category", "h", "w", "x", "y"]);
  });
});

describe("validateDraft", () => {
  it("flags the empty draft", () => {
    const violations = validateDraft(emptyDraft(CANVAS, "toy3x3"));
    expect(violations[0].code).toBe("empty-layout");
  });

  it("accepts a well-formed draft", () => {
    expect(validateDraft(draftWith(ADD))).toEqual([]);
  });
});
