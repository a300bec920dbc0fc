/**
 * Debounced retrieval sync between the draft and the service.
 *
 * Each draft change schedules one request after the debounce window;
 * newer revisions cancel in-flight requests for older ones, so at most
 * one request per draft revision is live. A pinned entry id is carried
 * into every subsequent fuse-preview call until unpinned. When the
 * service is unreachable the panel keeps its last data, marked stale,
 * with an error banner.
 */

import { ApiClient } from "./api.js";
import type { PreviewRow, RetrieveRow } from "./api.js";
import type { LayoutDraft } from "./model.js";
import { toLayoutPayload, validateDraft } from "./model.js";

export const DEBOUNCE_MS = 250;

export type PanelStatus = "disabled" | "pending" | "ready" | "error";

export interface RetrievalPanelState {
  status: PanelStatus;
  hint: string | null; // validation hint while disabled
  errorBanner: string | null;
  revision: number; // draft revision the displayed data belongs to
  stale: boolean; // true when the draft moved past `revision`
  results: RetrieveRow[];
  previews: PreviewRow[];
  pinnedEntryId: string | null;
}

export function initialPanelState(): RetrievalPanelState {
  return {
    status: "disabled",
    hint: "draw a box to start",
    errorBanner: null,
    revision: -1,
    stale: false,
    results: [],
    previews: [],
    pinnedEntryId: null,
  };
}

export class RetrievalSync {
  private state: RetrievalPanelState = initialPanelState();
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private latestDraft: LayoutDraft | null = null;
  private syncedRevision = -2; // revision of the last issued request

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: RetrievalPanelState) => void,
    private readonly m: number = 3,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  get panel(): RetrievalPanelState {
    return this.state;
  }

  /** Debounced entry point: call on every draft change. */
  draftChanged(draft: LayoutDraft): void {
    this.latestDraft = draft;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.cancelInflight();

    const violations = validateDraft(draft);
    if (violations.length > 0) {
      this.update({
        ...this.state,
        status: "disabled",
        hint: violations[0].message,
        stale: this.state.revision >= 0,
      });
      return;
    }

    this.update({
      ...this.state,
      status: "pending",
      hint: null,
      stale: this.state.revision >= 0 && this.state.revision !== draft.revision,
    });
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.issue(draft);
    }, this.debounceMs);
  }

  /** Pin a retrieved entry: subsequent previews fuse exactly that entry.
   * Pinning refreshes the previews immediately (no debounce). */
  pin(entryId: string | null): void {
    this.update({ ...this.state, pinnedEntryId: entryId });
    if (this.latestDraft !== null &&
        validateDraft(this.latestDraft).length === 0) {
      if (this.timer !== null) {
        clearTimeout(this.timer); // the immediate issue supersedes it
        this.timer = null;
      }
      this.cancelInflight();
      void this.issue(this.latestDraft);
    }
  }

  /** Force a sync of the current draft without waiting for the debounce. */
  flush(): void {
    if (this.timer !== null && this.latestDraft !== null) {
      clearTimeout(this.timer);
      this.timer = null;
      void this.issue(this.latestDraft);
    }
  }

  private cancelInflight(): void {
    if (this.inflight !== null) {
      this.inflight.abort();
      this.inflight = null;
    }
  }

  private async issue(draft: LayoutDraft): Promise<void> {
    this.cancelInflight();
    const controller = new AbortController();
    this.inflight = controller;
    this.syncedRevision = draft.revision;
    const payload = toLayoutPayload(draft);
    const pinned = this.state.pinnedEntryId;
    try {
      const retrieval = await this.api.retrieve(
        payload, this.m, controller.signal);
      const fused = await this.api.fusePreview(
        payload,
        pinned !== null ? { entryIds: [pinned] } : { m: this.m },
        controller.signal,
      );
      if (this.latestDraft !== null &&
          this.latestDraft.revision !== draft.revision) {
        return; // a newer revision took over meanwhile
      }
      this.update({
        ...this.state,
        status: "ready",
        hint: null,
        errorBanner: null,
        revision: draft.revision,
        stale: false,
        results: retrieval.results,
        previews: fused.previews,
      });
    } catch (err) {
      if (controller.signal.aborted) {
        return;
      }
      this.update({
        ...this.state,
        status: "error",
        stale: true,
        errorBanner:
          err instanceof Error ? err.message : "service unreachable",
      });
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }

  private update(state: RetrievalPanelState): void {
    this.state = state;
    this.onChange(state);
  }

  /** Revision of the last request actually sent (test hook). */
  get lastSyncedRevision(): number {
    return this.syncedRevision;
  }
}
