/** Typed client for the layout service HTTP API. Scores stay strings end
 * to end: the UI must display them verbatim. */

import type { LayoutPayload } from "./model.js";

export interface RetrieveRow {
  id: string;
  score: string;
  score_decimal: string;
  thumbnail_ref: string;
}

export interface RetrieveResponse {
  query_fingerprint: string;
  results: RetrieveRow[];
  timing: Record<string, unknown>;
}

export interface PreviewRow {
  entry_id: string;
  score: string | null;
  png_base64: string;
}

export interface ChannelSummary {
  category: number;
  min: number;
  mean: number;
  max: number;
}

export interface FusePreviewResponse {
  query_fingerprint: string | null;
  m: number;
  previews: PreviewRow[];
  feature_summary: { channels: ChannelSummary[] };
}

export interface ValidateResponse {
  ok: boolean;
  violations: { code: string; message: string; box_index: number | null }[];
}

export interface TaxonomyResponse {
  name: string;
  foreground: [number, string][];
  background: [number, string][];
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`service responded ${status}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async post<T>(
    path: string,
    body: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload);
    }
    return payload as T;
  }

  retrieve(
    layout: LayoutPayload,
    m?: number,
    signal?: AbortSignal,
  ): Promise<RetrieveResponse> {
    const body: Record<string, unknown> = { layout };
    if (m !== undefined) body.m = m;
    return this.post("/retrieve", body, signal);
  }

  fusePreview(
    layout: LayoutPayload,
    options: { m?: number; entryIds?: string[] } = {},
    signal?: AbortSignal,
  ): Promise<FusePreviewResponse> {
    const body: Record<string, unknown> = { layout };
    if (options.m !== undefined) body.m = options.m;
    if (options.entryIds !== undefined) body.entry_ids = options.entryIds;
    return this.post("/fuse-preview", body, signal);
  }

  validate(
    layout: LayoutPayload,
    signal?: AbortSignal,
  ): Promise<ValidateResponse> {
    return this.post("/layout/validate", { layout }, signal);
  }

  async taxonomy(): Promise<TaxonomyResponse> {
    const response = await this.fetchFn(this.baseUrl + "/taxonomy");
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as TaxonomyResponse;
  }
}
