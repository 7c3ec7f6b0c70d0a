/** Thin typed client over the curator HTTP API. Every mutation carries the
 * caller's last-seen head seq; a stale seq surfaces as ConflictError. */

import type {
  AssetRow,
  CombineAllResult,
  Counts,
  Flow,
  HeadInfo,
  MatrixPayload,
  MatrixRowSpec,
  MutationResult,
  SuggestionsPayload,
  ThreatRow,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ConflictError extends ApiError {
  readonly headSeq: number;
  readonly lastSeenSeq: number;

  constructor(status: number, detail: { head_seq: number; last_seen_seq: number }) {
    super(status, detail, `stale head: server is at seq ${detail.head_seq}`);
    this.name = "ConflictError";
    this.headSeq = detail.head_seq;
    this.lastSeenSeq = detail.last_seen_seq;
  }
}

function detailMessage(detail: unknown, fallback: string): string {
  if (typeof detail === "string") return detail;
  if (detail !== null && typeof detail === "object" && "error" in detail) {
    return String((detail as { error: unknown }).error);
  }
  return fallback;
}

export class ApiClient {
  constructor(
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private readonly base = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (response.ok) {
      return (await response.json()) as T;
    }
    let detail: unknown = null;
    try {
      detail = ((await response.json()) as { detail?: unknown }).detail ?? null;
    } catch {
      detail = null;
    }
    if (
      response.status === 409 &&
      detail !== null &&
      typeof detail === "object" &&
      (detail as { error?: unknown }).error === "stale head"
    ) {
      throw new ConflictError(
        response.status,
        detail as { head_seq: number; last_seen_seq: number },
      );
    }
    throw new ApiError(
      response.status,
      detail,
      detailMessage(detail, `request failed with status ${response.status}`),
    );
  }

  private post<T>(path: string, body: unknown, method = "POST"): Promise<T> {
    return this.request<T>(path, {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  head(): Promise<HeadInfo> {
    return this.request<HeadInfo>("/head");
  }

  counts(): Promise<Counts> {
    return this.request<{ counts: Counts }>("/counts").then((r) => r.counts);
  }

  flows(): Promise<Flow[]> {
    return this.request<{ flows: Flow[] }>("/flows").then((r) => r.flows);
  }

  activeThreats(): Promise<ThreatRow[]> {
    return this.request<{ threats: ThreatRow[] }>("/threats?status=Active").then(
      (r) => r.threats,
    );
  }

  suggestions(): Promise<SuggestionsPayload> {
    return this.request<SuggestionsPayload>("/suggestions");
  }

  matrix(): Promise<MatrixPayload> {
    return this.request<MatrixPayload>("/matrix");
  }

  assets(): Promise<AssetRow[]> {
    return this.request<{ assets: AssetRow[] }>("/assets").then((r) => r.assets);
  }

  acceptSuggestion(
    id: string,
    lastSeenSeq: number,
    description?: string,
  ): Promise<MutationResult> {
    const body: Record<string, unknown> = { last_seen_seq: lastSeenSeq };
    if (description !== undefined) body.description = description;
    return this.post<MutationResult>(`/suggestions/${id}/accept`, body);
  }

  rejectSuggestion(id: string, lastSeenSeq: number): Promise<HeadInfo> {
    return this.post<HeadInfo>(`/suggestions/${id}/reject`, {
      last_seen_seq: lastSeenSeq,
    });
  }

  putMatrixRow(
    threatId: string,
    lastSeenSeq: number,
    assets: string[],
  ): Promise<MutationResult & { added: string[] }> {
    return this.post<MutationResult & { added: string[] }>(
      `/matrix/${threatId}`,
      { last_seen_seq: lastSeenSeq, assets },
      "PUT",
    );
  }

  combineAll(lastSeenSeq: number, rows?: MatrixRowSpec[]): Promise<CombineAllResult> {
    const body: Record<string, unknown> = { last_seen_seq: lastSeenSeq };
    if (rows !== undefined) body.rows = rows;
    return this.post<CombineAllResult>("/combine-all", body);
  }
}
