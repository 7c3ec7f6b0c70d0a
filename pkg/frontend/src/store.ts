/** Client-side state for the workbench. The store holds no authoritative
 * data: every displayed count comes from a curator read, local state is only
 * the in-flight matrix toggles and the last-seen head seq. Stale writes turn
 * into a conflict notice, never a silent overwrite. */

import { ApiClient, ApiError, ConflictError } from "./api.js";
import type {
  ConflictInfo,
  Counts,
  Flow,
  MatrixPayload,
  MatrixRowSpec,
  Suggestion,
} from "./types.js";

export interface WorkbenchState {
  phase: "loading" | "ready" | "error";
  headSeq: number;
  digest: string;
  counts: Counts;
  flows: Flow[];
  suggestions: Suggestion[];
  threshold: number;
  metric: string;
  matrix: MatrixPayload | null;
  /** id -> description for every active threat (suggestion members etc.). */
  descriptions: Record<string, string>;
  /** Locally toggled, not yet combined (threat id -> asset ids). */
  pending: Record<string, string[]>;
  conflict: ConflictInfo | null;
  notice: string | null;
}

function emptyState(): WorkbenchState {
  return {
    phase: "loading",
    headSeq: 0,
    digest: "",
    counts: {},
    flows: [],
    suggestions: [],
    threshold: 0,
    metric: "",
    matrix: null,
    descriptions: {},
    pending: {},
    conflict: null,
    notice: null,
  };
}

/** Committed combination count shown in the grid footer. */
export function committedCells(matrix: MatrixPayload | null): number {
  if (matrix === null) return 0;
  return Object.values(matrix.cells).reduce((sum, ids) => sum + ids.length, 0);
}

export function pendingCells(pending: Record<string, string[]>): number {
  return Object.values(pending).reduce((sum, ids) => sum + ids.length, 0);
}

/** Grid footer numbers: live sigma of combined cells plus the projected
 * grand total once the retained dependent threats are counted in. */
export function footerTotals(state: {
  counts: Counts;
  pending: Record<string, string[]>;
}): { sigma: number; pending: number; grand: number } {
  const combined = state.counts["combined"] ?? 0;
  const retained = state.counts["dd_retained"] ?? 0;
  const pending = pendingCells(state.pending);
  return { sigma: combined, pending, grand: combined + pending + retained };
}

export class Workbench {
  state: WorkbenchState = emptyState();
  private listeners: Array<() => void> = [];

  constructor(readonly api: ApiClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  /** Pull every panel's data fresh from the curator. */
  async refresh(): Promise<void> {
    try {
      const [head, counts, flows, suggestions, matrix, threats] = await Promise.all([
        this.api.head(),
        this.api.counts(),
        this.api.flows(),
        this.api.suggestions(),
        this.api.matrix(),
        this.api.activeThreats(),
      ]);
      const descriptions: Record<string, string> = {};
      for (const t of threats) descriptions[t.id] = t.description;
      this.state = {
        ...this.state,
        phase: "ready",
        headSeq: head.head_seq,
        digest: head.digest,
        counts,
        flows,
        suggestions: suggestions.suggestions,
        threshold: suggestions.threshold,
        metric: suggestions.metric,
        matrix,
        descriptions,
        pending: prunePending(this.state.pending, matrix),
        conflict: null,
        notice: this.state.notice,
      };
    } catch (error) {
      this.state = { ...this.state, phase: "error", notice: describeError(error) };
    }
    this.emit();
  }

  /** One poll cycle: cheap head check, full refresh only on drift. */
  async pollOnce(): Promise<void> {
    if (this.state.phase === "loading") {
      await this.refresh();
      return;
    }
    try {
      const head = await this.api.head();
      if (head.head_seq !== this.state.headSeq) {
        await this.refresh();
      }
    } catch {
      // Transient poll failures keep the last good snapshot on screen.
    }
  }

  private onConflict(error: ConflictError): void {
    this.state = {
      ...this.state,
      conflict: { headSeq: error.headSeq, lastSeenSeq: error.lastSeenSeq },
    };
    this.emit();
  }

  private async mutate(action: () => Promise<unknown>): Promise<void> {
    this.state = { ...this.state, notice: null };
    try {
      await action();
    } catch (error) {
      if (error instanceof ConflictError) {
        this.onConflict(error);
        return;
      }
      this.state = { ...this.state, notice: describeError(error) };
      this.emit();
      return;
    }
    await this.refresh();
  }

  acceptSuggestion(id: string, description?: string): Promise<void> {
    return this.mutate(() =>
      this.api.acceptSuggestion(id, this.state.headSeq, description),
    );
  }

  rejectSuggestion(id: string): Promise<void> {
    return this.mutate(() => this.api.rejectSuggestion(id, this.state.headSeq));
  }

  /** Flip a not-yet-committed matrix cell. Committed cells cannot be
   * removed, so toggling them is a no-op. */
  toggleCell(threatId: string, assetId: string): void {
    const committed = this.state.matrix?.cells[threatId] ?? [];
    if (committed.includes(assetId)) return;
    const row = this.state.pending[threatId] ?? [];
    const next = row.includes(assetId)
      ? row.filter((a) => a !== assetId)
      : [...row, assetId];
    const pending = { ...this.state.pending };
    if (next.length === 0) {
      delete pending[threatId];
    } else {
      pending[threatId] = next;
    }
    this.state = { ...this.state, pending };
    this.emit();
  }

  /** Commit one row's pending cells (plus what is already combined). */
  combineRow(threatId: string): Promise<void> {
    const committed = this.state.matrix?.cells[threatId] ?? [];
    const pending = this.state.pending[threatId] ?? [];
    return this.mutate(() =>
      this.api.putMatrixRow(threatId, this.state.headSeq, [...committed, ...pending]),
    );
  }

  /** Commit every pending cell in one request. */
  combineAllPending(): Promise<void> {
    const rows: MatrixRowSpec[] = Object.entries(this.state.pending).map(
      ([threat, assets]) => ({ threat, assets }),
    );
    if (rows.length === 0) return Promise.resolve();
    return this.mutate(() => this.api.combineAll(this.state.headSeq, rows));
  }

  /** Apply the combination matrix packaged with the workspace. */
  applyWorkspaceMatrix(): Promise<void> {
    return this.mutate(() => this.api.combineAll(this.state.headSeq));
  }

  /** Clear a conflict by reloading everything from the curator. */
  reload(): Promise<void> {
    return this.refresh();
  }
}

function prunePending(
  pending: Record<string, string[]>,
  matrix: MatrixPayload,
): Record<string, string[]> {
  const next: Record<string, string[]> = {};
  for (const [threatId, assetIds] of Object.entries(pending)) {
    const committed = matrix.cells[threatId] ?? [];
    const still = assetIds.filter((a) => !committed.includes(a));
    if (still.length > 0) next[threatId] = still;
  }
  return next;
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  if (error instanceof Error) return error.message;
  return String(error);
}
