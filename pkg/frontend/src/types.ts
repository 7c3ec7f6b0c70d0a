/** Payload shapes of the curator HTTP API. */

export interface HeadInfo {
  head_seq: number;
  digest: string;
}

export interface ThreatRow {
  id: string;
  description: string;
  dependency: "DomainIndependent" | "DomainDependent";
  agents: string[];
  properties: string[];
  origin: string[];
  status: string;
  combination: { parent: string; asset: string } | null;
  track: string;
}

export interface AssetRow {
  id: string;
  name: string;
}

export interface FlowStage {
  label: string;
  count: number;
}

export interface Flow {
  step: string;
  stages: FlowStage[];
  notes?: string | null;
}

export interface Suggestion {
  id: string;
  members: string[];
  score: number;
  proposed_description: string;
  status: string;
}

export interface SuggestionsPayload extends HeadInfo {
  suggestions: Suggestion[];
  threshold: number;
  metric: string;
}

export interface MatrixPayload extends HeadInfo {
  threats: { id: string; description: string }[];
  assets: AssetRow[];
  cells: Record<string, string[]>;
}

export type Counts = Record<string, number>;

export interface MutationResult extends HeadInfo {
  record: unknown;
}

export interface CombineAllResult extends HeadInfo {
  rows_applied: number;
  counts: Counts;
}

export interface MatrixRowSpec {
  threat: string;
  assets: string[] | "*";
}

export interface ConflictInfo {
  headSeq: number;
  lastSeenSeq: number;
}
