/** Payload types mirroring the review service's JSON API. */

export interface LeafNodeDoc {
  kind: "leaf";
  distribution: number[];
  prediction: number;
  prediction_label: string;
  n_samples: number;
}

export interface SplitNodeDoc {
  kind: "split";
  feature: number;
  split_kind: "numeric" | "membership";
  threshold: number;
  category: string | null;
  text: string;
  sensitive: boolean;
  n_samples: number;
  left: TreeNodeDoc;
  right: TreeNodeDoc;
}

export type TreeNodeDoc = LeafNodeDoc | SplitNodeDoc;

export interface TreeDoc {
  format: string;
  n_classes: number;
  config: Record<string, unknown>;
  root: TreeNodeDoc;
}

export interface SensitiveSplitEntry {
  node_path: string[];
  text: string;
  attribute: string | null;
  n_samples: number;
  depth: number;
}

export interface TreePayload {
  session_id: string;
  status: string;
  tree: TreeDoc;
  tree_hash: string;
  sensitive_splits: SensitiveSplitEntry[];
  n_alterations: number;
}

export interface DeltaDpEntry {
  delta: number | null;
  p1: number | null;
  p2: number | null;
  n1: number;
  n2: number;
}

export interface MetricsReport {
  accuracy: number;
  avg_delta_dp: number | null;
  delta_dp: Record<string, DeltaDpEntry>;
}

export interface SessionReport {
  session_id: string;
  status: string;
  before: MetricsReport;
  after: MetricsReport;
  chosen_mode: string | null;
  audit_log: AlterationDoc[];
}

export interface AlterationDoc {
  node_path: string[];
  strategy: "discard" | "retrain";
  keep: "left" | "right" | null;
  exclude: string[];
}

export interface WhatIfResponse {
  before: MetricsReport;
  after: MetricsReport;
  accuracy_delta: number;
  avg_delta_dp_delta: number | null;
  candidate_sensitive_splits: SensitiveSplitEntry[];
  tree_hash: string;
}

export interface FineTuneResponse {
  session_id: string;
  status: string;
  chosen_mode: string;
  candidates: Record<string, {
    accuracy: number;
    max_delta_dp: number;
    n_targets: number;
    delta_dp: Record<string, number | null>;
  }>;
}

export interface StatusResponse {
  session_id: string;
  status: string;
  n_alterations: number;
  outcome_ready: boolean;
}

/** An uncommitted edit the reviewer is composing for one node. */
export interface AlterationDraft {
  nodePath: string[];
  strategy: "discard" | "retrain";
  keep: "left" | "right";
  exclude: string[];
}
