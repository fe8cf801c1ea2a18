/** Documents exchanged with the annotation HTTP API. */

export interface StateSummary {
  iteration: number;
  labeled_count: number;
  unlabeled_count: number;
  pending_count: number;
  strategy: string | null;
  config_hash: string;
}

export type TaskStatus = "pending" | "labeled" | "skipped";

export interface AnnotationTask {
  sample_id: string;
  audio_ref: string | null;
  cluster_id: number | null;
  score: number | null;
  status: TaskStatus;
  submitted_text: string | null;
  submitted_at: string | null;
}

export interface LabelResult {
  sample_id: string;
  status: TaskStatus;
  noop: boolean;
}

export interface AdvanceResult {
  iteration: number;
}

export interface ScoreDigest {
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

export interface HistoryEntry {
  iteration: number;
  batch_size: number;
  strategy: string;
  score_digest: ScoreDigest | null;
}

export interface Report {
  iteration: number;
  history: HistoryEntry[];
  scores_digest: ScoreDigest | null;
}

export interface ClusterRow {
  cluster_id: number | "noise";
  size: number;
}

export interface QuotaPlanView {
  target: number;
  beta: number;
  gamma: number;
  quotas: Record<string, number>;
  adjustments: { op: "add" | "remove"; cluster_id: number }[];
}

export interface ClustersView {
  clusters: ClusterRow[];
  quota_plan: QuotaPlanView | null;
}

export type SaveStatus = "draft" | "saving" | "saved" | "error";

/** Client-side view of one task: server fields plus the annotator's draft. */
export interface TaskView {
  task: AnnotationTask;
  draft: string;
  saveStatus: SaveStatus;
  errorMessage: string | null;
}
