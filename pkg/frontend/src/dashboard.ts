import type { ClustersView, Report, ScoreDigest } from "./types.js";

export interface QuartileBar {
  iteration: number;
  /** box positions normalized to [0, 1] against the report-wide maximum */
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

export interface IterationRow {
  iteration: number;
  batchSize: number;
  strategy: string;
  medianUncertainty: number | null;
}

export interface DashboardModel {
  kind: "empty" | "single" | "populated";
  rows: IterationRow[];
  bars: QuartileBar[];
  totalLabeled: number;
}

function digestsMax(digests: (ScoreDigest | null)[]): number {
  let max = 0;
  for (const d of digests) {
    if (d && d.max > max) max = d.max;
  }
  return max;
}

/** Read-only per-iteration view: batch sizes plus uncertainty quartile boxes. */
export function buildDashboard(report: Report | null): DashboardModel {
  if (!report || report.history.length === 0) {
    return { kind: "empty", rows: [], bars: [], totalLabeled: 0 };
  }
  const rows: IterationRow[] = report.history.map((entry) => ({
    iteration: entry.iteration,
    batchSize: entry.batch_size,
    strategy: entry.strategy,
    medianUncertainty: entry.score_digest ? entry.score_digest.median : null,
  }));
  const scale = digestsMax(report.history.map((e) => e.score_digest));
  const bars: QuartileBar[] = [];
  for (const entry of report.history) {
    const d = entry.score_digest;
    if (!d) continue;
    const norm = (v: number) => (scale > 0 ? v / scale : 0);
    bars.push({
      iteration: entry.iteration,
      min: norm(d.min),
      q1: norm(d.q1),
      median: norm(d.median),
      q3: norm(d.q3),
      max: norm(d.max),
    });
  }
  return {
    kind: report.history.length === 1 ? "single" : "populated",
    rows,
    bars,
    totalLabeled: rows.reduce((sum, r) => sum + r.batchSize, 0),
  };
}

export interface ClusterBadge {
  label: string;
  size: number;
  quota: number | null;
}

/** Cluster sizes annotated with the current iteration's quota, when present. */
export function clusterBadges(view: ClustersView): ClusterBadge[] {
  const quotas = view.quota_plan ? view.quota_plan.quotas : {};
  return view.clusters.map((row) => ({
    label: row.cluster_id === "noise" ? "noise" : `cluster ${row.cluster_id}`,
    size: row.size,
    quota:
      row.cluster_id === "noise"
        ? (quotas["0"] ?? null)
        : (quotas[String(row.cluster_id)] ?? null),
  }));
}
