/** Wire types for the feedback service HTTP API. */

export interface ArmPayload {
  kind: "arm";
  points: [number, number][];
}

export interface MazePayload {
  kind: "maze";
  walls: [number, number, number, number][];
  path: [number, number][];
}

export type RenderPayload = ArmPayload | MazePayload;

export interface BudgetStatus {
  total: number;
  used: number;
}

/** One pending judgment request as shown to the annotator. */
export interface TripletView {
  requestId: number;
  ref: RenderPayload;
  a: RenderPayload;
  b: RenderPayload;
  budget: BudgetStatus | null;
}

export interface FinalSummary {
  qd_score_archive: number;
  coverage_archive: number;
  qd_score_all: number;
  coverage_all: number;
  judgments_used: number;
}

export interface RunStatus {
  state: string;
  task?: string;
  strategy?: string;
  iteration?: number;
  total_iterations?: number;
  pending?: number;
  budget?: BudgetStatus;
  qd_score_archive?: number;
  coverage_archive?: number;
  final?: FinalSummary;
  error?: string;
}

export type Choice = "A" | "B" | "skip";
