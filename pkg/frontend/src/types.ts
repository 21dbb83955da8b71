/** Wire types mirroring the annotation service. */

export interface AnnotationTask {
  task_id: string;
  video_id: string;
  video_url: string;
  generated_caption: string;
  status: "open" | "done";
  judgments_received: number;
  reference_captions?: string[];
}

/** Request body for POST /tasks/{id}/judgments. */
export interface JudgmentPayload {
  annotator_id: string;
  s_grammar: boolean;
  element_recall: boolean[];
  element_precision: boolean[];
  action_recall: boolean;
  action_precision: boolean;
  element_recall_labels: string[];
  element_precision_labels: string[];
}

export interface SsReport {
  ss_score: number;
  N: number;
  per_caption: {
    video_id: string;
    caption: string;
    score: number;
    annotators: string[];
  }[];
}

export type ApiResult<T> =
  | { ok: true; value: T }
  | { ok: false; status: number; detail: string };

/** Network-level failure (service unreachable), distinct from HTTP errors. */
export const UNREACHABLE = 0;
