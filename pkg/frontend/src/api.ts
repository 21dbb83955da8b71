/** Thin client over the annotation service HTTP/JSON endpoints.
 *
 * The UI never computes scores: /score is the only source of aggregate
 * numbers, so the browser and the offline CLI can never disagree.
 */

import type { AnnotationTask, ApiResult, JudgmentPayload, SsReport } from "./types.js";
import { UNREACHABLE } from "./types.js";

async function asResult<T>(request: Promise<Response>): Promise<ApiResult<T>> {
  let response: Response;
  try {
    response = await request;
  } catch (err) {
    return { ok: false, status: UNREACHABLE, detail: String(err) };
  }
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail ?? body);
    } catch {
      /* non-JSON error body; keep statusText */
    }
    return { ok: false, status: response.status, detail };
  }
  return { ok: true, value: (await response.json()) as T };
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  listTasks(status?: "open" | "done"): Promise<ApiResult<AnnotationTask[]>> {
    const query = status ? `?status=${status}` : "";
    return asResult(fetch(`${this.baseUrl}/tasks${query}`));
  }

  submitJudgment(taskId: string, payload: JudgmentPayload): Promise<ApiResult<unknown>> {
    return asResult(
      fetch(`${this.baseUrl}/tasks/${encodeURIComponent(taskId)}/judgments`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
  }

  score(): Promise<ApiResult<SsReport>> {
    return asResult(fetch(`${this.baseUrl}/score`));
  }
}
