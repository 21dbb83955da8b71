/** Pure HTML renderers; all state comes in as arguments, nothing is
 * fetched or scored here. The browser shell in app.ts mounts the strings
 * and wires events by element id/data attributes.
 */

import type { AnnotationTask, ApiResult, SsReport } from "./types.js";
import { UNREACHABLE } from "./types.js";
import type { FormState } from "./form.js";
import { submitBlockers } from "./form.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderRetryBanner(detail: string): string {
  return `<div class="banner error" id="retry-banner">
    service unreachable (${escapeHtml(detail)})
    <button id="retry-button">retry</button>
  </div>`;
}

export function renderScorePanel(score: ApiResult<SsReport>): string {
  if (!score.ok) {
    // 409 = nothing judged yet; unreachable = banner elsewhere; either way no panel
    return "";
  }
  const { ss_score, N } = score.value;
  return `<div class="score-panel" id="score-panel">
    live SS Score: <strong>${ss_score.toFixed(4)}</strong> over ${N} caption(s)
  </div>`;
}

export function renderTaskList(
  tasks: ApiResult<AnnotationTask[]>,
  score: ApiResult<SsReport>,
): string {
  if (!tasks.ok) {
    return tasks.status === UNREACHABLE
      ? renderRetryBanner(tasks.detail)
      : `<div class="banner error">failed to load tasks: ${escapeHtml(tasks.detail)}</div>`;
  }
  const list = tasks.value;
  const open = list.filter((t) => t.status === "open").length;
  const done = list.length - open;
  const rows = list
    .map(
      (t) => `<li class="task ${t.status}" data-task-id="${escapeHtml(t.task_id)}">
        <a href="#/tasks/${escapeHtml(t.task_id)}">${escapeHtml(t.video_id)}</a>
        <span class="caption">${escapeHtml(t.generated_caption)}</span>
        <span class="badge ${t.status}">${t.status} (${t.judgments_received})</span>
      </li>`,
    )
    .join("\n");
  const body =
    list.length === 0
      ? `<p class="empty-state">No annotation tasks yet. Import tasks on the service side.</p>`
      : `<ul class="task-list">${rows}</ul>`;
  return `<h1>Caption judgments</h1>
  ${renderScorePanel(score)}
  <p class="counts">${open} open / ${done} done</p>
  ${body}`;
}

export const ANNOTATION_GUIDE = `
<details class="guide" open>
  <summary>How to judge</summary>
  <ul>
    <li><strong>Grammar</strong>: is the caption grammatically correct on its own,
        without looking at the video?</li>
    <li><strong>Object recall</strong>: add one row per prominent object (the most
        important subject or object) you see in the video, label it, and mark
        whether the caption covers it.</li>
    <li><strong>Object precision</strong>: add one row per object the caption
        mentions and mark whether that object really appears in the video.</li>
    <li><strong>Action recall</strong>: did the caption capture the most prominent
        action happening in the video?</li>
    <li><strong>Action precision</strong>: is the action the caption mentions
        actually present in the video?</li>
    <li>If the video has no prominent objects, or the caption names none, tick the
        matching "none" checkbox instead of leaving rows out: an empty list counts
        as a perfect 1.0 for that side (nothing claimed falsely, nothing missed),
        so it must be a deliberate call.</li>
  </ul>
</details>`;

function boolToggle(name: string, value: boolean | null, labels = ["yes", "no"]): string {
  const yes = value === true ? "checked" : "";
  const no = value === false ? "checked" : "";
  return `<label><input type="radio" name="${name}" value="true" ${yes}> ${labels[0]}</label>
    <label><input type="radio" name="${name}" value="false" ${no}> ${labels[1]}</label>`;
}

function elementRows(kind: "recall" | "precision", rows: FormState["elementRecall"]): string {
  const items = rows
    .map(
      (row, i) => `<li class="element-row" data-kind="${kind}" data-index="${i}">
        <input type="text" class="row-label" data-kind="${kind}" data-index="${i}"
               placeholder="object name" value="${escapeHtml(row.label)}">
        <label><input type="checkbox" class="row-matched" data-kind="${kind}"
               data-index="${i}" ${row.matched ? "checked" : ""}> matched</label>
        <button class="row-remove" data-kind="${kind}" data-index="${i}">remove</button>
      </li>`,
    )
    .join("\n");
  return `<ul class="element-rows" id="rows-${kind}">${items}</ul>`;
}

export interface DetailUiState {
  submitting: boolean;
  notice: string | null; // e.g. "already scored" after a 409
  fieldError: string | null; // offending field from a 422
}

export function renderTaskDetail(task: AnnotationTask, form: FormState, ui: DetailUiState): string {
  const blockers = submitBlockers(form);
  const disabled = blockers.length > 0 || ui.submitting ? "disabled" : "";
  const video = /\.(png|jpe?g|gif|webp)$/i.test(task.video_url)
    ? `<img class="frame-strip" src="${escapeHtml(task.video_url)}" alt="frame strip">`
    : `<video controls src="${escapeHtml(task.video_url)}"></video>`;
  const references = task.reference_captions
    ? `<details class="references"><summary>reference captions</summary><ul>${task.reference_captions
        .map((c) => `<li>${escapeHtml(c)}</li>`)
        .join("")}</ul></details>`
    : "";
  return `<a href="#/">&larr; back to tasks</a>
  <h1>${escapeHtml(task.video_id)}</h1>
  ${video}
  <blockquote class="generated-caption" id="generated-caption">${escapeHtml(task.generated_caption)}</blockquote>
  ${references}
  ${ANNOTATION_GUIDE}
  <form id="judgment-form">
    <label>annotator id
      <input type="text" id="annotator-id" value="${escapeHtml(form.annotatorId)}">
    </label>
    <fieldset><legend>grammatically correct?</legend>${boolToggle("s-grammar", form.sGrammar)}</fieldset>
    <fieldset><legend>prominent objects in the video (recall)</legend>
      ${elementRows("recall", form.elementRecall)}
      <button id="add-recall" type="button">add video object</button>
      <label><input type="checkbox" id="no-prominent-objects"
             ${form.noProminentObjects ? "checked" : ""}> no prominent objects</label>
    </fieldset>
    <fieldset><legend>objects named in the caption (precision)</legend>
      ${elementRows("precision", form.elementPrecision)}
      <button id="add-precision" type="button">add caption object</button>
      <label><input type="checkbox" id="no-caption-objects"
             ${form.noCaptionObjects ? "checked" : ""}> caption names no objects</label>
    </fieldset>
    <fieldset><legend>action captured? (recall)</legend>${boolToggle("action-recall", form.actionRecall)}</fieldset>
    <fieldset><legend>action really in the video? (precision)</legend>${boolToggle("action-precision", form.actionPrecision)}</fieldset>
    ${ui.fieldError ? `<div class="banner error field-error">${escapeHtml(ui.fieldError)}</div>` : ""}
    ${ui.notice ? `<div class="banner notice">${escapeHtml(ui.notice)}</div>` : ""}
    <button id="submit-judgment" type="submit" ${disabled}>submit judgment</button>
    ${blockers.length ? `<ul class="blockers">${blockers.map((b) => `<li>${escapeHtml(b)}</li>`).join("")}</ul>` : ""}
  </form>`;
}

export function renderNotFound(taskId: string): string {
  return `<div class="banner error">task ${escapeHtml(taskId)} not found</div>
  <a href="#/">&larr; back to tasks</a>`;
}
