/** Browser shell: hash routing, event wiring, and service calls.
 *
 * State lives here; rendering is delegated to the pure functions in
 * views.ts. A failed POST keeps the form state untouched so nothing the
 * annotator typed is lost; a successful one advances to the next open
 * task. Double submits are blocked by the `submitting` latch.
 */

import { ApiClient } from "./api.js";
import type { AnnotationTask } from "./types.js";
import { UNREACHABLE } from "./types.js";
import {
  FormState,
  addRow,
  canSubmit,
  emptyForm,
  removeRow,
  toJudgment,
} from "./form.js";
import {
  DetailUiState,
  renderNotFound,
  renderRetryBanner,
  renderTaskDetail,
  renderTaskList,
} from "./views.js";

const api = new ApiClient(
  (window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? "http://127.0.0.1:8000",
);

const root = document.getElementById("app") as HTMLElement;

let currentTask: AnnotationTask | null = null;
let form: FormState = emptyForm();
let ui: DetailUiState = { submitting: false, notice: null, fieldError: null };
let rememberedAnnotator = "";

async function showList(): Promise<void> {
  const [tasks, score] = await Promise.all([api.listTasks(), api.score()]);
  root.innerHTML = renderTaskList(tasks, score);
  const retry = document.getElementById("retry-button");
  if (retry) retry.addEventListener("click", () => void showList());
}

async function showDetail(taskId: string, fresh: boolean): Promise<void> {
  const tasks = await api.listTasks();
  if (!tasks.ok) {
    root.innerHTML =
      tasks.status === UNREACHABLE ? renderRetryBanner(tasks.detail) : renderNotFound(taskId);
    const retry = document.getElementById("retry-button");
    if (retry) retry.addEventListener("click", () => void showDetail(taskId, fresh));
    return;
  }
  const task = tasks.value.find((t) => t.task_id === taskId);
  if (!task) {
    root.innerHTML = renderNotFound(taskId);
    return;
  }
  currentTask = task;
  if (fresh) {
    form = emptyForm();
    form.annotatorId = rememberedAnnotator;
    ui = { submitting: false, notice: null, fieldError: null };
  }
  paintDetail();
}

function paintDetail(): void {
  if (!currentTask) return;
  root.innerHTML = renderTaskDetail(currentTask, form, ui);
  wireDetailEvents();
}

function readBack(): void {
  // pull current input values into the form before re-rendering
  const annotator = document.getElementById("annotator-id") as HTMLInputElement | null;
  if (annotator) form.annotatorId = annotator.value;
  for (const kind of ["recall", "precision"] as const) {
    const rows = kind === "recall" ? form.elementRecall : form.elementPrecision;
    document
      .querySelectorAll<HTMLInputElement>(`input.row-label[data-kind="${kind}"]`)
      .forEach((el) => {
        const i = Number(el.dataset.index);
        if (rows[i]) rows[i].label = el.value;
      });
    document
      .querySelectorAll<HTMLInputElement>(`input.row-matched[data-kind="${kind}"]`)
      .forEach((el) => {
        const i = Number(el.dataset.index);
        if (rows[i]) rows[i].matched = el.checked;
      });
  }
}

function wireDetailEvents(): void {
  const formEl = document.getElementById("judgment-form") as HTMLFormElement;

  formEl.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    readBack();
    if (target.name === "s-grammar") form.sGrammar = target.value === "true";
    if (target.name === "action-recall") form.actionRecall = target.value === "true";
    if (target.name === "action-precision") form.actionPrecision = target.value === "true";
    if (target.id === "no-prominent-objects") form.noProminentObjects = target.checked;
    if (target.id === "no-caption-objects") form.noCaptionObjects = target.checked;
    paintDetail();
  });

  formEl.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "add-recall") {
      readBack();
      form.elementRecall = addRow(form.elementRecall);
      form.noProminentObjects = false;
      paintDetail();
    } else if (target.id === "add-precision") {
      readBack();
      form.elementPrecision = addRow(form.elementPrecision);
      form.noCaptionObjects = false;
      paintDetail();
    } else if (target.classList.contains("row-remove")) {
      readBack();
      const kind = target.dataset.kind as "recall" | "precision";
      const index = Number(target.dataset.index);
      if (kind === "recall") form.elementRecall = removeRow(form.elementRecall, index);
      else form.elementPrecision = removeRow(form.elementPrecision, index);
      paintDetail();
    }
  });

  formEl.addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });

  const annotator = document.getElementById("annotator-id") as HTMLInputElement;
  annotator.addEventListener("input", () => {
    readBack();
    const submitButton = document.getElementById("submit-judgment") as HTMLButtonElement;
    submitButton.disabled = !canSubmit(form) || ui.submitting;
  });
}

async function submit(): Promise<void> {
  if (!currentTask || ui.submitting) return; // double-submit latch
  readBack();
  if (!canSubmit(form)) {
    paintDetail();
    return;
  }
  ui = { submitting: true, notice: null, fieldError: null };
  paintDetail();
  const result = await api.submitJudgment(currentTask.task_id, toJudgment(form));
  if (result.ok) {
    rememberedAnnotator = form.annotatorId;
    await advanceToNextOpenTask();
    return;
  }
  // failure: keep the form state exactly as typed
  ui = {
    submitting: false,
    notice:
      result.status === 409
        ? "already scored by this annotator"
        : result.status === UNREACHABLE
          ? `service unreachable, nothing lost; try again (${result.detail})`
          : null,
    fieldError: result.status === 422 ? result.detail : null,
  };
  paintDetail();
}

async function advanceToNextOpenTask(): Promise<void> {
  const open = await api.listTasks("open");
  if (open.ok) {
    const next = open.value.find((t) => t.task_id !== currentTask?.task_id);
    if (next) {
      window.location.hash = `#/tasks/${next.task_id}`;
      return;
    }
  }
  window.location.hash = "#/";
}

function route(): void {
  const hash = window.location.hash;
  const match = hash.match(/^#\/tasks\/(.+)$/);
  if (match && match[1]) {
    void showDetail(decodeURIComponent(match[1]), true);
  } else {
    void showList();
  }
}

window.addEventListener("hashchange", route);
route();
