/** Client-side judgment form state and its (de)serialization.
 *
 * Element rows carry a free-text label purely for inter-annotator audit;
 * only the boolean enters the stored record. An element list may be left
 * empty only by ticking its explicit "none" checkbox, so an empty array
 * is always a deliberate statement, never a forgotten section.
 */

import type { JudgmentPayload } from "./types.js";

export interface ElementRow {
  label: string;
  matched: boolean;
}

export interface FormState {
  annotatorId: string;
  sGrammar: boolean | null;
  noProminentObjects: boolean; // explicit: the video has no prominent objects
  elementRecall: ElementRow[];
  noCaptionObjects: boolean; // explicit: the caption names no objects
  elementPrecision: ElementRow[];
  actionRecall: boolean | null;
  actionPrecision: boolean | null;
}

export function emptyForm(): FormState {
  return {
    annotatorId: "",
    sGrammar: null,
    noProminentObjects: false,
    elementRecall: [],
    noCaptionObjects: false,
    elementPrecision: [],
    actionRecall: null,
    actionPrecision: null,
  };
}

export function addRow(rows: ElementRow[], label = ""): ElementRow[] {
  return [...rows, { label, matched: false }];
}

export function removeRow(rows: ElementRow[], index: number): ElementRow[] {
  return rows.filter((_, i) => i !== index);
}

/** Every reason the submit button must stay disabled. */
export function submitBlockers(form: FormState): string[] {
  const blockers: string[] = [];
  if (form.annotatorId.trim() === "") {
    blockers.push("annotator id is required");
  }
  if (form.sGrammar === null) {
    blockers.push("answer the grammar question");
  }
  if (form.actionRecall === null) {
    blockers.push("answer action recall");
  }
  if (form.actionPrecision === null) {
    blockers.push("answer action precision");
  }
  if (form.elementRecall.length === 0 && !form.noProminentObjects) {
    blockers.push('add video object rows or tick "no prominent objects"');
  }
  if (form.elementPrecision.length === 0 && !form.noCaptionObjects) {
    blockers.push('add caption object rows or tick "caption names no objects"');
  }
  if (form.noProminentObjects && form.elementRecall.length > 0) {
    blockers.push('"no prominent objects" conflicts with recall rows');
  }
  if (form.noCaptionObjects && form.elementPrecision.length > 0) {
    blockers.push('"caption names no objects" conflicts with precision rows');
  }
  return blockers;
}

export function canSubmit(form: FormState): boolean {
  return submitBlockers(form).length === 0;
}

export function toJudgment(form: FormState): JudgmentPayload {
  if (!canSubmit(form)) {
    throw new Error(`form not submittable: ${submitBlockers(form).join("; ")}`);
  }
  return {
    annotator_id: form.annotatorId.trim(),
    s_grammar: form.sGrammar as boolean,
    element_recall: form.elementRecall.map((r) => r.matched),
    element_precision: form.elementPrecision.map((r) => r.matched),
    action_recall: form.actionRecall as boolean,
    action_precision: form.actionPrecision as boolean,
    element_recall_labels: form.elementRecall.map((r) => r.label),
    element_precision_labels: form.elementPrecision.map((r) => r.label),
  };
}

/** Inverse of toJudgment: a stored record reopens as the identical form. */
export function fromJudgment(payload: JudgmentPayload): FormState {
  const zip = (matched: boolean[], labels: string[]): ElementRow[] =>
    matched.map((m, i) => ({ label: labels[i] ?? "", matched: m }));
  return {
    annotatorId: payload.annotator_id,
    sGrammar: payload.s_grammar,
    noProminentObjects: payload.element_recall.length === 0,
    elementRecall: zip(payload.element_recall, payload.element_recall_labels),
    noCaptionObjects: payload.element_precision.length === 0,
    elementPrecision: zip(payload.element_precision, payload.element_precision_labels),
    actionRecall: payload.action_recall,
    actionPrecision: payload.action_precision,
  };
}
