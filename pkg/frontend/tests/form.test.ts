import { describe, expect, it } from "vitest";

import {
  FormState,
  addRow,
  canSubmit,
  emptyForm,
  fromJudgment,
  removeRow,
  submitBlockers,
  toJudgment,
} from "../src/form.js";

function filledForm(overrides: Partial<FormState> = {}): FormState {
  return {
    annotatorId: "ann1",
    sGrammar: true,
    noProminentObjects: false,
    elementRecall: [
      { label: "cat", matched: true },
      { label: "sofa", matched: false },
    ],
    noCaptionObjects: false,
    elementPrecision: [{ label: "cat", matched: true }],
    actionRecall: true,
    actionPrecision: false,
    ...overrides,
  };
}

describe("submit gating", () => {
  it("blocks an empty form", () => {
    expect(canSubmit(emptyForm())).toBe(false);
  });

  it("requires annotator id and both action toggles", () => {
    expect(submitBlockers(filledForm({ annotatorId: " " }))).toContainEqual(
      expect.stringContaining("annotator"),
    );
    expect(submitBlockers(filledForm({ actionRecall: null }))).toContainEqual(
      expect.stringContaining("action recall"),
    );
    expect(submitBlockers(filledForm({ actionPrecision: null }))).toContainEqual(
      expect.stringContaining("action precision"),
    );
    expect(canSubmit(filledForm())).toBe(true);
  });

  it("requires the grammar answer", () => {
    expect(canSubmit(filledForm({ sGrammar: null }))).toBe(false);
  });

  it("allows empty element lists only via the explicit checkboxes", () => {
    const missingRows = filledForm({ elementRecall: [], elementPrecision: [] });
    expect(canSubmit(missingRows)).toBe(false);
    const deliberate = filledForm({
      elementRecall: [],
      noProminentObjects: true,
      elementPrecision: [],
      noCaptionObjects: true,
    });
    expect(canSubmit(deliberate)).toBe(true);
  });

  it("rejects the checkbox together with rows", () => {
    expect(canSubmit(filledForm({ noProminentObjects: true }))).toBe(false);
  });
});

describe("row editing", () => {
  it("adding three recall rows yields element_recall of length 3", () => {
    let form = filledForm({ elementRecall: [] });
    form.elementRecall = addRow(form.elementRecall, "cat");
    form.elementRecall = addRow(form.elementRecall, "dog");
    form.elementRecall = addRow(form.elementRecall, "ball");
    form.elementRecall = form.elementRecall.map((r) => ({ ...r, matched: true }));
    expect(toJudgment(form).element_recall).toEqual([true, true, true]);
    expect(toJudgment(form).element_recall_labels).toEqual(["cat", "dog", "ball"]);
  });

  it("removing a row keeps the others in order", () => {
    const rows = [
      { label: "a", matched: true },
      { label: "b", matched: false },
      { label: "c", matched: true },
    ];
    expect(removeRow(rows, 1)).toEqual([rows[0], rows[2]]);
  });
});

describe("serialization", () => {
  it("maps the worked example to the exact payload", () => {
    expect(toJudgment(filledForm())).toEqual({
      annotator_id: "ann1",
      s_grammar: true,
      element_recall: [true, false],
      element_precision: [true],
      action_recall: true,
      action_precision: false,
      element_recall_labels: ["cat", "sofa"],
      element_precision_labels: ["cat"],
    });
  });

  it("refuses to serialize an unsubmittable form", () => {
    expect(() => toJudgment(emptyForm())).toThrow(/not submittable/);
  });

  it("round-trips: fromJudgment(toJudgment(form)) === form", () => {
    const cases: FormState[] = [
      filledForm(),
      filledForm({
        elementRecall: [],
        noProminentObjects: true,
        elementPrecision: [],
        noCaptionObjects: true,
      }),
      filledForm({ sGrammar: false, actionRecall: false, actionPrecision: true }),
    ];
    for (const form of cases) {
      expect(fromJudgment(toJudgment(form))).toEqual(form);
    }
  });

  it("round-trips random forms", () => {
    let seed = 12345;
    const rand = () => {
      // deterministic LCG so failures reproduce
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let i = 0; i < 200; i++) {
      const rows = (n: number) =>
        Array.from({ length: n }, (_, k) => ({
          label: `obj${k}-${Math.floor(rand() * 10)}`,
          matched: rand() < 0.5,
        }));
      const nRecall = Math.floor(rand() * 4);
      const nPrecision = Math.floor(rand() * 4);
      const form = filledForm({
        annotatorId: `ann${Math.floor(rand() * 100)}`,
        sGrammar: rand() < 0.5,
        elementRecall: rows(nRecall),
        noProminentObjects: nRecall === 0,
        elementPrecision: rows(nPrecision),
        noCaptionObjects: nPrecision === 0,
        actionRecall: rand() < 0.5,
        actionPrecision: rand() < 0.5,
      });
      expect(fromJudgment(toJudgment(form))).toEqual(form);
    }
  });
});
