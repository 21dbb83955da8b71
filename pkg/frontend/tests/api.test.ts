import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";

const payload = {
  annotator_id: "ann1",
  s_grammar: true,
  element_recall: [true],
  element_precision: [true],
  action_recall: true,
  action_precision: false,
  element_recall_labels: ["cat"],
  element_precision_labels: ["cat"],
};

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("api client", () => {
  it("lists tasks with an optional status filter", async () => {
    const fetchMock = vi.fn(async () => new Response(JSON.stringify([]), { status: 200 }));
    vi.stubGlobal("fetch", fetchMock);
    const client = new ApiClient("http://svc");
    await client.listTasks();
    await client.listTasks("open");
    expect(fetchMock).toHaveBeenNthCalledWith(1, "http://svc/tasks");
    expect(fetchMock).toHaveBeenNthCalledWith(2, "http://svc/tasks?status=open");
  });

  it("posts judgments as JSON and returns the stored record", async () => {
    const fetchMock = vi.fn(
      async () => new Response(JSON.stringify({ video_id: "v0" }), { status: 201 }),
    );
    vi.stubGlobal("fetch", fetchMock);
    const result = await new ApiClient("http://svc").submitJudgment("t1", payload);
    expect(result).toEqual({ ok: true, value: { video_id: "v0" } });
    const [url, options] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://svc/tasks/t1/judgments");
    expect(options.method).toBe("POST");
    expect(JSON.parse(options.body as string)).toEqual(payload);
  });

  it("surfaces HTTP errors with status and detail", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response(JSON.stringify({ detail: "already judged" }), { status: 409 })),
    );
    const result = await new ApiClient("http://svc").submitJudgment("t1", payload);
    expect(result).toEqual({ ok: false, status: 409, detail: "already judged" });
  });

  it("maps network failure to status 0 so the UI can show the retry banner", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => Promise.reject(new TypeError("fetch failed"))));
    const result = await new ApiClient("http://svc").listTasks();
    expect(result.ok).toBe(false);
    if (!result.ok) {
      expect(result.status).toBe(0);
      expect(result.detail).toContain("fetch failed");
    }
  });
});
