import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, getCandidates, postDecision, setBaseUrl } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
  setBaseUrl("");
});

describe("api client", () => {
  it("builds candidate queries with config overrides", async () => {
    const calls: string[] = [];
    vi.stubGlobal("fetch", (url: string) => {
      calls.push(String(url));
      return Promise.resolve(jsonResponse({ ok: true }));
    });
    setBaseUrl("http://example.test");
    await getCandidates("NCT90000001", { k: 25, scheme: "binary", measure: "jaccard" });
    expect(calls[0]).toBe(
      "http://example.test/api/registrations/NCT90000001/candidates?k=25&scheme=binary&measure=jaccard",
    );
  });

  it("posts decisions as JSON", async () => {
    let captured: RequestInit | undefined;
    vi.stubGlobal("fetch", (_url: string, init?: RequestInit) => {
      captured = init;
      return Promise.resolve(jsonResponse({ status: "open" }));
    });
    await postDecision("NCT90000001", "100", "rejected");
    expect(captured?.method).toBe("POST");
    expect(JSON.parse(String(captured?.body))).toEqual({ pmid: "100", decision: "rejected" });
  });

  it("surfaces machine-readable error codes", async () => {
    vi.stubGlobal("fetch", () =>
      Promise.resolve(jsonResponse({ code: "conflict", message: "session closed" }, 409)),
    );
    await expect(postDecision("NCT90000001", "100", "unsure")).rejects.toMatchObject({
      status: 409,
      code: "conflict",
    });
    vi.stubGlobal("fetch", () =>
      Promise.resolve(jsonResponse({ code: "not_found", message: "nope" }, 404)),
    );
    await expect(getCandidates("NCT99999999")).rejects.toBeInstanceOf(ApiError);
  });

  it("coalesces duplicate in-flight decision posts", async () => {
    let count = 0;
    vi.stubGlobal("fetch", async () => {
      count += 1;
      await new Promise((r) => setTimeout(r, 20));
      return jsonResponse({ status: "open" });
    });
    const [a, b] = await Promise.all([
      postDecision("NCT90000001", "100", "confirmed"),
      postDecision("NCT90000001", "100", "confirmed"),
    ]);
    expect(count).toBe(1);
    expect(a).toEqual(b);
  });
});
