// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { draftStore, emptyDraft } from "../src/drafts.js";

describe("draft persistence", () => {
  it("round-trips a draft across store instances (page reload)", () => {
    const first = draftStore("sess-1", window.localStorage);
    const draft = { ...emptyDraft(["L", "R"]), strategy: "discard" as const,
                    keep: "right" as const };
    first.save(draft);

    const reloaded = draftStore("sess-1", window.localStorage);
    expect(reloaded.load()).toEqual(draft);

    reloaded.clear();
    expect(reloaded.load()).toBeNull();
  });

  it("is scoped per session", () => {
    const a = draftStore("sess-a", window.localStorage);
    const b = draftStore("sess-b", window.localStorage);
    a.save(emptyDraft(["L"]));
    expect(b.load()).toBeNull();
  });

  it("ignores corrupted payloads", () => {
    window.localStorage.setItem("fairpm-draft:sess-x", "{not json");
    expect(draftStore("sess-x", window.localStorage).load()).toBeNull();
    window.localStorage.setItem("fairpm-draft:sess-x", '{"nodePath": 3}');
    expect(draftStore("sess-x", window.localStorage).load()).toBeNull();
  });
});
