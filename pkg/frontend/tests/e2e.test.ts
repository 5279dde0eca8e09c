// @vitest-environment jsdom
/**
 * End-to-end review flow against a live service (S2): load the session,
 * walk the flagged sensitive splits, commit retrains, fine-tune, and check
 * that the before/after panel shows the parity gap dropping by >= 0.3 --
 * driven through the page object and DOM clicks, with a freshly spawned
 * Python service underneath.
 */
import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { ReviewPage } from "../src/main.js";
import { expectedValues, panelValues } from "../src/metricsPanel.js";

const PORT = 8377;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess | null = null;

async function waitForService(timeoutMs = 240_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/sessions`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("fixture service did not come up");
}

function pageElements() {
  document.body.innerHTML = `
    <div id="tree"></div><div id="splits"></div><div id="draft"></div>
    <div id="metrics"></div><div id="banner"></div>
    <button id="finetune"></button>`;
  return {
    tree: document.getElementById("tree")!,
    splits: document.getElementById("splits")!,
    draft: document.getElementById("draft")!,
    metrics: document.getElementById("metrics")!,
    banner: document.getElementById("banner")!,
    finetune: document.getElementById("finetune") as HTMLButtonElement,
  };
}

describe("end-to-end review flow", () => {
  beforeAll(async () => {
    server = spawn("python3", ["tests/serve_fixture.py"], {
      cwd: process.cwd(),
      env: { ...process.env, PORT: String(PORT) },
      stdio: ["ignore", "pipe", "inherit"],
    });
    await waitForService();
  }, 300_000);

  afterAll(() => {
    server?.kill();
  });

  it("flag -> retrain -> fine-tune -> parity gap drops by >= 0.3", async () => {
    const api = new ReviewApi(BASE, "e2e");
    const el = pageElements();
    const page = new ReviewPage(api, el, window.localStorage);
    await page.start();

    // the service highlights sensitive splits; the rendered list matches
    let payload = await api.getTree();
    expect(payload.sensitive_splits.length).toBeGreaterThan(0);
    expect(el.splits.querySelectorAll("li").length)
      .toBe(payload.sensitive_splits.length);
    const flagged = el.tree.querySelectorAll("g.tree-node.sensitive");
    expect(flagged.length).toBe(payload.sensitive_splits.length);

    const before = await api.getReport();
    const beforeGap = before.before.avg_delta_dp ?? 0;

    // review every flagged split: click it in the list, commit the retrain
    for (let guard = 0; guard < 10; guard++) {
      payload = await api.getTree();
      if (payload.sensitive_splits.length === 0) break;
      const button = el.splits.querySelector("li button") as HTMLButtonElement;
      button.click(); // selects the node and drafts a retrain
      await page.commit();
    }
    payload = await api.getTree();
    expect(payload.sensitive_splits.length).toBe(0);
    expect(payload.n_alterations).toBeGreaterThan(0);

    await page.fineTune();

    const report = await api.getReport();
    const afterGap = report.after.avg_delta_dp ?? 0;
    expect(beforeGap - afterGap).toBeGreaterThanOrEqual(0.3);

    // S1 on live data: the rendered panel mirrors the payload exactly
    expect(panelValues(el.metrics)).toEqual(expectedValues(report));
    const afterCells = el.metrics.querySelectorAll("td.value.after");
    expect(afterCells.length).toBeGreaterThan(0);
  }, 300_000);
});
