// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { expectedValues, panelValues, renderMetricsPanel } from "../src/metricsPanel.js";
import type { SessionReport } from "../src/types.js";

function report(): SessionReport {
  return {
    session_id: "s",
    status: "reviewing",
    before: {
      accuracy: 0.8846153846153846,
      avg_delta_dp: 0.9964285714285714,
      delta_dp: {
        "gender@consultation": { delta: 0.9964285714285714, p1: 1.0, p2: 0.0036,
                                 n1: 140, n2: 138 },
      },
    },
    after: {
      accuracy: 0.8481538461538462,
      avg_delta_dp: 0.0017857142857142857,
      delta_dp: {
        "gender@consultation": { delta: 0.0017857142857142857, p1: 0.0,
                                 p2: 0.0017857142857142857, n1: 140, n2: 138 },
      },
    },
    chosen_mode: "differing-prefixes",
    audit_log: [{ node_path: ["L"], strategy: "retrain", keep: null,
                  exclude: ["gender"] }],
  };
}

describe("metrics panel", () => {
  it("renders exactly the payload's numbers (S1 payload equality)", () => {
    const host = document.createElement("div");
    const doc = report();
    renderMetricsPanel(host, doc);
    expect(panelValues(host)).toEqual(expectedValues(doc));
    // spot check: full-precision payload values, not reformatted
    expect(panelValues(host)).toContain("0.8846153846153846");
    expect(panelValues(host)).toContain("0.0017857142857142857");
  });

  it("marks a parity-gap decrease as an improvement", () => {
    const host = document.createElement("div");
    renderMetricsPanel(host, report());
    const rows = Array.from(host.querySelectorAll("tr"));
    const dpRow = rows.find((r) => r.textContent?.includes("avg ΔDP"));
    expect(dpRow?.textContent).toContain("improved");
    const accRow = rows.find((r) => r.textContent?.startsWith("accuracy"));
    expect(accRow?.textContent).toContain("worse");
  });

  it("identical before/after renders all-equal directions", () => {
    const host = document.createElement("div");
    const doc = report();
    const same = { ...doc, after: doc.before };
    renderMetricsPanel(host, same);
    const directions = Array.from(host.querySelectorAll("tr"))
      .slice(1)
      .map((r) => r.lastElementChild?.textContent);
    expect(new Set(directions)).toEqual(new Set(["="]));
  });

  it("shows n/a for undefined parity values", () => {
    const host = document.createElement("div");
    const doc = report();
    doc.after.avg_delta_dp = null;
    doc.after.delta_dp["gender@consultation"].delta = null;
    renderMetricsPanel(host, doc);
    expect(panelValues(host)).toContain("n/a");
    expect(panelValues(host)).toEqual(expectedValues(doc));
  });

  it("reports the audit-log length", () => {
    const host = document.createElement("div");
    renderMetricsPanel(host, report());
    expect(host.querySelector("p.audit")?.textContent)
      .toBe("1 committed alteration(s)");
  });
});
