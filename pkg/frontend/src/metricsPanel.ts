/** Before/after metrics comparison.
 *
 * Every figure shown is the exact value from a service payload, stringified
 * without reformatting, so a rendered panel can be checked for payload
 * equality. The panel never computes fairness numbers itself; deltas are
 * the only client-side arithmetic and are labelled as derived.
 */

import type { MetricsReport, SessionReport } from "./types.js";

function cell(value: number | null): string {
  // exact payload representation (no rounding): equality-testable
  return value === null ? "n/a" : String(value);
}

function direction(before: number | null, after: number | null,
                   lowerIsBetter: boolean): string {
  if (before === null || after === null || before === after) return "=";
  const improved = lowerIsBetter ? after < before : after > before;
  return improved ? "↓ improved" : "↑ worse";
}

export function renderMetricsPanel(container: HTMLElement,
                                   report: SessionReport): void {
  const before = report.before;
  const after = report.after;

  const table = document.createElement("table");
  table.className = "metrics-table";
  const head = table.insertRow();
  for (const text of ["metric", "before", "after", "direction"]) {
    const th = document.createElement("th");
    th.textContent = text;
    head.appendChild(th);
  }

  const addRow = (name: string, b: number | null, a: number | null,
                  lowerIsBetter: boolean, css: string) => {
    const row = table.insertRow();
    row.className = css;
    row.insertCell().textContent = name;
    const bCell = row.insertCell();
    bCell.className = "value before";
    bCell.textContent = cell(b);
    const aCell = row.insertCell();
    aCell.className = "value after";
    aCell.textContent = cell(a);
    row.insertCell().textContent = direction(b, a, lowerIsBetter);
  };

  addRow("accuracy", before.accuracy, after.accuracy, false, "accuracy");
  addRow("avg ΔDP", before.avg_delta_dp, after.avg_delta_dp, true,
         "avg-dp");
  for (const spec of Object.keys(before.delta_dp).sort()) {
    addRow(`ΔDP ${spec}`, before.delta_dp[spec].delta,
           after.delta_dp[spec]?.delta ?? null, true,
           `spec-${spec.replace(/[^a-zA-Z0-9_-]/g, "_")}`);
  }

  const heading = document.createElement("h3");
  heading.textContent = report.chosen_mode
    ? `Before vs after (fine-tuned via ${report.chosen_mode})`
    : "Before vs after (no fine-tune yet)";

  const audit = document.createElement("p");
  audit.className = "audit";
  audit.textContent = `${report.audit_log.length} committed alteration(s)`;

  container.replaceChildren(heading, table, audit);
}

/** Flat list of the exact numbers shown, for payload-equality checks. */
export function panelValues(container: HTMLElement): string[] {
  return Array.from(container.querySelectorAll("td.value"),
                    (td) => td.textContent ?? "");
}

/** The payload values the panel is expected to mirror, in render order. */
export function expectedValues(report: SessionReport): string[] {
  const out: string[] = [];
  const push = (r: MetricsReport) => [r.accuracy, r.avg_delta_dp,
    ...Object.keys(r.delta_dp).sort().map((k) => r.delta_dp[k].delta)];
  const befores = push(report.before);
  const afters = push(report.after);
  for (let i = 0; i < befores.length; i++) {
    out.push(cell(befores[i] as number | null));
    out.push(cell(afters[i] as number | null));
  }
  return out;
}
