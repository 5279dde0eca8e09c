/** Page wiring: fetch the session, render tree + review list + metrics,
 * edit drafts, preview what-ifs, commit alterations, and run fine-tunes.
 *
 * The server is the single source of truth: after every mutation the tree
 * and report are re-fetched rather than patched locally.
 */

import { ApiError, ReviewApi } from "./api.js";
import { draftStore, emptyDraft } from "./drafts.js";
import { renderMetricsPanel } from "./metricsPanel.js";
import { renderSplitList, renderTree, TreeViewModel } from "./treeView.js";
import type { AlterationDraft, SensitiveSplitEntry } from "./types.js";

interface Elements {
  tree: HTMLElement;
  splits: HTMLElement;
  draft: HTMLElement;
  metrics: HTMLElement;
  banner: HTMLElement;
  finetune: HTMLButtonElement;
}

export class ReviewPage {
  private view: TreeViewModel | null = null;
  private draft: AlterationDraft | null = null;
  private readonly drafts;

  constructor(private readonly api: ReviewApi, private readonly el: Elements,
              storage?: Storage) {
    this.drafts = draftStore(api.sessionId, storage);
  }

  async start(): Promise<void> {
    const payload = await this.api.getTree();
    this.view = new TreeViewModel(payload);
    this.draft = this.drafts.load();
    if (this.draft !== null) {
      this.view.select(this.draft.nodePath);
      this.banner(`restored an uncommitted ${this.draft.strategy} draft`);
    }
    this.el.finetune.addEventListener("click", () => {
      void this.fineTune();
    });
    this.renderAll();
    await this.refreshReport();
  }

  private banner(text: string, isError = false): void {
    this.el.banner.textContent = text;
    this.el.banner.className = isError ? "banner error" : "banner";
  }

  private renderAll(): void {
    if (this.view === null) return;
    renderTree(this.el.tree, this.view, {
      onSelect: (path) => this.pickNode(path),
      onToggle: (path) => {
        this.view!.toggle(path);
        this.renderAll();
      },
    });
    renderSplitList(this.el.splits, this.view, (path) => this.pickNode(path));
    this.renderDraft();
  }

  private async refreshReport(): Promise<void> {
    renderMetricsPanel(this.el.metrics, await this.api.getReport());
  }

  pickNode(path: string[]): void {
    if (this.view === null) return;
    this.view.select(path);
    const node = this.view.nodeAt(path);
    if (node !== null && node.kind === "split") {
      const attrs = this.sensitiveAttributesAt(path);
      this.draft = { ...emptyDraft(path), exclude: attrs };
      this.drafts.save(this.draft);
    } else {
      this.draft = null;
      this.drafts.clear();
    }
    this.renderAll();
  }

  private sensitiveAttributesAt(path: string[]): string[] {
    const key = path.join("/");
    const match = this.view!.payload.sensitive_splits.find(
      (s: SensitiveSplitEntry) => s.node_path.join("/") === key);
    return match?.attribute ? [match.attribute] : [];
  }

  private renderDraft(): void {
    const host = this.el.draft;
    if (this.draft === null) {
      host.replaceChildren(
        textEl("p", "Select an inner node to compose an alteration."));
      return;
    }
    const draft = this.draft;
    const title = textEl(
      "h3", `Alteration draft @ ${draft.nodePath.join("/") || "root"}`);

    const strategy = document.createElement("select");
    strategy.id = "draft-strategy";
    for (const option of ["retrain", "discard"]) {
      const opt = document.createElement("option");
      opt.value = option;
      opt.textContent = option;
      opt.selected = draft.strategy === option;
      strategy.appendChild(opt);
    }
    strategy.addEventListener("change", () => {
      draft.strategy = strategy.value as AlterationDraft["strategy"];
      this.drafts.save(draft);
      this.renderDraft();
    });

    const detail = document.createElement("div");
    if (draft.strategy === "discard") {
      const keep = document.createElement("select");
      keep.id = "draft-keep";
      for (const side of ["left", "right"]) {
        const opt = document.createElement("option");
        opt.value = side;
        opt.textContent = `keep ${side} subtree`;
        opt.selected = draft.keep === side;
        keep.appendChild(opt);
      }
      keep.addEventListener("change", () => {
        draft.keep = keep.value as "left" | "right";
        this.drafts.save(draft);
      });
      detail.appendChild(keep);
    } else {
      const exclude = document.createElement("input");
      exclude.id = "draft-exclude";
      exclude.value = draft.exclude.join(", ");
      exclude.placeholder = "attributes to exclude, comma separated";
      exclude.addEventListener("change", () => {
        draft.exclude = exclude.value.split(",").map((s) => s.trim())
          .filter((s) => s.length > 0);
        this.drafts.save(draft);
      });
      detail.appendChild(exclude);
    }

    const preview = buttonEl("preview-whatif", "Preview (what-if)");
    preview.addEventListener("click", () => {
      void this.preview();
    });
    const commit = buttonEl("commit-alteration", "Commit alteration");
    commit.addEventListener("click", () => {
      void this.commit();
    });

    const whatif = document.createElement("div");
    whatif.id = "whatif-result";
    host.replaceChildren(title, strategy, detail, preview, commit, whatif);
  }

  async preview(): Promise<void> {
    if (this.draft === null) return;
    try {
      const result = await this.api.whatIf(this.draft);
      const target = this.el.draft.querySelector("#whatif-result");
      if (target !== null) {
        const dp = result.avg_delta_dp_delta;
        target.textContent =
          `would change accuracy by ${result.accuracy_delta} and ` +
          `avg ΔDP by ${dp === null ? "n/a" : dp}; ` +
          `${result.candidate_sensitive_splits.length} sensitive split(s) ` +
          "would remain";
      }
    } catch (err) {
      this.showError(err);
    }
  }

  async commit(): Promise<void> {
    if (this.draft === null || this.view === null) return;
    try {
      const payload = await this.api.submitAlteration(this.draft);
      this.view.refresh(payload);
      this.draft = null;
      this.drafts.clear();
      this.banner(`alteration committed (${payload.n_alterations} total)`);
      this.renderAll();
      await this.refreshReport();
    } catch (err) {
      this.showError(err); // the draft stays; 409/422 are shown inline
    }
  }

  async fineTune(): Promise<void> {
    try {
      this.banner("fine-tuning …");
      this.el.finetune.disabled = true;
      const pending = this.api.fineTune();
      await this.api.pollUntilIdle();
      const outcome = await pending;
      this.banner(`fine-tuned; selected mode: ${outcome.chosen_mode}`);
      await this.refreshReport();
    } catch (err) {
      this.showError(err);
    } finally {
      this.el.finetune.disabled = false;
    }
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError) {
      this.banner(`request rejected (${err.status}): ${err.detail}`, true);
    } else {
      this.banner(String(err), true);
    }
  }
}

function textEl(tag: string, text: string): HTMLElement {
  const el = document.createElement(tag);
  el.textContent = text;
  return el;
}

function buttonEl(id: string, text: string): HTMLButtonElement {
  const el = document.createElement("button");
  el.id = id;
  el.textContent = text;
  return el;
}

export function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "http://127.0.0.1:8321";
  const session = params.get("session");
  if (session === null) {
    document.body.textContent =
      "missing ?session=<id> (and optional &service=<base url>)";
    return;
  }
  const api = new ReviewApi(base, session);
  const page = new ReviewPage(api, {
    tree: document.getElementById("tree")!,
    splits: document.getElementById("splits")!,
    draft: document.getElementById("draft")!,
    metrics: document.getElementById("metrics")!,
    banner: document.getElementById("banner")!,
    finetune: document.getElementById("finetune") as HTMLButtonElement,
  });
  void page.start();
}

if (typeof document !== "undefined" && document.getElementById("tree")) {
  bootstrap();
}
