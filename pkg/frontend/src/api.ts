/** Thin typed client for the review service; every displayed number comes
 * from these payloads and nowhere else. */

import type {
  AlterationDraft, FineTuneResponse, SessionReport, StatusResponse,
  TreePayload, WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parse<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

function draftBody(draft: AlterationDraft): string {
  return JSON.stringify({
    node_path: draft.nodePath,
    strategy: draft.strategy,
    keep: draft.strategy === "discard" ? draft.keep : null,
    exclude: draft.strategy === "retrain" ? draft.exclude : [],
  });
}

export class ReviewApi {
  constructor(readonly baseUrl: string, readonly sessionId: string) {}

  private url(suffix: string): string {
    return `${this.baseUrl}/session/${this.sessionId}${suffix}`;
  }

  async getTree(): Promise<TreePayload> {
    return parse(await fetch(this.url("/tree")));
  }

  async getStatus(): Promise<StatusResponse> {
    return parse(await fetch(this.url("/status")));
  }

  async getReport(): Promise<SessionReport> {
    return parse(await fetch(this.url("/report")));
  }

  async submitAlteration(draft: AlterationDraft): Promise<TreePayload> {
    return parse(await fetch(this.url("/alterations"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: draftBody(draft),
    }));
  }

  async whatIf(draft: AlterationDraft): Promise<WhatIfResponse> {
    return parse(await fetch(this.url("/whatif"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: draftBody(draft),
    }));
  }

  async fineTune(): Promise<FineTuneResponse> {
    return parse(await fetch(this.url("/finetune"), { method: "POST" }));
  }

  /** Poll session status until the background fine-tune settles. */
  async pollUntilIdle(intervalMs = 500, maxTries = 600): Promise<StatusResponse> {
    for (let i = 0; i < maxTries; i++) {
      const status = await this.getStatus();
      if (status.status !== "fine-tuning") return status;
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
    throw new Error("fine-tune did not settle in time");
  }
}
