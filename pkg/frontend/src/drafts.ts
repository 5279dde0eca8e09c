/** Uncommitted alteration drafts, persisted per session so a page reload
 * never loses a reviewer's work in progress. */

import type { AlterationDraft } from "./types.js";

const PREFIX = "fairpm-draft:";

export interface DraftStore {
  load(): AlterationDraft | null;
  save(draft: AlterationDraft): void;
  clear(): void;
}

export function draftStore(sessionId: string,
                           storage: Storage = window.localStorage): DraftStore {
  const key = PREFIX + sessionId;
  return {
    load(): AlterationDraft | null {
      const raw = storage.getItem(key);
      if (raw === null) return null;
      try {
        const doc = JSON.parse(raw);
        if (!Array.isArray(doc.nodePath)) return null;
        return doc as AlterationDraft;
      } catch {
        return null;
      }
    },
    save(draft: AlterationDraft): void {
      storage.setItem(key, JSON.stringify(draft));
    },
    clear(): void {
      storage.removeItem(key);
    },
  };
}

export function emptyDraft(nodePath: string[]): AlterationDraft {
  return { nodePath, strategy: "retrain", keep: "left", exclude: [] };
}
