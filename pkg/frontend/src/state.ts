import type { CombineMode, QueryDraft } from './types';

export const MIN_K = 1;
export const MAX_K = 100;
const MODES: CombineMode[] = ['mean', 'product', 'min'];

export const createDraft = (): QueryDraft => ({ phrases: [], k: 10, mode: 'mean' });

export function addPhrase(draft: QueryDraft, raw: string): QueryDraft {
  const phrase = raw.trim();
  if (!phrase || draft.phrases.includes(phrase)) return draft; // duplicates rejected at add time
  return { ...draft, phrases: [...draft.phrases, phrase] };
}

export function removePhrase(draft: QueryDraft, phrase: string): QueryDraft {
  if (!draft.phrases.includes(phrase)) return draft;
  return { ...draft, phrases: draft.phrases.filter((p) => p !== phrase) };
}

export function togglePhrase(draft: QueryDraft, phrase: string): QueryDraft {
  return draft.phrases.includes(phrase.trim())
    ? removePhrase(draft, phrase.trim())
    : addPhrase(draft, phrase);
}

export function setK(draft: QueryDraft, k: number): QueryDraft {
  const clamped = Math.min(Math.max(Math.round(k) || MIN_K, MIN_K), MAX_K);
  return { ...draft, k: clamped };
}

export function setMode(draft: QueryDraft, mode: string): QueryDraft {
  return MODES.includes(mode as CombineMode) ? { ...draft, mode: mode as CombineMode } : draft;
}

/** Shareable query-string form: ?a=<phrase>&a=<phrase>&k=5&mode=mean */
export function draftToQueryString(draft: QueryDraft): string {
  const params = new URLSearchParams();
  draft.phrases.forEach((p) => params.append('a', p));
  params.set('k', String(draft.k));
  params.set('mode', draft.mode);
  return params.toString();
}

export function draftFromQueryString(query: string): QueryDraft {
  const params = new URLSearchParams(query);
  let draft = createDraft();
  for (const phrase of params.getAll('a')) draft = addPhrase(draft, phrase);
  const k = params.get('k');
  if (k !== null) draft = setK(draft, Number(k));
  const mode = params.get('mode');
  if (mode !== null) draft = setMode(draft, mode);
  return draft;
}

/** Append-only session history; replayable via list(). */
export class QueryHistory {
  private entries: QueryDraft[] = [];

  add(draft: QueryDraft): void {
    this.entries.push({ ...draft, phrases: [...draft.phrases] });
  }

  list(): readonly QueryDraft[] {
    return this.entries;
  }

  get length(): number {
    return this.entries.length;
  }
}
