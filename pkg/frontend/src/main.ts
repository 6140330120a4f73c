import { ApiClient, PhraseTooLongError } from './api';
import {
  MAX_K,
  MIN_K,
  QueryHistory,
  addPhrase,
  draftFromQueryString,
  draftToQueryString,
  removePhrase,
  setK,
  setMode,
  togglePhrase,
} from './state';
import { renderPalette } from './palette';
import { renderResults } from './results';
import type { CatalogItem, QueryDraft } from './types';

export interface AppHandles {
  getDraft(): QueryDraft;
  submit(): Promise<void>;
  reloadCatalog(): Promise<void>;
  history: QueryHistory;
  root: HTMLElement;
}

const el = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text = '',
): HTMLElementTagNameMap[K] => {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
};

export async function createApp(
  root: HTMLElement,
  api: ApiClient,
  win: Pick<Window, 'location' | 'history'> = window,
): Promise<AppHandles> {
  root.textContent = '';
  root.appendChild(el('h1', 'app-title', 'Attribute person search'));
  const banner = el('div', 'banner banner--hidden');
  const paletteBox = el('div', 'palette');
  const draftBox = el('div', 'draft');
  const message = el('p', 'draft__message');
  const resultsBox = el('div', 'results');
  const historyBox = el('aside', 'history');

  const selectedChips = el('div', 'draft__selected');
  const freeText = el('input', 'draft__free-text') as HTMLInputElement;
  freeText.placeholder = 'Type a free-text attribute phrase…';
  const addButton = el('button', 'draft__add', 'Add phrase') as HTMLButtonElement;
  addButton.type = 'button';
  const kInput = el('input', 'draft__k') as HTMLInputElement;
  kInput.type = 'number';
  kInput.min = String(MIN_K);
  kInput.max = String(MAX_K);
  const modeSelect = el('select', 'draft__mode') as HTMLSelectElement;
  for (const mode of ['mean', 'product', 'min']) {
    const option = document.createElement('option');
    option.value = mode;
    option.textContent = mode;
    modeSelect.appendChild(option);
  }
  const submitButton = el('button', 'draft__submit', 'Search') as HTMLButtonElement;
  submitButton.type = 'button';
  draftBox.append(selectedChips, freeText, addButton, kInput, modeSelect, submitButton, message);
  root.append(banner, paletteBox, draftBox, resultsBox, historyBox);

  let catalog: CatalogItem[] = [];
  let catalogPhrases = new Set<string>();
  let draft = draftFromQueryString(win.location.search);
  const history = new QueryHistory();
  let inflight: AbortController | null = null;

  const syncDraftView = () => {
    kInput.value = String(draft.k);
    modeSelect.value = draft.mode;
    selectedChips.textContent = '';
    for (const phrase of draft.phrases) {
      const chip = el('button', 'chip chip--selected draft-chip') as HTMLButtonElement;
      chip.type = 'button';
      chip.dataset.phrase = phrase;
      const text = el('span', '', phrase);
      chip.appendChild(text);
      if (catalogPhrases.size > 0 && !catalogPhrases.has(phrase)) {
        chip.appendChild(el('span', 'badge badge--novel', 'novel (untrained)'));
      }
      chip.addEventListener('click', () => {
        draft = removePhrase(draft, phrase);
        syncDraftView();
        renderPalette(paletteBox, catalog, new Set(draft.phrases), onPick);
      });
      selectedChips.appendChild(chip);
    }
  };

  const onPick = (phrase: string) => {
    draft = togglePhrase(draft, phrase);
    syncDraftView();
    renderPalette(paletteBox, catalog, new Set(draft.phrases), onPick);
  };

  const syncHistoryView = () => {
    historyBox.textContent = '';
    if (history.length === 0) return;
    historyBox.appendChild(el('h3', '', 'History'));
    history.list().forEach((entry, idx) => {
      const button = el('button', 'history__entry') as HTMLButtonElement;
      button.type = 'button';
      button.textContent = `${idx + 1}. ${entry.phrases.join(' + ')} (k=${entry.k})`;
      button.addEventListener('click', () => {
        draft = { ...entry, phrases: [...entry.phrases] };
        syncDraftView();
        renderPalette(paletteBox, catalog, new Set(draft.phrases), onPick);
        void submit();
      });
      historyBox.appendChild(button);
    });
  };

  const reloadCatalog = async () => {
    try {
      catalog = await api.loadCatalog();
      catalogPhrases = new Set(catalog.map((i) => i.phrase));
      banner.className = 'banner banner--hidden';
      banner.textContent = '';
    } catch {
      catalog = [];
      catalogPhrases = new Set();
      banner.className = 'banner banner--offline';
      banner.textContent = 'Service unreachable — retry';
      // free-text entry stays usable while offline
    }
    renderPalette(paletteBox, catalog, new Set(draft.phrases), onPick);
    syncDraftView();
  };
  banner.addEventListener('click', () => void reloadCatalog());

  const submit = async () => {
    if (draft.phrases.length === 0) {
      message.textContent = 'Add at least one attribute phrase.';
      return;
    }
    message.textContent = '';
    inflight?.abort(); // newest submission wins
    inflight = new AbortController();
    try {
      const response = await api.submitQuery(draft, inflight.signal);
      renderResults(resultsBox, response, draft, catalogPhrases, (phrase) => {
        draft = togglePhrase(draft, phrase);
        syncDraftView();
        renderPalette(paletteBox, catalog, new Set(draft.phrases), onPick);
      }, (rel) => api.imageUrl(rel));
      history.add(draft);
      syncHistoryView();
      win.history.replaceState(null, '', `?${draftToQueryString(draft)}`);
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') return;
      message.textContent =
        err instanceof PhraseTooLongError ? 'phrase too long' : `Query failed: ${String(err)}`;
    }
  };

  addButton.addEventListener('click', () => {
    draft = addPhrase(draft, freeText.value);
    freeText.value = '';
    syncDraftView();
    renderPalette(paletteBox, catalog, new Set(draft.phrases), onPick);
  });
  kInput.addEventListener('change', () => {
    draft = setK(draft, Number(kInput.value));
    syncDraftView();
  });
  modeSelect.addEventListener('change', () => {
    draft = setMode(draft, modeSelect.value);
  });
  submitButton.addEventListener('click', () => void submit());

  await reloadCatalog();
  return {
    getDraft: () => draft,
    submit,
    reloadCatalog,
    history,
    root,
  };
}

declare global {
  interface Window {
    __OAPR_TEST__?: boolean;
  }
}

if (typeof window !== 'undefined' && !window.__OAPR_TEST__) {
  const mount = document.getElementById('app');
  if (mount) void createApp(mount, new ApiClient(''));
}
