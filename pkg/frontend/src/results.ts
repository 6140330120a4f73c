import type { QueryDraft, QueryResponse } from './types';

const formatScore = (value: number): string => value.toFixed(4);

/**
 * Render the ranked grid. Cards stay in server order and every number shown
 * comes straight from a response field; the console does no scoring math.
 */
export function renderResults(
  container: HTMLElement,
  response: QueryResponse,
  draft: QueryDraft,
  catalogPhrases: ReadonlySet<string>,
  onChipToggle: (phrase: string) => void,
  imageUrl: (relative: string) => string = (r) => r,
): void {
  container.textContent = '';

  const meta = document.createElement('p');
  meta.className = 'results-meta';
  meta.textContent =
    `${response.results.length} results for [${draft.phrases.join(' + ')}] · ` +
    `${response.latency_ms.toFixed(1)} ms · model ${response.model_fingerprint.slice(0, 12)}`;
  container.appendChild(meta);

  const grid = document.createElement('div');
  grid.className = 'results-grid';
  for (const item of response.results) {
    const card = document.createElement('article');
    card.className = 'result-card';
    card.dataset.imageId = item.image_id;

    const thumb = document.createElement('img');
    thumb.className = 'result-card__thumb';
    thumb.src = imageUrl(item.image_url);
    thumb.alt = item.image_id;
    card.appendChild(thumb);

    const score = document.createElement('div');
    score.className = 'result-card__score';
    score.textContent = formatScore(item.combined_score);
    card.appendChild(score);

    const chips = document.createElement('div');
    chips.className = 'result-card__chips';
    for (const [phrase, value] of Object.entries(item.per_attribute)) {
      const chip = document.createElement('button');
      chip.type = 'button';
      chip.className = 'chip result-chip';
      chip.dataset.phrase = phrase;
      if (draft.phrases.includes(phrase)) chip.classList.add('chip--selected');
      const text = document.createElement('span');
      text.textContent = `${phrase} ${formatScore(value)}`;
      chip.appendChild(text);
      if (!catalogPhrases.has(phrase)) {
        const badge = document.createElement('span');
        badge.className = 'badge badge--novel';
        badge.textContent = 'novel (untrained)';
        chip.appendChild(badge);
      }
      chip.addEventListener('click', () => onChipToggle(phrase));
      chips.appendChild(chip);
    }
    card.appendChild(chips);
    grid.appendChild(card);
  }
  container.appendChild(grid);
}
