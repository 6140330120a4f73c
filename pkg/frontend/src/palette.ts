import type { CatalogItem } from './types';

/** Render the attribute palette grouped by split; novel chips carry a badge. */
export function renderPalette(
  container: HTMLElement,
  items: CatalogItem[],
  selected: ReadonlySet<string>,
  onPick: (phrase: string) => void,
): void {
  container.textContent = '';
  const groups: Array<['base' | 'novel', string]> = [
    ['base', 'Base attributes'],
    ['novel', 'Novel attributes'],
  ];
  for (const [split, label] of groups) {
    const members = items.filter((i) => i.split === split);
    if (members.length === 0) continue;
    const section = document.createElement('section');
    section.className = `palette-group palette-group--${split}`;

    const heading = document.createElement('h3');
    heading.textContent = label;
    section.appendChild(heading);

    const list = document.createElement('div');
    list.className = 'palette-group__chips';
    for (const item of members) {
      const chip = document.createElement('button');
      chip.type = 'button';
      chip.className = 'chip palette-chip';
      chip.dataset.phrase = item.phrase;
      chip.dataset.split = item.split;
      if (selected.has(item.phrase)) chip.classList.add('chip--selected');
      const text = document.createElement('span');
      text.textContent = item.phrase;
      chip.appendChild(text);
      if (item.split === 'novel') {
        const badge = document.createElement('span');
        badge.className = 'badge badge--novel';
        badge.textContent = 'novel';
        chip.appendChild(badge);
      }
      chip.addEventListener('click', () => onPick(item.phrase));
      list.appendChild(chip);
    }
    section.appendChild(list);
    container.appendChild(section);
  }
}
