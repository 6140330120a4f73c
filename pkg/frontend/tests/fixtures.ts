import type { CatalogItem, QueryResponse } from '../src/types';

export const FIXTURE_CATALOG: CatalogItem[] = [
  { raw_name: 'hat_black', phrase: 'Wearing a black hat on the head', split: 'base' },
  { raw_name: 'hat_green', phrase: 'Wearing a green hat on the head', split: 'base' },
  { raw_name: 'hat_red', phrase: 'Wearing a red hat on the head', split: 'base' },
  { raw_name: 'hat_yellow', phrase: 'Wearing a yellow hat on the head', split: 'novel' },
  { raw_name: 'lower_black', phrase: 'Wearing black trousers on the lower body', split: 'base' },
  { raw_name: 'lower_green', phrase: 'Wearing green trousers on the lower body', split: 'base' },
  { raw_name: 'lower_red', phrase: 'Wearing red trousers on the lower body', split: 'base' },
  { raw_name: 'lower_yellow', phrase: 'Wearing yellow trousers on the lower body', split: 'novel' },
  { raw_name: 'upper_black', phrase: 'Wearing a black shirt on the upper body', split: 'base' },
  { raw_name: 'upper_green', phrase: 'Wearing a green shirt on the upper body', split: 'base' },
  { raw_name: 'upper_red', phrase: 'Wearing a red shirt on the upper body', split: 'base' },
  { raw_name: 'upper_yellow', phrase: 'Wearing a yellow shirt on the upper body', split: 'novel' },
];

export const RED_HAT = 'Wearing a red hat on the head';
export const BLACK_TROUSERS = 'Wearing black trousers on the lower body';

export function fixtureResponse(attributes: string[], k: number): QueryResponse {
  // deterministic stub ranking: ids descend as rank grows
  const results = Array.from({ length: k }, (_, rank) => {
    const perAttribute: Record<string, number> = {};
    attributes.forEach((phrase, column) => {
      perAttribute[phrase] = Number((0.9 - 0.1 * rank - 0.01 * column).toFixed(4));
    });
    const combined =
      Object.values(perAttribute).reduce((acc, value) => acc + value, 0) / attributes.length;
    return {
      image_id: `img${String(rank).padStart(3, '0')}`,
      combined_score: Number(combined.toFixed(4)),
      per_attribute: perAttribute,
      image_url: `/api/images/img${String(rank).padStart(3, '0')}`,
    };
  });
  return { results, latency_ms: 4.2, model_fingerprint: 'fixturefingerprint00' };
}

type FetchArgs = [input: RequestInfo | URL, init?: RequestInit];

export function stubService(options: { offline?: boolean; catalog?: CatalogItem[] } = {}) {
  const calls: { url: string; body?: unknown }[] = [];
  const impl = async (...[input, init]: FetchArgs): Promise<Response> => {
    const url = String(input);
    if (options.offline) throw new TypeError('fetch failed');
    if (url.endsWith('/api/attributes')) {
      calls.push({ url });
      return new Response(JSON.stringify(options.catalog ?? FIXTURE_CATALOG), { status: 200 });
    }
    if (url.endsWith('/api/query')) {
      const body = JSON.parse(String(init?.body));
      calls.push({ url, body });
      const overlong = (body.attributes as string[]).some((p) => p.split(/\s+/).length > 11);
      if (overlong) {
        return new Response(JSON.stringify({ error: 'phrase_too_long' }), { status: 422 });
      }
      return new Response(JSON.stringify(fixtureResponse(body.attributes, body.k)), {
        status: 200,
      });
    }
    return new Response('{}', { status: 404 });
  };
  return { impl, calls };
}
