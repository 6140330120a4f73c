import type { CatalogItem, QueryDraft, QueryResponse } from './types';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class PhraseTooLongError extends ApiError {
  constructor(message: string) {
    super(422, message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = '') {}

  async loadCatalog(): Promise<CatalogItem[]> {
    const res = await fetch(`${this.baseUrl}/api/attributes`);
    if (!res.ok) throw new ApiError(res.status, `catalog fetch failed (${res.status})`);
    return (await res.json()) as CatalogItem[];
  }

  async submitQuery(draft: QueryDraft, signal?: AbortSignal): Promise<QueryResponse> {
    const res = await fetch(`${this.baseUrl}/api/query`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ attributes: draft.phrases, k: draft.k, mode: draft.mode }),
      signal,
    });
    if (res.status === 422) {
      const body = await res.json().catch(() => ({}));
      throw new PhraseTooLongError(body.detail ?? 'phrase too long');
    }
    if (!res.ok) {
      const body = await res.json().catch(() => ({}));
      throw new ApiError(res.status, body.error ?? `query failed (${res.status})`);
    }
    return (await res.json()) as QueryResponse;
  }

  imageUrl(relative: string): string {
    return `${this.baseUrl}${relative}`;
  }
}
