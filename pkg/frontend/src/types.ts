export interface CatalogItem {
  raw_name: string;
  phrase: string;
  split: 'base' | 'novel';
}

export type CombineMode = 'mean' | 'product' | 'min';

export interface QueryDraft {
  phrases: string[];
  k: number;
  mode: CombineMode;
}

export interface ResultItem {
  image_id: string;
  combined_score: number;
  per_attribute: Record<string, number>;
  image_url: string;
}

export interface QueryResponse {
  results: ResultItem[];
  latency_ms: number;
  model_fingerprint: string;
}
