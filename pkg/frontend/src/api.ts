import type { ChatResponse, Product, SuggestionBundle } from './types';

export interface AssistantApi {
  getProducts(): Promise<Product[]>;
  getSuggestions(asin: string, k?: number): Promise<SuggestionBundle>;
  chatByRef(asin: string, suggestionRef: string): Promise<ChatResponse>;
  chatByText(asin: string, question: string): Promise<ChatResponse>;
}

export class HttpError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw new HttpError(response.status, `HTTP ${response.status}`);
  }
  return (await response.json()) as T;
}

export function createApi(baseUrl: string, fetchFn: typeof fetch = fetch): AssistantApi {
  const base = baseUrl.replace(/\/$/, '');
  return {
    async getProducts() {
      return asJson<Product[]>(await fetchFn(`${base}/products`));
    },
    async getSuggestions(asin: string, k?: number) {
      const query = k ? `?k=${k}` : '';
      return asJson<SuggestionBundle>(
        await fetchFn(`${base}/products/${encodeURIComponent(asin)}/suggestions${query}`),
      );
    },
    async chatByRef(asin: string, suggestionRef: string) {
      return asJson<ChatResponse>(
        await fetchFn(`${base}/chat`, {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify({ asin, suggestion_ref: suggestionRef }),
        }),
      );
    },
    async chatByText(asin: string, question: string) {
      return asJson<ChatResponse>(
        await fetchFn(`${base}/chat`, {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify({ asin, question }),
        }),
      );
    },
  };
}
