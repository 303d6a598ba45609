import type { AssistantApi } from './api';
import type { ChatTurn, Product, SseEvent, StreamView, SuggestionBundle, TurnOrigin } from './types';

export const NOT_FOUND_TEXT = 'Not found in the product info.';

const freshStream = (): StreamView => ({
  active: false,
  text: '',
  chunks: 0,
  interrupted: false,
  done: false,
});

/**
 * Panel state for the shopping-assistant demo.
 *
 * All state is derived from the service (nothing persisted locally):
 * selecting a product loads its suggestion bundle; a chip click or a
 * typed question appends one shopper turn and one assistant turn whose
 * answer is the grounded context snippet (or an explicit not-found);
 * at most one chat request is in flight at a time.
 */
export class AssistantStore {
  products: Product[] = [];
  selectedAsin: string | null = null;
  bundle: SuggestionBundle | null = null;
  turns: ChatTurn[] = [];
  offline = false;
  errorToast: string | null = null;
  busy = false;
  pendingRetry: (() => Promise<void>) | null = null;
  stream: StreamView = freshStream();

  private listeners: Array<() => void> = [];

  constructor(private api: AssistantApi) {}

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async loadProducts(): Promise<void> {
    try {
      this.products = await this.api.getProducts();
      this.offline = false;
      this.pendingRetry = null;
    } catch {
      this.offline = true;
      this.pendingRetry = () => this.loadProducts();
    }
    this.notify();
  }

  async selectProduct(asin: string): Promise<void> {
    this.selectedAsin = asin;
    this.turns = [];
    this.bundle = null;
    this.stream = freshStream();
    this.errorToast = null;
    this.notify();
    await this.refreshSuggestions();
  }

  private async refreshSuggestions(): Promise<void> {
    if (!this.selectedAsin) return;
    try {
      this.bundle = await this.api.getSuggestions(this.selectedAsin);
      this.offline = false;
    } catch (error) {
      if (isNotFound(error)) {
        this.errorToast = `Unknown product ${this.selectedAsin}`;
      } else {
        this.offline = true;
        this.pendingRetry = () => this.refreshSuggestions();
      }
    }
    this.notify();
  }

  /** Chip click: one shopper turn + one grounded assistant turn. */
  async clickChip(suggestionRef: string): Promise<void> {
    if (this.busy || !this.selectedAsin || !this.bundle) return;
    const chip = this.bundle.suggestions.find((s) => s.suggestion_ref === suggestionRef);
    if (!chip) return;
    await this.runChat(
      chip.question,
      'clicked_suggestion',
      () => this.api.chatByRef(this.selectedAsin!, suggestionRef),
      () => this.clickChip(suggestionRef),
    );
  }

  /** Typed question: same turn pair via retrieval-only chat. */
  async askTyped(question: string): Promise<void> {
    const trimmed = question.trim();
    if (this.busy || !this.selectedAsin || !trimmed) return;
    await this.runChat(
      trimmed,
      'typed',
      () => this.api.chatByText(this.selectedAsin!, trimmed),
      () => this.askTyped(question),
    );
  }

  private async runChat(
    question: string,
    origin: TurnOrigin,
    send: () => Promise<{ answer_text: string | null; source_context_id: string | null; answer_absent: boolean }>,
    retry: () => Promise<void>,
  ): Promise<void> {
    this.busy = true;
    this.turns.push({ role: 'shopper', text: question, origin });
    this.notify();
    try {
      const answer = await send();
      this.turns.push(
        answer.answer_absent
          ? { role: 'assistant', text: NOT_FOUND_TEXT, origin, answerAbsent: true }
          : {
              role: 'assistant',
              text: answer.answer_text ?? '',
              origin,
              sourceContextId: answer.source_context_id ?? undefined,
            },
      );
      this.offline = false;
      this.pendingRetry = null;
    } catch {
      // Drop the dangling shopper turn and offer a retry.
      this.turns.pop();
      this.offline = true;
      this.pendingRetry = retry;
      this.busy = false;
      this.notify();
      return;
    }
    this.busy = false;
    this.notify();
    await this.refreshSuggestions();
  }

  async retry(): Promise<void> {
    const pending = this.pendingRetry;
    this.pendingRetry = null;
    if (pending) await pending();
  }

  /** Feed one SSE event from the raw suggestion stream into the panel. */
  applyStreamEvent(event: SseEvent): void {
    if (event.event === 'token') {
      const text = (event.data as { text?: string }).text ?? '';
      this.stream.active = true;
      this.stream.text += text;
      this.stream.chunks += 1;
    } else if (event.event === 'bundle') {
      this.stream.done = true;
      this.stream.active = false;
      this.bundle = event.data as SuggestionBundle;
    } else if (event.event === 'error') {
      this.stream.interrupted = true;
      this.stream.active = false;
    }
    this.notify();
  }

  /** Mark a client-side abort/disconnect of the stream. */
  markStreamInterrupted(): void {
    if (!this.stream.done) {
      this.stream.interrupted = true;
      this.stream.active = false;
      this.notify();
    }
  }

  beginStream(): void {
    this.stream = { ...freshStream(), active: true };
    this.notify();
  }
}

function isNotFound(error: unknown): boolean {
  return typeof error === 'object' && error !== null && (error as { status?: number }).status === 404;
}
