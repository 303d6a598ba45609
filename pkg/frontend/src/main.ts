import { createApi } from './api';
import { AssistantStore } from './store';
import { streamSuggestions } from './sse';
import { renderApp } from './view';

const SERVICE_URL = (window as { SHOPQ_SERVICE_URL?: string }).SHOPQ_SERVICE_URL ?? 'http://127.0.0.1:8031';

const api = createApi(SERVICE_URL);
const store = new AssistantStore(api);
const root = document.getElementById('app')!;

let streamAbort: AbortController | null = null;

function paint(): void {
  root.innerHTML = renderApp(store);
  const input = root.querySelector<HTMLInputElement>('.ask input[name="question"]');
  const sendButton = root.querySelector<HTMLButtonElement>('.ask button[type="submit"]');
  if (input && sendButton) {
    sendButton.disabled = store.busy || !input.value.trim();
    input.addEventListener('input', () => {
      sendButton.disabled = store.busy || !input.value.trim();
    });
  }
}

store.subscribe(paint);

root.addEventListener('click', (event) => {
  const target = (event.target as HTMLElement).closest('[data-action]');
  if (!(target instanceof HTMLElement)) return;
  const action = target.dataset.action;
  if (action === 'select' && target.dataset.asin) {
    void store.selectProduct(target.dataset.asin);
    startStream(target.dataset.asin);
  } else if (action === 'chip' && target.dataset.ref) {
    void store.clickChip(target.dataset.ref);
  } else if (action === 'retry') {
    void store.retry();
  }
});

root.addEventListener('submit', (event) => {
  const form = event.target as HTMLElement;
  if (form.matches('form[data-action="ask"]')) {
    event.preventDefault();
    const input = form.querySelector<HTMLInputElement>('input[name="question"]');
    if (input && input.value.trim()) {
      void store.askTyped(input.value);
      input.value = '';
    }
  }
});

function startStream(asin: string): void {
  streamAbort?.abort();
  streamAbort = new AbortController();
  store.beginStream();
  streamSuggestions(SERVICE_URL, asin, 3, (e) => store.applyStreamEvent(e), streamAbort.signal).catch(
    () => store.markStreamInterrupted(),
  );
}

void store.loadProducts();
paint();
