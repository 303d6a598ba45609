import type { AssistantStore } from './store';
import type { ChatTurn, StreamView, Suggestion } from './types';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderOfflineBanner(offline: boolean): string {
  if (!offline) return '';
  return (
    '<div class="offline-banner" role="alert">Service unreachable.' +
    ' <button data-action="retry">Retry</button></div>'
  );
}

export function renderProductList(store: AssistantStore): string {
  if (store.products.length === 0) {
    return '<p class="empty-state">No products ingested yet.</p>';
  }
  const items = store.products
    .map((product) => {
      const selected = product.asin === store.selectedAsin ? ' selected' : '';
      return (
        `<li><button class="product${selected}" data-action="select" ` +
        `data-asin="${escapeHtml(product.asin)}">${escapeHtml(product.title)}</button></li>`
      );
    })
    .join('');
  return `<ul class="products">${items}</ul>`;
}

export function renderChip(suggestion: Suggestion): string {
  return (
    `<button class="chip" data-action="chip" data-ref="${escapeHtml(suggestion.suggestion_ref)}">` +
    `<span class="chip-question">${escapeHtml(suggestion.question)}</span>` +
    `<span class="chip-type">${escapeHtml(suggestion.question_type)}</span>` +
    `<span class="chip-score">${suggestion.interest_score}</span>` +
    '</button>'
  );
}

export function renderChips(store: AssistantStore): string {
  if (!store.bundle) return '';
  return `<div class="chips">${store.bundle.suggestions.map(renderChip).join('')}</div>`;
}

export function renderTurn(turn: ChatTurn): string {
  if (turn.role === 'shopper') {
    return `<div class="turn shopper" data-origin="${turn.origin}">${escapeHtml(turn.text)}</div>`;
  }
  if (turn.answerAbsent) {
    return (
      '<div class="turn assistant" data-origin="' +
      turn.origin +
      `"><span class="not-found">${escapeHtml(turn.text)}</span></div>`
    );
  }
  // Grounding visibility: every real answer shows where it came from.
  const badge = `<span class="source-badge">source: ${escapeHtml(turn.sourceContextId ?? '')}</span>`;
  return (
    `<div class="turn assistant" data-origin="${turn.origin}">` +
    `${escapeHtml(turn.text)} ${badge}</div>`
  );
}

export function renderChat(store: AssistantStore): string {
  return `<div class="chat">${store.turns.map(renderTurn).join('')}</div>`;
}

export function renderStream(stream: StreamView): string {
  if (!stream.active && !stream.text && !stream.interrupted) return '';
  const marker = stream.interrupted
    ? '<span class="interrupted">stream interrupted</span>'
    : stream.done
      ? '<span class="stream-done">done</span>'
      : '<span class="streaming">…</span>';
  return `<pre class="stream">${escapeHtml(stream.text)}</pre>${marker}`;
}

export function renderApp(store: AssistantStore): string {
  const toast = store.errorToast
    ? `<div class="toast" role="alert">${escapeHtml(store.errorToast)}</div>`
    : '';
  const sendDisabled = store.busy ? ' disabled' : '';
  return [
    renderOfflineBanner(store.offline),
    toast,
    '<div class="layout">',
    `<aside class="browser">${renderProductList(store)}</aside>`,
    '<main class="panel">',
    renderChips(store),
    renderChat(store),
    renderStream(store.stream),
    '<form class="ask" data-action="ask">',
    `<input name="question" placeholder="Ask about this product" autocomplete="off" />`,
    `<button type="submit"${sendDisabled}>Send</button>`,
    '</form>',
    '</main>',
    '</div>',
  ].join('');
}
