import type { SseEvent } from './types';

/**
 * Consume the suggestion stream endpoint, invoking onEvent for each
 * server-sent event (token / bundle / error) in arrival order.
 */
export async function streamSuggestions(
  baseUrl: string,
  asin: string,
  k: number,
  onEvent: (e: SseEvent) => void,
  signal?: AbortSignal,
  fetchFn: typeof fetch = fetch,
): Promise<void> {
  const base = baseUrl.replace(/\/$/, '');
  const url = `${base}/suggestions/stream?asin=${encodeURIComponent(asin)}&k=${k}`;
  const response = await fetchFn(url, { signal });
  if (!response.ok) throw new Error(`HTTP ${response.status}`);
  if (!response.body) throw new Error('no response body');

  const reader = response.body.getReader();
  const decoder = new TextDecoder('utf-8');
  let buffer = '';

  const emitFrames = (chunk: string) => {
    buffer += chunk;
    const frames = buffer.split(/\r?\n\r?\n/);
    buffer = frames.pop() ?? '';
    for (const frame of frames) {
      let event = 'message';
      const dataLines: string[] = [];
      for (const line of frame.split(/\r?\n/)) {
        if (line.startsWith('event:')) {
          event = line.slice('event:'.length).trim();
        } else if (line.startsWith('data:')) {
          dataLines.push(line.slice('data:'.length).trim());
        }
      }
      if (dataLines.length === 0) continue;
      const raw = dataLines.join('\n');
      try {
        onEvent({ event, data: JSON.parse(raw) });
      } catch {
        onEvent({ event, data: raw });
      }
    }
  };

  while (true) {
    const { value, done } = await reader.read();
    if (done) break;
    emitFrames(decoder.decode(value, { stream: true }));
  }
  emitFrames(decoder.decode());
}
