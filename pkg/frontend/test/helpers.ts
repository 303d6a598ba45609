import type { AssistantApi } from '../src/api';
import type { ChatResponse, Product, SuggestionBundle } from '../src/types';

export const DOORBELL_SNIPPET =
  'Built-in speaker/microphone. Talk to visitors anytime anywhere... Intelligent ' +
  'real-time monitoring via mobile phone... Video recording, picture-taking and ' +
  'screenshot, video playback and storage.';

export const CONTEXT_ID = 'ctx-doorbell-0001';

export function fakeBundle(): SuggestionBundle {
  return {
    asin: 'B0DOORBELL',
    from_cache: false,
    suggestions: [
      {
        suggestion_ref: 'ref-1',
        question: 'What are key features of this doorbell?',
        question_type: 'broad_features',
        interest_score: 7,
        context_id: CONTEXT_ID,
      },
      {
        suggestion_ref: 'ref-2',
        question: 'Can the camera enable mobile phone monitoring?',
        question_type: 'specific_aspect',
        interest_score: 8,
        context_id: CONTEXT_ID,
      },
    ],
    context_map: { 'ref-1': CONTEXT_ID, 'ref-2': CONTEXT_ID },
  };
}

export interface FakeApiOptions {
  failChat?: boolean;
  failProducts?: boolean;
  absentForText?: boolean;
}

export class FakeApi implements AssistantApi {
  calls = { products: 0, suggestions: 0, chatRef: 0, chatText: 0 };
  options: FakeApiOptions;

  constructor(options: FakeApiOptions = {}) {
    this.options = options;
  }

  async getProducts(): Promise<Product[]> {
    this.calls.products += 1;
    if (this.options.failProducts) throw new TypeError('fetch failed');
    return [{ asin: 'B0DOORBELL', title: 'Smart Video Doorbell', context_count: 1 }];
  }

  async getSuggestions(): Promise<SuggestionBundle> {
    this.calls.suggestions += 1;
    return fakeBundle();
  }

  async chatByRef(_asin: string, ref: string): Promise<ChatResponse> {
    this.calls.chatRef += 1;
    if (this.options.failChat) throw new TypeError('fetch failed');
    return {
      answer_text: DOORBELL_SNIPPET,
      source_context_id: CONTEXT_ID,
      answer_absent: false,
      question: `question for ${ref}`,
    };
  }

  async chatByText(_asin: string, question: string): Promise<ChatResponse> {
    this.calls.chatText += 1;
    if (this.options.failChat) throw new TypeError('fetch failed');
    if (this.options.absentForText) {
      return { answer_text: null, source_context_id: null, answer_absent: true, question };
    }
    return {
      answer_text: DOORBELL_SNIPPET,
      source_context_id: CONTEXT_ID,
      answer_absent: false,
      question,
    };
  }
}
