export interface Product {
  asin: string;
  title: string;
  context_count: number;
}

export interface Suggestion {
  suggestion_ref: string;
  question: string;
  question_type: string;
  interest_score: number;
  context_id: string;
}

export interface SuggestionBundle {
  asin: string;
  from_cache: boolean;
  suggestions: Suggestion[];
  context_map: Record<string, string>;
}

export interface ChatResponse {
  answer_text: string | null;
  source_context_id: string | null;
  answer_absent: boolean;
  question: string;
  score?: number;
}

export type TurnOrigin = 'clicked_suggestion' | 'typed';

export interface ChatTurn {
  role: 'shopper' | 'assistant';
  text: string;
  origin: TurnOrigin;
  sourceContextId?: string;
  answerAbsent?: boolean;
}

export interface SseEvent {
  event: string;
  data: unknown;
}

export interface StreamView {
  active: boolean;
  text: string;
  chunks: number;
  interrupted: boolean;
  done: boolean;
}
