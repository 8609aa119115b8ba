// Chat view state and its pure transitions.

import { AskResponse, EvidenceClue } from "./api.js";

export interface UserMessage {
  role: "user";
  text: string;
}

export interface AssistantMessage {
  role: "assistant";
  text: string;
  evidence: EvidenceClue[]; // exactly the envelope's selected clues, server order
  contextualQuestion: string;
  turnCount: number;
}

export type Message = UserMessage | AssistantMessage;

export interface ChatViewState {
  sessionId: string | null;
  messages: Message[];
  pending: boolean;
  error: string | null;
}

export function initialState(): ChatViewState {
  return { sessionId: null, messages: [], pending: false, error: null };
}

export function withSession(state: ChatViewState, sessionId: string): ChatViewState {
  return { ...state, sessionId, error: null };
}

export function askStarted(state: ChatViewState, question: string): ChatViewState {
  return {
    ...state,
    pending: true,
    error: null,
    messages: [...state.messages, { role: "user", text: question }],
  };
}

export function askSucceeded(state: ChatViewState, envelope: AskResponse): ChatViewState {
  const assistant: AssistantMessage = {
    role: "assistant",
    text: envelope.answer.text,
    evidence: envelope.clues,
    contextualQuestion: envelope.contextual_question.text,
    turnCount: envelope.contextual_question.turn_count,
  };
  return { ...state, pending: false, messages: [...state.messages, assistant] };
}

export function askFailed(state: ChatViewState, message: string): ChatViewState {
  return { ...state, pending: false, error: message };
}

export function connectionFailed(state: ChatViewState, message: string): ChatViewState {
  return { ...state, pending: false, error: message };
}

// Rebuild the transcript from a server-side session (page reload path).
// Evidence panels cannot be recovered for past turns; the text history can.
export function restoredFromServer(
  state: ChatViewState,
  sessionId: string,
  turns: { question: string; answer: string }[],
): ChatViewState {
  const messages: Message[] = [];
  for (const turn of turns) {
    messages.push({ role: "user", text: turn.question });
    messages.push({
      role: "assistant",
      text: turn.answer,
      evidence: [],
      contextualQuestion: "",
      turnCount: 0,
    });
  }
  return { sessionId, messages, pending: false, error: null };
}
