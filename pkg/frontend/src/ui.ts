// DOM rendering: transcript, evidence panels, inspector, ask form.

import { AssistantMessage, ChatViewState, Message } from "./state.js";

export interface UiHandlers {
  onAsk: (question: string) => void;
  onRetry: () => void;
}

const SNIPPET_LIMIT = 200;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function snippet(text: string): string {
  return text.length > SNIPPET_LIMIT ? text.slice(0, SNIPPET_LIMIT) + "…" : text;
}

function renderEvidence(message: AssistantMessage): HTMLElement {
  const panel = el("div", "evidence");
  panel.appendChild(el("div", "evidence-title", "Evidence"));
  // rows stay exactly in envelope order; the server already ranked them
  for (const clue of message.evidence) {
    const row = el("div", "evidence-row");
    row.dataset.clueId = clue.id;
    row.appendChild(el("span", `badge badge-${clue.modality}`, clue.modality));
    row.appendChild(el("span", "score", clue.score.toFixed(3)));
    row.appendChild(el("span", "snippet", snippet(clue.text)));
    panel.appendChild(row);
  }
  return panel;
}

function renderInspector(message: AssistantMessage): HTMLElement {
  const details = el("details", "inspector");
  details.appendChild(el("summary", undefined,
    `contextual question (${message.turnCount} history turns)`));
  details.appendChild(el("pre", "contextual-question", message.contextualQuestion));
  return details;
}

function renderMessage(message: Message): HTMLElement {
  if (message.role === "user") {
    const bubble = el("div", "message user");
    bubble.appendChild(el("div", "text", message.text));
    return bubble;
  }
  const bubble = el("div", "message assistant");
  bubble.appendChild(el("div", "text", message.text));
  if (message.evidence.length > 0) {
    bubble.appendChild(renderEvidence(message));
  }
  if (message.contextualQuestion) {
    bubble.appendChild(renderInspector(message));
  }
  return bubble;
}

export function render(root: HTMLElement, state: ChatViewState, handlers: UiHandlers): void {
  root.textContent = "";

  const header = el("header");
  header.appendChild(el("h1", undefined, "uniqa chat"));
  header.appendChild(el("span", "session-id",
    state.sessionId ? `session ${state.sessionId.slice(0, 8)}` : "no session"));
  root.appendChild(header);

  if (state.error) {
    const banner = el("div", "error-banner");
    banner.appendChild(el("span", undefined, state.error));
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", handlers.onRetry);
    banner.appendChild(retry);
    root.appendChild(banner);
  }

  const transcript = el("div", "transcript");
  for (const message of state.messages) {
    transcript.appendChild(renderMessage(message));
  }
  root.appendChild(transcript);

  const form = el("form", "ask-form");
  const input = el("input", "ask-input");
  input.type = "text";
  input.placeholder = state.pending ? "Waiting for answer…" : "Ask a question";
  input.disabled = state.pending || state.sessionId === null;
  const button = el("button", "ask-button", state.pending ? "…" : "Ask");
  button.type = "submit";
  button.disabled = input.disabled;
  form.appendChild(input);
  form.appendChild(button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const question = input.value.trim();
    if (!question || state.pending || state.sessionId === null) return;
    handlers.onAsk(question);
  });
  root.appendChild(form);
}
