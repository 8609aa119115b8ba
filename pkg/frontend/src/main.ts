// App wiring: session bootstrap, ask loop, reload restore.

import { ApiClient } from "./api.js";
import {
  askFailed,
  askStarted,
  askSucceeded,
  ChatViewState,
  connectionFailed,
  initialState,
  restoredFromServer,
  withSession,
} from "./state.js";
import { render, UiHandlers } from "./ui.js";

const SESSION_KEY = "uniqa.session";
const API_KEY = "uniqa.api";
const DEFAULT_API = "http://127.0.0.1:8600";

export function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) {
    window.localStorage.setItem(API_KEY, fromQuery);
    return fromQuery;
  }
  return window.localStorage.getItem(API_KEY) ?? DEFAULT_API;
}

export class ChatApp {
  state: ChatViewState = initialState();

  constructor(
    readonly root: HTMLElement,
    readonly client: ApiClient,
    readonly storage: Storage,
  ) {}

  private update(state: ChatViewState): void {
    this.state = state;
    const handlers: UiHandlers = {
      onAsk: (question) => void this.ask(question),
      onRetry: () => void this.start(),
    };
    render(this.root, this.state, handlers);
  }

  async start(): Promise<void> {
    this.update({ ...this.state, error: null });
    const stored = this.storage.getItem(SESSION_KEY);
    try {
      if (stored) {
        try {
          const transcript = await this.client.getSession(stored);
          this.update(restoredFromServer(this.state, stored, transcript.turns));
          return;
        } catch (err: unknown) {
          const status = (err as { status?: number }).status;
          if (status !== 404) throw err;
          this.storage.removeItem(SESSION_KEY); // stale id: fall through
        }
      }
      const sessionId = await this.client.createSession();
      this.storage.setItem(SESSION_KEY, sessionId);
      this.update(withSession(initialState(), sessionId));
    } catch (err) {
      this.update(connectionFailed(this.state, `cannot reach QA service: ${err}`));
    }
  }

  async ask(question: string): Promise<void> {
    if (this.state.pending || !this.state.sessionId) return;
    this.update(askStarted(this.state, question));
    try {
      const envelope = await this.client.ask(this.state.sessionId, question);
      this.update(askSucceeded(this.state, envelope));
    } catch (err) {
      const stage = (err as { stage?: string }).stage ?? "unknown";
      this.update(askFailed(this.state, `ask failed [${stage}]: ${err}`));
    }
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const app = new ChatApp(root, new ApiClient(apiBase()), window.localStorage);
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
