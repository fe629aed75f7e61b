// Conversation state and session persistence. One in-flight request at a
// time; the session id survives page reloads via storage.

import { ApiError, TrailbotClient } from "./api.js";
import type { ChatResponse, RouteKind, SourceRef, Timings } from "./api.js";

export const SESSION_KEY = "trailbot.session_id";

export interface UiMessage {
  role: "user" | "assistant" | "system";
  text: string;
  route?: RouteKind;
  sources?: SourceRef[];
  timings?: Timings;
  trailId?: string | null;
  clarification?: boolean;
  candidates?: string[];
  /** system notices: true when the failed input can be retried */
  retryable?: boolean;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export type SendOutcome =
  | { kind: "ok"; response: ChatResponse }
  | { kind: "error"; message: string; retryable: boolean }
  | { kind: "busy" };

export class ChatState {
  readonly messages: UiMessage[] = [];
  inFlight = false;
  sessionId: string | null;
  /** the last input that failed, preserved for the retry affordance */
  pendingRetry: string | null = null;

  constructor(
    private readonly client: TrailbotClient,
    private readonly storage: StorageLike,
  ) {
    this.sessionId = storage.getItem(SESSION_KEY);
  }

  async send(text: string): Promise<SendOutcome> {
    const trimmed = text.trim();
    if (!trimmed) return { kind: "busy" };
    if (this.inFlight) return { kind: "busy" };
    this.inFlight = true;
    this.messages.push({ role: "user", text: trimmed });
    try {
      const response = await this.client.chat(trimmed, this.sessionId);
      this.sessionId = response.session_id;
      this.storage.setItem(SESSION_KEY, response.session_id);
      this.pendingRetry = null;
      this.messages.push({
        role: "assistant",
        text: response.answer,
        route: response.route,
        sources: response.sources,
        timings: response.timings,
        trailId: response.trail_id,
        clarification: response.clarification,
        candidates: response.candidates,
      });
      return { kind: "ok", response };
    } catch (err) {
      const notice = describeFailure(err);
      this.pendingRetry = trimmed;
      this.messages.push({
        role: "system",
        text: notice.message,
        retryable: notice.retryable,
      });
      return { kind: "error", ...notice };
    } finally {
      this.inFlight = false;
    }
  }
}

export function describeFailure(err: unknown): { message: string; retryable: boolean } {
  if (err instanceof ApiError) {
    if (err.isBackendDown) {
      const backend = err.body.backend ?? "backend";
      return {
        message: `The ${backend} backend is unavailable (${err.body.error}). Try again shortly.`,
        retryable: true,
      };
    }
    return { message: err.body.error, retryable: false };
  }
  return {
    message: "Network problem: the request did not reach the server.",
    retryable: true,
  };
}
