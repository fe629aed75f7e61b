// DOM builders. Pure functions of (document, data, handlers) so tests can
// drive them under any DOM implementation.

import type { Trail } from "./api.js";
import type { UiMessage } from "./state.js";

export const ROUTE_LABELS: Record<string, string> = {
  recommendation: "recommendation",
  structured: "trail table",
  review_rag: "reviews",
  out_of_scope: "out of scope",
};

export interface MessageHandlers {
  /** fetch the full text behind a citation chip */
  expandCitation?(reviewId: string, trailId: string | null): Promise<string>;
  /** send a suggested clarification query */
  suggest?(query: string): void;
  /** resend the failed input */
  retry?(): void;
}

export function renderMessage(
  doc: Document,
  message: UiMessage,
  handlers: MessageHandlers = {},
): HTMLElement {
  const article = doc.createElement("article");
  article.className = `msg ${message.role}`;

  if (message.role === "assistant" && message.route) {
    const badge = doc.createElement("span");
    badge.className = `route-badge route-${message.route}`;
    badge.textContent = ROUTE_LABELS[message.route] ?? message.route;
    article.appendChild(badge);
  }

  const body = doc.createElement("p");
  body.className = "msg-text";
  body.textContent = message.text;
  article.appendChild(body);

  if (message.sources && message.sources.length > 0) {
    article.appendChild(renderCitations(doc, message, handlers));
  }

  if (message.candidates && message.candidates.length > 0) {
    const row = doc.createElement("div");
    row.className = "suggestions";
    for (const name of message.candidates) {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "suggestion";
      button.textContent = name;
      button.addEventListener("click", () => handlers.suggest?.(name));
      row.appendChild(button);
    }
    article.appendChild(row);
  }

  if (message.role === "system" && message.retryable) {
    const retry = doc.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => handlers.retry?.());
    article.appendChild(retry);
  }

  if (message.timings) {
    const meta = doc.createElement("span");
    meta.className = "timings";
    meta.textContent = `${(message.timings.total_ms / 1000).toFixed(2)} s`;
    article.appendChild(meta);
  }

  return article;
}

function renderCitations(
  doc: Document,
  message: UiMessage,
  handlers: MessageHandlers,
): HTMLElement {
  const wrap = doc.createElement("div");
  wrap.className = "citations";
  for (const source of message.sources ?? []) {
    const chip = doc.createElement("button");
    chip.type = "button";
    chip.className = "chip";
    chip.dataset.reviewId = source.review_id;
    chip.title = source.snippet;
    chip.textContent = source.review_id;

    const panel = doc.createElement("div");
    panel.className = "citation-body";
    panel.hidden = true;

    chip.addEventListener("click", async () => {
      if (panel.hidden && !panel.textContent && handlers.expandCitation) {
        panel.textContent = await handlers.expandCitation(
          source.review_id,
          message.trailId ?? null,
        );
      }
      panel.hidden = !panel.hidden;
    });

    wrap.appendChild(chip);
    wrap.appendChild(panel);
  }
  return wrap;
}

export function renderConversation(
  doc: Document,
  container: HTMLElement,
  messages: UiMessage[],
  handlers: MessageHandlers = {},
): void {
  container.replaceChildren();
  for (const message of messages) {
    container.appendChild(renderMessage(doc, message, handlers));
  }
}

export function renderTrailCard(doc: Document, trail: Trail): HTMLElement {
  const card = doc.createElement("article");
  card.className = "trail-card";
  card.dataset.trailId = trail.id;

  const name = doc.createElement("h3");
  name.textContent = trail.name;
  card.appendChild(name);

  const facts = doc.createElement("dl");
  const rows: Array<[string, string]> = [
    ["Town", trail.town],
    ["Length", `${trail.length_miles} mi`],
    ["Difficulty", trail.difficulty],
    ["Activities", trail.activities.join(", ")],
    ["Pets", trail.pets_allowed],
    ["Wheelchair", trail.wheelchair_accessible],
  ];
  for (const [label, value] of rows) {
    const dt = doc.createElement("dt");
    dt.textContent = label;
    const dd = doc.createElement("dd");
    dd.textContent = value;
    facts.appendChild(dt);
    facts.appendChild(dd);
  }
  card.appendChild(facts);

  const blurb = doc.createElement("p");
  blurb.textContent = trail.description;
  card.appendChild(blurb);
  return card;
}

export function renderTrailCards(
  doc: Document,
  container: HTMLElement,
  trails: Trail[],
): void {
  container.replaceChildren();
  for (const trail of trails) {
    container.appendChild(renderTrailCard(doc, trail));
  }
}

/** Filter syntax error with a caret under the failing position. */
export function renderParseError(
  doc: Document,
  filterText: string,
  position: number,
  message: string,
): HTMLElement {
  const box = doc.createElement("div");
  box.className = "parse-error";

  const pre = doc.createElement("pre");
  const caretLine = " ".repeat(Math.max(0, Math.min(position, filterText.length))) + "^";
  pre.textContent = `${filterText}\n${caretLine}`;
  box.appendChild(pre);

  const note = doc.createElement("p");
  note.textContent = message;
  box.appendChild(note);
  return box;
}
