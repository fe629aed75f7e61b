// Application wiring: tabs, chat form with an in-flight lock, citation
// expansion, clarification suggestions, and the trail browser.

import { ApiError, TrailbotClient } from "./api.js";
import { ChatState } from "./state.js";
import type { StorageLike } from "./state.js";
import {
  renderConversation,
  renderParseError,
  renderTrailCards,
} from "./render.js";

export interface App {
  sendMessage(text: string): Promise<void>;
  browseTrails(filterText: string): Promise<void>;
  readonly state: ChatState;
}

export function createApp(
  doc: Document,
  root: HTMLElement,
  client: TrailbotClient,
  storage: StorageLike,
): App {
  root.innerHTML = `
    <header class="top">
      <h1>Trail Chat</h1>
      <nav>
        <button type="button" id="tab-chat" class="tab active">Chat</button>
        <button type="button" id="tab-browse" class="tab">Browse trails</button>
      </nav>
    </header>
    <section id="panel-chat" class="panel">
      <div id="conversation" class="conversation" aria-live="polite"></div>
      <form id="chat-form">
        <input id="chat-input" autocomplete="off"
               placeholder="Ask about a trail, e.g. how long is the Pine Hill trail" />
        <button id="chat-send" type="submit">Send</button>
      </form>
    </section>
    <section id="panel-browse" class="panel" hidden>
      <form id="browse-form">
        <input id="browse-input" autocomplete="off"
               placeholder='Filter, e.g. difficulty = "easy" AND pets_allowed = "yes"' />
        <button type="submit">Apply</button>
      </form>
      <div id="browse-error"></div>
      <div id="trail-cards" class="cards"></div>
    </section>
  `;

  const conversation = root.querySelector<HTMLElement>("#conversation")!;
  const chatForm = root.querySelector<HTMLFormElement>("#chat-form")!;
  const chatInput = root.querySelector<HTMLInputElement>("#chat-input")!;
  const chatSend = root.querySelector<HTMLButtonElement>("#chat-send")!;
  const browseForm = root.querySelector<HTMLFormElement>("#browse-form")!;
  const browseInput = root.querySelector<HTMLInputElement>("#browse-input")!;
  const browseError = root.querySelector<HTMLElement>("#browse-error")!;
  const cards = root.querySelector<HTMLElement>("#trail-cards")!;

  const state = new ChatState(client, storage);

  const handlers = {
    async expandCitation(reviewId: string, trailId: string | null): Promise<string> {
      if (!trailId) return "(full text unavailable)";
      try {
        const reviews = await client.trailReviews(trailId);
        return reviews.find((r) => r.id === reviewId)?.text ?? "(review not found)";
      } catch {
        return "(could not load the review)";
      }
    },
    suggest(query: string): void {
      chatInput.value = query;
      void sendMessage(query);
    },
    retry(): void {
      const text = state.pendingRetry;
      if (text) void sendMessage(text);
    },
  };

  function redraw(): void {
    renderConversation(doc, conversation, state.messages, handlers);
    conversation.scrollTop = conversation.scrollHeight;
  }

  async function sendMessage(text: string): Promise<void> {
    if (state.inFlight || !text.trim()) return;
    chatInput.disabled = true;
    chatSend.disabled = true;
    const outcome = await state.send(text);
    // on failure the input keeps its text so the user can edit and retry
    if (outcome.kind === "ok") chatInput.value = "";
    chatInput.disabled = false;
    chatSend.disabled = false;
    redraw();
    chatInput.focus();
  }

  async function browseTrails(filterText: string): Promise<void> {
    browseError.replaceChildren();
    try {
      const trails = await client.trails(filterText);
      renderTrailCards(doc, cards, trails);
    } catch (err) {
      cards.replaceChildren();
      if (err instanceof ApiError && err.body.position !== undefined) {
        browseError.appendChild(
          renderParseError(doc, filterText, err.body.position, err.body.error),
        );
      } else {
        const note = doc.createElement("p");
        note.className = "notice";
        note.textContent =
          err instanceof ApiError ? err.body.error : "Could not reach the server.";
        browseError.appendChild(note);
      }
    }
  }

  chatForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void sendMessage(chatInput.value);
  });
  browseForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void browseTrails(browseInput.value);
  });

  const tabChat = root.querySelector<HTMLButtonElement>("#tab-chat")!;
  const tabBrowse = root.querySelector<HTMLButtonElement>("#tab-browse")!;
  const panelChat = root.querySelector<HTMLElement>("#panel-chat")!;
  const panelBrowse = root.querySelector<HTMLElement>("#panel-browse")!;
  tabChat.addEventListener("click", () => {
    panelChat.hidden = false;
    panelBrowse.hidden = true;
    tabChat.classList.add("active");
    tabBrowse.classList.remove("active");
  });
  tabBrowse.addEventListener("click", () => {
    panelChat.hidden = true;
    panelBrowse.hidden = false;
    tabBrowse.classList.add("active");
    tabChat.classList.remove("active");
    void browseTrails(browseInput.value);
  });

  redraw();
  return { sendMessage, browseTrails, state };
}
