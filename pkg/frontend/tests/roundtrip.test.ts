// End-to-end: boot the real chat server with mock backends, drive the UI
// against it, and check that what renders equals what the API returned.

import { spawn, type ChildProcess } from "node:child_process";
import { resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TrailbotClient } from "../src/api.js";
import { createApp } from "../src/app.js";
import type { App } from "../src/app.js";
import type { StorageLike } from "../src/state.js";

const PORT = 8900 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = resolve(process.cwd(), "..");

const EXAMPLE_QUERY =
  "what do reviews say about biking on the Windsor Locks Canal trail";

let server: ChildProcess;

class MemoryStorage implements StorageLike {
  private data = new Map<string, string>();
  getItem(key: string) { return this.data.get(key) ?? null; }
  setItem(key: string, value: string) { this.data.set(key, value); }
  removeItem(key: string) { this.data.delete(key); }
}

// happy-dom's fetch can rewrite relative URLs; Node's global fetch with an
// absolute base is what production code sees anyway.
const nodeFetch = (input: string, init?: RequestInit) => fetch(input, init);

async function waitForHealth(client: TrailbotClient, attempts = 60): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    if (await client.health()) return;
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error(`server did not become healthy on ${BASE}`);
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 20));
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-m", "trailbot.cli", "serve",
      "--port", String(PORT),
      "--trails", "fixtures/trails.jsonl",
      "--reviews", "fixtures/reviews.jsonl",
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealth(new TrailbotClient(BASE, nodeFetch));
});

afterAll(() => {
  server?.kill();
});

function bootApp(): App {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return createApp(document, root, new TrailbotClient(BASE, nodeFetch), new MemoryStorage());
}

describe("UI roundtrip against the live server", () => {
  it("renders the example query with a route badge and five matching chips", async () => {
    // the reference answer straight from the API
    const reference = await new TrailbotClient(BASE, nodeFetch).chat(EXAMPLE_QUERY, null);
    expect(reference.route).toBe("review_rag");
    expect(reference.sources).toHaveLength(5);

    const app = bootApp();
    await app.sendMessage(EXAMPLE_QUERY);
    await flush();

    const assistant = document.querySelector(".msg.assistant");
    expect(assistant).not.toBeNull();
    expect(assistant!.querySelector(".route-badge")!.textContent).toBe("reviews");

    const chipIds = [...assistant!.querySelectorAll<HTMLElement>(".chip")].map(
      (chip) => chip.dataset.reviewId,
    );
    expect(chipIds).toHaveLength(5);
    expect(chipIds).toEqual(reference.sources.map((s) => s.review_id));
    document.body.replaceChildren();
  });

  it("expands a citation chip to the stored review text", async () => {
    const app = bootApp();
    await app.sendMessage(EXAMPLE_QUERY);
    await flush();

    const assistant = document.querySelector(".msg.assistant")!;
    const chip = assistant.querySelector<HTMLButtonElement>(".chip")!;
    const reviewId = chip.dataset.reviewId!;
    const trailId = app.state.messages.at(-1)!.trailId!;
    const reviews = await new TrailbotClient(BASE, nodeFetch).trailReviews(trailId);
    const expected = reviews.find((r) => r.id === reviewId)!.text;

    chip.click();
    await flush();
    await flush();
    expect(assistant.querySelector(".citation-body")!.textContent).toBe(expected);
    document.body.replaceChildren();
  });

  it("keeps one session across messages", async () => {
    const app = bootApp();
    await app.sendMessage("how long is the Pine Hill trail");
    const first = app.state.sessionId;
    await app.sendMessage("how long is the Windsor Locks Canal trail");
    expect(app.state.sessionId).toBe(first);
    expect(first).toBeTruthy();
    document.body.replaceChildren();
  });

  it("browse view matches GET /api/trails exactly", async () => {
    const client = new TrailbotClient(BASE, nodeFetch);
    const app = bootApp();
    for (const filter of ["", 'difficulty = "easy"']) {
      const reference = await client.trails(filter);
      await app.browseTrails(filter);
      const cards = [...document.querySelectorAll<HTMLElement>(".trail-card")];
      expect(cards.map((c) => c.dataset.trailId)).toEqual(reference.map((t) => t.id));
      expect(cards.map((c) => c.querySelector("h3")!.textContent)).toEqual(
        reference.map((t) => t.name),
      );
    }
    document.body.replaceChildren();
  });

  it("shows the caret position for a bad filter", async () => {
    const app = bootApp();
    await app.browseTrails('length_miles <= "five"');
    const pre = document.querySelector(".parse-error pre");
    expect(pre).not.toBeNull();
    const [text, caret] = pre!.textContent!.split("\n");
    expect(text).toBe('length_miles <= "five"');
    expect(caret.indexOf("^")).toBe(16); // the literal's offset
    document.body.replaceChildren();
  });

  it("renders clarification candidates as suggestion buttons", async () => {
    const app = bootApp();
    await app.sendMessage("how crowded is the Pine Hil trail");
    await flush();
    const suggestion = document.querySelector<HTMLButtonElement>(".suggestion");
    expect(suggestion).not.toBeNull();
    expect(suggestion!.textContent).toBe("Pine Hill Trail");
    document.body.replaceChildren();
  });
});
