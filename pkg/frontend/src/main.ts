import { connectWithRetry, HttpTransport, SessionClient } from "./client.js";
import {
  appendLocalTurn,
  applyMessages,
  initialView,
  SessionView,
  settle,
} from "./timeline.js";
import { grabRefs, render, renderPreview } from "./ui.js";
import { CommittedTurn, whatIfPreview } from "./whatif.js";

let view: SessionView = initialView();
let client: SessionClient | null = null;
let committed: CommittedTurn[] = [];
let lastTurnAt = 0;
// Latency captured at first preview of the current draft and reused on send,
// so a previewed estimate matches the committed one exactly.
let draftLatency: { text: string; latencyMs: number } | null = null;

const refs = grabRefs(document);

function update(next: SessionView) {
  view = next;
  render(refs, view);
}

function repLatencyFor(text: string): number {
  if (draftLatency && draftLatency.text === text) {
    return draftLatency.latencyMs;
  }
  const now = Date.now();
  return lastTurnAt === 0 ? 0 : Math.max(1, now - lastTurnAt);
}

async function connect() {
  const endpoint = (document.getElementById("endpoint") as HTMLInputElement).value;
  const industry = (document.getElementById("industry") as HTMLInputElement).value || "saas";
  client = new SessionClient(new HttpTransport(endpoint));
  committed = [];
  lastTurnAt = 0;
  update({ ...initialView(), connection: "connecting" });
  try {
    const sessionId = await connectWithRetry(
      client,
      { industry, simulateCustomer: true },
      {
        attempts: 4,
        backoffMs: 400,
        onAttempt: (attempt, error) => {
          if (error) {
            update({ ...view, connection: "connecting", lastError: `attempt ${attempt}: ${error.message}` });
          }
        },
      },
    );
    update({ ...view, sessionId, connection: "connected", lastError: null });
  } catch (error) {
    update({ ...view, connection: "error", lastError: (error as Error).message });
  }
}

async function sendRepTurn() {
  if (!client || !view.sessionId) return;
  const text = refs.input.value.trim();
  if (!text) return;
  const latencyMs = repLatencyFor(text);
  refs.input.value = "";
  renderPreview(refs, null);
  update(appendLocalTurn(view, "rep", text));
  try {
    const replies = await client.sendTurn(view.sessionId, "rep", text, latencyMs);
    committed.push({ speaker: "rep", text, latencyMs });
    for (const reply of replies) {
      if (reply.type === "turn") {
        committed.push({
          speaker: reply.payload.speaker,
          text: reply.payload.text,
          latencyMs: reply.payload.response_latency_ms,
        });
      }
    }
    lastTurnAt = Date.now();
    draftLatency = null;
    update(settle(applyMessages(view, replies)));
  } catch (error) {
    update(settle({ ...view, lastError: (error as Error).message }));
  }
}

async function previewDraft() {
  if (!client || !view.sessionId) return;
  const text = refs.input.value.trim();
  if (!text) return;
  const industry = (document.getElementById("industry") as HTMLInputElement).value || "saas";
  const latencyMs = repLatencyFor(text);
  draftLatency = { text, latencyMs };
  refs.previewButton.disabled = true;
  try {
    const result = await whatIfPreview(client, industry, committed, text, latencyMs);
    renderPreview(refs, result);
  } catch (error) {
    renderPreview(refs, null, (error as Error).message);
  } finally {
    refs.previewButton.disabled = false;
  }
}

document.getElementById("connect-button")!.addEventListener("click", () => void connect());
refs.sendButton.addEventListener("click", () => void sendRepTurn());
refs.input.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void sendRepTurn();
});
refs.input.addEventListener("input", () => {
  refs.previewButton.disabled = view.awaiting || !refs.input.value.trim();
});
refs.previewButton.addEventListener("click", () => void previewDraft());

render(refs, view);
