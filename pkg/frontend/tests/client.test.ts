import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { connectWithRetry, HttpTransport, SessionClient, Transport } from "../src/client.js";
import { WireMessage } from "../src/protocol.js";
import { appendLocalTurn, applyMessages, initialView, settle } from "../src/timeline.js";

const here = dirname(fileURLToPath(import.meta.url));
const golden = JSON.parse(
  readFileSync(join(here, "fixtures", "golden_transcript.json"), "utf-8"),
) as {
  session_id: string;
  steps: { send: WireMessage; replies: WireMessage[] }[];
  expected_transcript: { speaker: string; text: string }[];
  expected_timeline: { turnIndex: number; probability: number; confidence: number; band: string }[];
};

// Mock server replaying the recorded protocol exchange; rejects any request
// that deviates from the recording.
class ReplayTransport implements Transport {
  private cursor = 0;

  async send(message: WireMessage): Promise<WireMessage[]> {
    const step = golden.steps[this.cursor];
    if (!step) throw new Error(`unexpected extra request: ${JSON.stringify(message)}`);
    expect(message.type).toBe(step.send.type);
    if (message.type === "turn") {
      expect(message.payload.text).toBe(step.send.payload.text);
      expect(message.payload.speaker).toBe(step.send.payload.speaker);
    }
    this.cursor += 1;
    return step.replies;
  }
}

describe("golden transcript replay", () => {
  it("renders the fixture timeline exactly", async () => {
    const client = new SessionClient(new ReplayTransport());
    let view = initialView();

    const sid = await client.open({ industry: "saas", simulateCustomer: true, seed: 9 });
    view = applyMessages(view, golden.steps[0].replies);
    expect(sid).toBe(golden.session_id);
    expect(view.connection).toBe("connected");

    for (const step of golden.steps.slice(1)) {
      if (step.send.type !== "turn") continue;
      view = appendLocalTurn(view, step.send.payload.speaker, step.send.payload.text);
      const replies = await client.sendTurn(
        sid,
        step.send.payload.speaker,
        step.send.payload.text,
        step.send.payload.response_latency_ms,
      );
      view = settle(applyMessages(view, replies));
    }

    expect(view.transcript).toEqual(golden.expected_transcript);
    expect(view.timeline).toEqual(golden.expected_timeline);
  });
});

describe("http transport", () => {
  it("posts the message and parses ndjson replies", async () => {
    const calls: { url: string; body: string }[] = [];
    const fakeFetch = (async (url: string | URL | Request, init?: RequestInit) => {
      calls.push({ url: String(url), body: String(init?.body) });
      return new Response('{"type":"open","session_id":"s9","payload":{}}\n', { status: 200 });
    }) as typeof fetch;
    const transport = new HttpTransport("http://example.test/", fakeFetch);
    const replies = await transport.send({ type: "open", session_id: null, payload: {} });
    expect(replies[0].session_id).toBe("s9");
    expect(JSON.parse(calls[0].body).type).toBe("open");
  });

  it("turns http failures into errors", async () => {
    const fakeFetch = (async () => new Response("nope", { status: 503 })) as typeof fetch;
    const transport = new HttpTransport("http://example.test/", fakeFetch);
    await expect(
      transport.send({ type: "open", session_id: null, payload: {} }),
    ).rejects.toThrow("503");
  });
});

describe("connect retry", () => {
  it("retries with backoff then succeeds", async () => {
    let attempts = 0;
    const flaky: Transport = {
      async send() {
        attempts += 1;
        if (attempts < 3) throw new Error("connection refused");
        return [{ type: "open", session_id: "s1", payload: {} }];
      },
    };
    const waits: number[] = [];
    const sid = await connectWithRetry(
      new SessionClient(flaky),
      {},
      { attempts: 4, backoffMs: 100, sleep: async (ms) => void waits.push(ms) },
    );
    expect(sid).toBe("s1");
    expect(attempts).toBe(3);
    expect(waits).toEqual([100, 200]);
  });

  it("gives up after the attempt budget with a visible error", async () => {
    const dead: Transport = {
      async send() {
        throw new Error("unreachable endpoint");
      },
    };
    const seen: (Error | null)[] = [];
    await expect(
      connectWithRetry(
        new SessionClient(dead),
        {},
        { attempts: 2, backoffMs: 1, sleep: async () => undefined, onAttempt: (_, e) => void seen.push(e) },
      ),
    ).rejects.toThrow("unreachable");
    expect(seen.length).toBe(2);
  });

  it("client raises protocol errors from error replies", async () => {
    const erroring: Transport = {
      async send() {
        return [
          { type: "error", session_id: null, payload: { code: "not_found", message: "unknown session" } },
        ];
      },
    };
    const client = new SessionClient(erroring);
    await expect(client.sendTurn("ghost", "rep", "hi", 0)).rejects.toThrow("unknown session");
  });
});
