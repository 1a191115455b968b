import { parseNdjson, Speaker, WireMessage } from "./protocol.js";

export interface Transport {
  send(message: WireMessage): Promise<WireMessage[]>;
}

// One-shot HTTP mode of the wire protocol: POST a message, the ordered
// reply messages come back as ndjson.
export class HttpTransport implements Transport {
  constructor(
    private endpoint: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  async send(message: WireMessage): Promise<WireMessage[]> {
    const resp = await this.fetchFn(this.endpoint, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(message),
    });
    if (!resp.ok) {
      throw new Error(`server returned ${resp.status}`);
    }
    return parseNdjson(await resp.text());
  }
}

export class ProtocolError extends Error {
  constructor(
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

function firstError(replies: WireMessage[]): ProtocolError | null {
  const err = replies.find((m) => m.type === "error");
  if (!err) return null;
  return new ProtocolError(err.payload?.code ?? "error", err.payload?.message ?? "server error");
}

export class SessionClient {
  constructor(public transport: Transport) {}

  async open(options: { industry?: string; simulateCustomer?: boolean; seed?: number } = {}): Promise<string> {
    const replies = await this.transport.send({
      type: "open",
      session_id: null,
      payload: {
        industry: options.industry ?? "saas",
        simulate_customer: options.simulateCustomer ?? false,
        ...(options.seed !== undefined ? { seed: options.seed } : {}),
      },
    });
    const err = firstError(replies);
    if (err) throw err;
    const opened = replies.find((m) => m.type === "open");
    if (!opened || !opened.session_id) throw new ProtocolError("bad_open", "no open acknowledgement");
    return opened.session_id;
  }

  async sendTurn(
    sessionId: string,
    speaker: Speaker,
    text: string,
    latencyMs: number,
  ): Promise<WireMessage[]> {
    const replies = await this.transport.send({
      type: "turn",
      session_id: sessionId,
      payload: { speaker, text, response_latency_ms: latencyMs },
    });
    const err = firstError(replies);
    if (err) throw err;
    return replies;
  }

  async close(sessionId: string, outcome: boolean | null = null): Promise<WireMessage[]> {
    return this.transport.send({ type: "close", session_id: sessionId, payload: { outcome } });
  }
}

export interface RetryOptions {
  attempts?: number;
  backoffMs?: number;
  onAttempt?: (attempt: number, error: Error | null) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

// Connect with exponential backoff; resolves to the opened session id.
export async function connectWithRetry(
  client: SessionClient,
  openOptions: { industry?: string; simulateCustomer?: boolean; seed?: number },
  options: RetryOptions = {},
): Promise<string> {
  const attempts = options.attempts ?? 4;
  const backoffMs = options.backoffMs ?? 500;
  const sleep = options.sleep ?? defaultSleep;
  let lastError: Error = new Error("no attempts made");
  for (let attempt = 1; attempt <= attempts; attempt++) {
    try {
      const sid = await client.open(openOptions);
      options.onAttempt?.(attempt, null);
      return sid;
    } catch (error) {
      lastError = error as Error;
      options.onAttempt?.(attempt, lastError);
      if (attempt < attempts) {
        await sleep(backoffMs * Math.pow(2, attempt - 1));
      }
    }
  }
  throw lastError;
}
