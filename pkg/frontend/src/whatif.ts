import { SessionClient } from "./client.js";
import { EstimatePayload, Speaker, WireMessage } from "./protocol.js";

export interface CommittedTurn {
  speaker: Speaker;
  text: string;
  latencyMs: number;
}

export interface PreviewResult {
  probability: number;
  confidence: number;
}

// Preview a draft rep turn on a disposable shadow session: open (without the
// simulated customer so the replay stays verbatim), replay every committed
// turn in order, send the draft, read its estimate, and always close the
// shadow. Because the server's estimates are a deterministic function of the
// turn sequence, committing the same draft afterwards yields the same number.
export async function whatIfPreview(
  client: SessionClient,
  industry: string,
  committed: CommittedTurn[],
  draftText: string,
  draftLatencyMs: number,
): Promise<PreviewResult> {
  if (!draftText.trim()) {
    throw new Error("empty draft");
  }
  const shadowId = await client.open({ industry, simulateCustomer: false });
  try {
    for (const turn of committed) {
      await client.sendTurn(shadowId, turn.speaker, turn.text, turn.latencyMs);
    }
    const replies = await client.sendTurn(shadowId, "rep", draftText, draftLatencyMs);
    const estimate = replies.find((m: WireMessage) => m.type === "estimate");
    if (!estimate) throw new Error("no estimate for draft");
    const payload = estimate.payload as EstimatePayload;
    return { probability: payload.probability, confidence: payload.confidence };
  } finally {
    await client.close(shadowId, null).catch(() => undefined);
  }
}
