// Wire message schema spoken by the serving process. The console is a pure
// client: it renders server-provided numbers and never recomputes them.

export type Speaker = "rep" | "customer";

export type MessageType = "open" | "turn" | "estimate" | "guidance" | "close" | "error";

export interface ConfidenceBreakdown {
  similarity: number;
  ensemble_std: number;
  novelty: number;
  confidence: number;
}

export interface EstimatePayload {
  probability: number;
  confidence: number;
  breakdown: ConfidenceBreakdown;
}

export interface GuidancePayload {
  text: string;
  band: string;
  snippet_id: string | null;
  rationale_tags: string[];
}

export interface TurnPayload {
  speaker: Speaker;
  text: string;
  response_latency_ms: number;
}

export interface WireMessage {
  type: MessageType;
  session_id: string | null;
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  payload: any;
}

export function parseNdjson(body: string): WireMessage[] {
  return body
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => JSON.parse(line) as WireMessage);
}
