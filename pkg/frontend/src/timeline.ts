import { Band, bandOf } from "./bands.js";
import { EstimatePayload, GuidancePayload, Speaker, WireMessage } from "./protocol.js";

export interface TranscriptEntry {
  speaker: Speaker;
  text: string;
}

export interface TimelinePoint {
  turnIndex: number;
  probability: number;
  confidence: number;
  band: Band;
}

export interface GuidanceView {
  text: string;
  band: Band;
  rationale: string[];
}

export type ConnectionState = "disconnected" | "connecting" | "connected" | "error";

export interface SessionView {
  sessionId: string | null;
  connection: ConnectionState;
  transcript: TranscriptEntry[];
  timeline: TimelinePoint[];
  guidance: GuidanceView | null;
  awaiting: boolean;
  lastError: string | null;
  closedSummary: { turns: number; probability_final: number | null } | null;
}

export function initialView(): SessionView {
  return {
    sessionId: null,
    connection: "disconnected",
    transcript: [],
    timeline: [],
    guidance: null,
    awaiting: false,
    lastError: null,
    closedSummary: null,
  };
}

// Pure reducer: the server message stream is applied in arrival order.
// An estimate always attaches to the most recent transcript turn; a repeated
// estimate for the same turn replaces the earlier point, so the rendered
// probability is always the latest one for that turn.
export function applyMessage(view: SessionView, message: WireMessage): SessionView {
  switch (message.type) {
    case "open":
      return {
        ...view,
        sessionId: message.session_id,
        connection: "connected",
        lastError: null,
      };
    case "turn": {
      const payload = message.payload as { speaker: Speaker; text: string };
      return {
        ...view,
        transcript: [...view.transcript, { speaker: payload.speaker, text: payload.text }],
      };
    }
    case "estimate": {
      const payload = message.payload as EstimatePayload;
      const turnIndex = Math.max(0, view.transcript.length - 1);
      const point: TimelinePoint = {
        turnIndex,
        probability: payload.probability,
        confidence: payload.confidence,
        band: bandOf(payload.probability),
      };
      const timeline =
        view.timeline.length > 0 && view.timeline[view.timeline.length - 1].turnIndex === turnIndex
          ? [...view.timeline.slice(0, -1), point]
          : [...view.timeline, point];
      return { ...view, timeline };
    }
    case "guidance": {
      const payload = message.payload as GuidancePayload;
      return {
        ...view,
        guidance: {
          text: payload.text,
          band: payload.band as Band,
          rationale: payload.rationale_tags ?? [],
        },
      };
    }
    case "close":
      return {
        ...view,
        closedSummary: {
          turns: message.payload?.summary?.turns ?? view.transcript.length,
          probability_final: message.payload?.summary?.probability_final ?? null,
        },
      };
    case "error":
      return { ...view, lastError: message.payload?.message ?? "server error" };
    default:
      return view;
  }
}

export function applyMessages(view: SessionView, messages: WireMessage[]): SessionView {
  return messages.reduce(applyMessage, view);
}

// The local user's own turn enters the transcript before the server replies,
// so the estimate that follows attaches to it.
export function appendLocalTurn(view: SessionView, speaker: Speaker, text: string): SessionView {
  return {
    ...view,
    transcript: [...view.transcript, { speaker, text }],
    awaiting: true,
  };
}

export function settle(view: SessionView): SessionView {
  return { ...view, awaiting: false };
}
