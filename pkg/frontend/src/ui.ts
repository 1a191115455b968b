import { BAND_COLORS } from "./bands.js";
import { SessionView } from "./timeline.js";
import { PreviewResult } from "./whatif.js";

export interface UiRefs {
  status: HTMLElement;
  transcript: HTMLElement;
  gaugeFill: HTMLElement;
  gaugeLabel: HTMLElement;
  confidenceLabel: HTMLElement;
  timeline: HTMLElement;
  guidance: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
  previewButton: HTMLButtonElement;
  previewResult: HTMLElement;
}

export function grabRefs(root: Document): UiRefs {
  const get = (id: string) => {
    const el = root.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  };
  return {
    status: get("status"),
    transcript: get("transcript"),
    gaugeFill: get("gauge-fill"),
    gaugeLabel: get("gauge-label"),
    confidenceLabel: get("confidence-label"),
    timeline: get("timeline"),
    guidance: get("guidance"),
    input: get("rep-input") as HTMLInputElement,
    sendButton: get("send-button") as HTMLButtonElement,
    previewButton: get("preview-button") as HTMLButtonElement,
    previewResult: get("preview-result"),
  };
}

export function render(refs: UiRefs, view: SessionView): void {
  refs.status.textContent =
    view.connection === "connected"
      ? `connected (session ${view.sessionId})`
      : view.connection;
  refs.status.className = `status ${view.connection}`;
  if (view.lastError) {
    refs.status.textContent += ` — ${view.lastError}`;
  }

  refs.transcript.innerHTML = "";
  view.transcript.forEach((entry, i) => {
    const div = document.createElement("div");
    div.className = `turn ${entry.speaker}`;
    const point = view.timeline.find((p) => p.turnIndex === i);
    const prob = point ? ` · p=${point.probability.toFixed(3)}` : "";
    div.textContent = `${entry.speaker === "rep" ? "you" : "customer"}: ${entry.text}${prob}`;
    refs.transcript.appendChild(div);
  });
  refs.transcript.scrollTop = refs.transcript.scrollHeight;

  const latest = view.timeline[view.timeline.length - 1];
  if (latest) {
    refs.gaugeFill.style.width = `${Math.round(latest.probability * 100)}%`;
    refs.gaugeFill.style.background = BAND_COLORS[latest.band];
    refs.gaugeLabel.textContent = `${(latest.probability * 100).toFixed(1)}% (${latest.band})`;
    refs.confidenceLabel.textContent = `confidence ${(latest.confidence * 100).toFixed(0)}%`;
  } else {
    refs.gaugeFill.style.width = "0%";
    refs.gaugeLabel.textContent = "—";
    refs.confidenceLabel.textContent = "";
  }

  refs.timeline.innerHTML = "";
  view.timeline.forEach((p) => {
    const bar = document.createElement("div");
    bar.className = "bar";
    bar.style.height = `${Math.max(2, Math.round(p.probability * 60))}px`;
    bar.style.background = BAND_COLORS[p.band];
    bar.title = `turn ${p.turnIndex}: p=${p.probability.toFixed(3)} conf=${p.confidence.toFixed(3)}`;
    refs.timeline.appendChild(bar);
  });

  if (view.guidance) {
    refs.guidance.textContent = view.guidance.text;
    refs.guidance.style.borderLeftColor = BAND_COLORS[view.guidance.band];
  }

  const busy = view.awaiting || view.connection !== "connected" || view.closedSummary !== null;
  refs.input.disabled = busy;
  refs.sendButton.disabled = busy;
  refs.previewButton.disabled = busy || !refs.input.value.trim();
}

export function renderPreview(refs: UiRefs, result: PreviewResult | null, error?: string): void {
  if (error) {
    refs.previewResult.textContent = `preview failed: ${error}`;
    return;
  }
  if (result) {
    refs.previewResult.textContent = `if sent: p=${result.probability.toFixed(3)} conf=${result.confidence.toFixed(3)}`;
  } else {
    refs.previewResult.textContent = "";
  }
}
