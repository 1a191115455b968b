// Probability band thresholds. These must stay identical to the server's
// guidance routing constants; tests pin both sides to the shared fixture
// at src/salesconv/data/bands.json.
export const LOW_MAX = 0.33;
export const MID_MAX = 0.66;

export type Band = "low" | "mid" | "high";

export function bandOf(probability: number): Band {
  if (probability < LOW_MAX) return "low";
  if (probability < MID_MAX) return "mid";
  return "high";
}

export const BAND_COLORS: Record<Band, string> = {
  low: "#c0392b",
  mid: "#d4a017",
  high: "#27893b",
};
