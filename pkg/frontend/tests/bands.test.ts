import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { bandOf, LOW_MAX, MID_MAX } from "../src/bands.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixturePath = join(here, "..", "..", "src", "salesconv", "data", "bands.json");

describe("band thresholds", () => {
  it("match the shared server-side fixture", () => {
    const fixture = JSON.parse(readFileSync(fixturePath, "utf-8"));
    expect(LOW_MAX).toBe(fixture.low_max);
    expect(MID_MAX).toBe(fixture.mid_max);
  });

  it("assign boundaries to the upper band", () => {
    expect(bandOf(0.0)).toBe("low");
    expect(bandOf(0.3299)).toBe("low");
    expect(bandOf(0.33)).toBe("mid");
    expect(bandOf(0.6599)).toBe("mid");
    expect(bandOf(0.66)).toBe("high");
    expect(bandOf(0.7)).toBe("high");
    expect(bandOf(1.0)).toBe("high");
  });
});
