import { describe, expect, it } from "vitest";

import { clickToPixel } from "../src/overlay.js";

const map = { displayWidth: 380, displayHeight: 380, imageWidth: 64, imageHeight: 64 };

describe("clickToPixel", () => {
  it("maps display coordinates onto image pixels", () => {
    expect(clickToPixel(0, 0, map)).toEqual({ x: 0, y: 0 });
    expect(clickToPixel(379, 379, map)).toEqual({ x: 63, y: 63 });
    expect(clickToPixel(190, 95, map)).toEqual({ x: 32, y: 16 });
  });

  it("ignores clicks outside the displayed image", () => {
    expect(clickToPixel(-1, 10, map)).toBeNull();
    expect(clickToPixel(10, -5, map)).toBeNull();
    expect(clickToPixel(380, 10, map)).toBeNull();
    expect(clickToPixel(10, 9999, map)).toBeNull();
  });

  it("repeats identically for the same click", () => {
    const a = clickToPixel(123, 45, map);
    const b = clickToPixel(123, 45, map);
    expect(a).toEqual(b);
  });
});
