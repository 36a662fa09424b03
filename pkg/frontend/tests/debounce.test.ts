import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce, RequestSequencer } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("collapses a rapid drag into one trailing call per quiet window", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 150);
    for (let i = 0; i < 25; i++) {
      fn(i);
      vi.advanceTimersByTime(20); // events every 20ms, well under the window
    }
    expect(calls).toHaveLength(0);
    vi.advanceTimersByTime(150);
    expect(calls).toEqual([24]); // only the last value fires
  });

  it("fires once per separated burst", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 150);
    fn(1);
    vi.advanceTimersByTime(200);
    fn(2);
    vi.advanceTimersByTime(200);
    expect(calls).toEqual([1, 2]);
  });

  it("issues at most one call per 150ms window under continuous motion", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 150);
    // 1 second of continuous motion: trailing-edge debounce emits nothing
    // until the motion pauses
    for (let t = 0; t < 1000; t += 50) {
      fn(t);
      vi.advanceTimersByTime(50);
    }
    expect(calls.length).toBeLessThanOrEqual(1000 / 150);
    vi.advanceTimersByTime(150);
    expect(calls[calls.length - 1]).toBe(950);
  });
});

describe("RequestSequencer", () => {
  it("marks only the latest issued request as current", () => {
    const seq = new RequestSequencer();
    const a = seq.issue();
    const b = seq.issue();
    expect(seq.isCurrent(a)).toBe(false);
    expect(seq.isCurrent(b)).toBe(true);
    const c = seq.issue();
    expect(seq.isCurrent(b)).toBe(false);
    expect(seq.isCurrent(c)).toBe(true);
  });
});
