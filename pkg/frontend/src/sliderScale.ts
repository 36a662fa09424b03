/**
 * Slider track mapping between a [0, 1] track position and raw operator
 * parameter values.  Operators sampled in log space get a logarithmic
 * track so equal slider motion means equal multiplicative change.
 */

export interface ScaleSpec {
  lo: number;
  hi: number;
  log: boolean;
}

export function toTrack(value: number, s: ScaleSpec): number {
  if (s.lo === s.hi) return 0;
  if (s.log) {
    return (Math.log(value) - Math.log(s.lo)) / (Math.log(s.hi) - Math.log(s.lo));
  }
  return (value - s.lo) / (s.hi - s.lo);
}

export function fromTrack(t: number, s: ScaleSpec): number {
  const tt = Math.min(1, Math.max(0, t));
  if (s.log) {
    return Math.exp(Math.log(s.lo) + tt * (Math.log(s.hi) - Math.log(s.lo)));
  }
  return s.lo + tt * (s.hi - s.lo);
}

export interface ClampResult {
  value: number;
  clamped: boolean;
}

/** Clamp a manually entered value into the operator bounds. */
export function clampToBounds(value: number, s: ScaleSpec): ClampResult {
  if (Number.isNaN(value)) return { value: s.lo, clamped: true };
  if (value < s.lo) return { value: s.lo, clamped: true };
  if (value > s.hi) return { value: s.hi, clamped: true };
  return { value, clamped: false };
}
