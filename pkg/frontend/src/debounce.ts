/**
 * Trailing-edge debouncer plus a latest-wins sequencer.
 *
 * Slider drags fire many events; the debouncer collapses them to at most
 * one call per quiet window, and the sequencer tags each issued request so
 * stale responses (an earlier request resolving after a later one) are
 * dropped instead of overwriting fresher state.
 */

export function debounce<Args extends unknown[]>(
  fn: (...args: Args) => void,
  waitMs: number,
): (...args: Args) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: Args) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
}

export class RequestSequencer {
  private latest = 0;

  /** Tag a new outgoing request. */
  issue(): number {
    this.latest += 1;
    return this.latest;
  }

  /** True when `seq` belongs to the most recently issued request. */
  isCurrent(seq: number): boolean {
    return seq === this.latest;
  }
}
