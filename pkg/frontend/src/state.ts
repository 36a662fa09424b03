/**
 * Session state transitions, kept pure for testing.
 *
 * The core invariant: `displayed` only ever changes when a response whose
 * sequence number is still current arrives, and it stores the gamma the
 * request was issued with, so the gamma label shown next to the result can
 * never drift from the result itself (latest-wins).
 */

export interface DisplayedResult {
  gamma: number;
  url: string;
  psnr: number | null;
  seq: number;
}

export interface HistoryEntry {
  gamma: number;
  url: string;
}

export interface SessionState {
  operator: string | null;
  sliderGamma: number;
  displayed: DisplayedResult | null;
  history: HistoryEntry[];
  pendingSeq: number | null;
  flash: string | null;
}

export function initialState(): SessionState {
  return {
    operator: null,
    sliderGamma: 0,
    displayed: null,
    history: [],
    pendingSeq: null,
    flash: null,
  };
}

export function startRequest(state: SessionState, seq: number, gamma: number): SessionState {
  return { ...state, pendingSeq: seq, sliderGamma: gamma, flash: null };
}

export interface ResponsePayload {
  seq: number;
  gamma: number;
  url: string;
  psnr: number | null;
}

const HISTORY_LIMIT = 12;

/** Apply a response; stale sequence numbers leave the state untouched. */
export function applyResponse(
  state: SessionState,
  payload: ResponsePayload,
  isCurrent: boolean,
): SessionState {
  if (!isCurrent) return state;
  const entry: HistoryEntry = { gamma: payload.gamma, url: payload.url };
  const history = [...state.history, entry].slice(-HISTORY_LIMIT);
  return {
    ...state,
    displayed: {
      gamma: payload.gamma,
      url: payload.url,
      psnr: payload.psnr,
      seq: payload.seq,
    },
    history,
    pendingSeq: state.pendingSeq === payload.seq ? null : state.pendingSeq,
  };
}

export function flashMessage(state: SessionState, message: string): SessionState {
  return { ...state, flash: message };
}
