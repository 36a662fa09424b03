/**
 * Explorer page wiring: upload an image, pick an operator, drag the
 * parameter slider and watch live inference results side by side with the
 * input.  Clicking the result with RF mode on overlays the effective
 * receptive field of the clicked point.
 */

import { ApiClient, ApiError, OperatorInfo } from "./api.js";
import { debounce, RequestSequencer } from "./debounce.js";
import { clampToBounds, fromTrack, ScaleSpec, toTrack } from "./sliderScale.js";
import { applyResponse, initialState, SessionState, startRequest } from "./state.js";
import { clearOverlay, clickToPixel, paintOverlay } from "./overlay.js";

const DEBOUNCE_MS = 150;
const TRACK_STEPS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const serverInput = el<HTMLInputElement>("server");
const operatorSelect = el<HTMLSelectElement>("operator");
const slider = el<HTMLInputElement>("gamma-slider");
const gammaEntry = el<HTMLInputElement>("gamma-entry");
const gammaLabel = el<HTMLSpanElement>("gamma-label");
const scaleLabel = el<HTMLSpanElement>("scale-label");
const statusLine = el<HTMLDivElement>("status");
const metricLine = el<HTMLDivElement>("metrics");
const fileInput = el<HTMLInputElement>("image-file");
const referenceInput = el<HTMLInputElement>("reference-file");
const inputImg = el<HTMLImageElement>("input-image");
const resultImg = el<HTMLImageElement>("result-image");
const resultGamma = el<HTMLDivElement>("result-gamma");
const historyStrip = el<HTMLDivElement>("history");
const rfToggle = el<HTMLInputElement>("rf-toggle");
const rfCanvas = el<HTMLCanvasElement>("rf-canvas");

let state: SessionState = initialState();
let operators: OperatorInfo[] = [];
let scale: ScaleSpec = { lo: 0, hi: 1, log: false };
let imageBlob: Blob | null = null;
let referenceBlob: Blob | null = null;
let imageSize: { w: number; h: number } | null = null;
const sequencer = new RequestSequencer();

function client(): ApiClient {
  return new ApiClient(serverInput.value || "http://127.0.0.1:8000");
}

function currentOperator(): OperatorInfo | null {
  return operators.find((o) => o.name === operatorSelect.value) ?? null;
}

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.classList.toggle("error", isError);
}

function renderGamma(value: number): void {
  gammaLabel.textContent = value.toPrecision(4);
  gammaEntry.value = value.toPrecision(4);
}

function setControlsEnabled(enabled: boolean): void {
  for (const node of [slider, gammaEntry, operatorSelect, rfToggle]) {
    node.disabled = !enabled;
  }
}

async function loadOperators(): Promise<void> {
  try {
    operators = await client().operators();
  } catch (err) {
    operators = [];
    setStatus(`cannot reach server: ${err}`, true);
  }
  operatorSelect.innerHTML = "";
  if (operators.length === 0) {
    setControlsEnabled(false);
    setStatus("no operators available; check the server", true);
    return;
  }
  for (const op of operators) {
    const opt = document.createElement("option");
    opt.value = op.name;
    opt.textContent = op.name;
    operatorSelect.appendChild(opt);
  }
  setControlsEnabled(true);
  applyOperator(operators[0]);
  setStatus(`loaded ${operators.length} operator(s)`);
}

function applyOperator(op: OperatorInfo): void {
  operatorSelect.value = op.name;
  const [lo, hi] = op.bounds[0];
  scale = { lo, hi, log: op.sampling === "log" };
  scaleLabel.textContent = op.sampling === "log" ? "log scale" : "linear scale";
  const mid = fromTrack(0.5, scale);
  slider.min = "0";
  slider.max = String(TRACK_STEPS);
  slider.value = String(Math.round(toTrack(mid, scale) * TRACK_STEPS));
  state = { ...state, operator: op.name, sliderGamma: mid };
  renderGamma(mid);
}

function scheduleInfer(gamma: number): void {
  state = startRequest(state, -1, gamma); // pendingSeq assigned in runInfer
  renderGamma(gamma);
  debouncedInfer(gamma);
}

const debouncedInfer = debounce((gamma: number) => {
  void runInfer(gamma);
}, DEBOUNCE_MS);

async function runInfer(gamma: number): Promise<void> {
  const op = currentOperator();
  if (!op || !imageBlob) {
    setStatus("upload an image first");
    return;
  }
  const seq = sequencer.issue();
  state = startRequest(state, seq, gamma);
  setStatus(`inferring at ${gamma.toPrecision(4)}...`);
  try {
    const result = await client().infer(imageBlob, op.name, gamma, referenceBlob);
    if (!sequencer.isCurrent(seq)) return; // stale response: drop
    const url = URL.createObjectURL(result.blob);
    state = applyResponse(
      state,
      { seq, gamma, url, psnr: result.psnr },
      sequencer.isCurrent(seq),
    );
    renderResult();
    metricLine.textContent =
      result.psnr === null
        ? ""
        : `PSNR ${result.psnr.toFixed(2)} dB / SSIM ${result.ssim?.toFixed(4)}`;
    setStatus("done");
  } catch (err) {
    if (!sequencer.isCurrent(seq)) return;
    if (err instanceof ApiError && err.body && typeof err.body === "object") {
      const b = err.body as { field?: string; bound?: unknown; given?: unknown };
      setStatus(`rejected: ${b.field} given=${b.given} bound=${JSON.stringify(b.bound)}`, true);
    } else {
      setStatus(String(err), true);
    }
  }
}

function renderResult(): void {
  const d = state.displayed;
  if (!d) return;
  resultImg.src = d.url;
  resultGamma.textContent = `result @ gamma = ${d.gamma.toPrecision(4)}`;
  clearOverlay(rfCanvas);
  historyStrip.innerHTML = "";
  for (const entry of state.history) {
    const thumb = document.createElement("img");
    thumb.src = entry.url;
    thumb.title = `gamma = ${entry.gamma.toPrecision(4)}`;
    thumb.addEventListener("click", () => scheduleInfer(entry.gamma));
    historyStrip.appendChild(thumb);
  }
}

slider.addEventListener("input", () => {
  const t = Number(slider.value) / TRACK_STEPS;
  scheduleInfer(fromTrack(t, scale));
});

gammaEntry.addEventListener("change", () => {
  const raw = Number(gammaEntry.value);
  const { value, clamped } = clampToBounds(raw, scale);
  if (clamped) {
    setStatus(`value ${gammaEntry.value} clamped to [${scale.lo}, ${scale.hi}]`, true);
  }
  slider.value = String(Math.round(toTrack(value, scale) * TRACK_STEPS));
  scheduleInfer(value);
});

operatorSelect.addEventListener("change", () => {
  const op = currentOperator();
  if (op) {
    applyOperator(op);
    scheduleInfer(state.sliderGamma);
  }
});

fileInput.addEventListener("change", () => {
  const f = fileInput.files?.[0];
  if (!f) return;
  imageBlob = f;
  const url = URL.createObjectURL(f);
  inputImg.src = url;
  inputImg.onload = () => {
    imageSize = { w: inputImg.naturalWidth, h: inputImg.naturalHeight };
  };
  scheduleInfer(state.sliderGamma);
});

referenceInput.addEventListener("change", () => {
  referenceBlob = referenceInput.files?.[0] ?? null;
  if (imageBlob) scheduleInfer(state.sliderGamma);
});

resultImg.addEventListener("click", async (ev) => {
  if (!rfToggle.checked || !imageSize || !state.displayed) return;
  const rect = resultImg.getBoundingClientRect();
  const pixel = clickToPixel(ev.clientX - rect.left, ev.clientY - rect.top, {
    displayWidth: rect.width,
    displayHeight: rect.height,
    imageWidth: imageSize.w,
    imageHeight: imageSize.h,
  });
  if (!pixel) return; // outside the image: ignored
  const op = currentOperator();
  if (!op) return;
  try {
    setStatus(`receptive field at (${pixel.x}, ${pixel.y})...`);
    const overlay = await client().rfOverlay(pixel.x, pixel.y, state.displayed.gamma, op.name);
    await paintOverlay(rfCanvas, overlay);
    setStatus("receptive field overlaid");
  } catch (err) {
    setStatus(String(err), true);
  }
});

serverInput.addEventListener("change", () => void loadOperators());

void loadOperators();
