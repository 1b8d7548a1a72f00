/** DOM glue: canvas rendering, click capture, gallery, session controls. */

import { ApiClient, ApiError, SceneListEntry } from "./api.js";
import { compositeOverlay } from "./overlay.js";
import { decodePpm, RgbaImage } from "./ppm.js";
import {
  ViewState,
  applyClickResponse,
  beginSession,
  emptyState,
  markFinalized,
} from "./state.js";

const SCALE = 7; // display zoom for the 64x64 scenes

const api = new ApiClient("");
let state: ViewState = emptyState();
let sceneImage: RgbaImage | null = null;
let overlayAlpha = 0.55;
let inflight = false; // at most one click request at a time
const pending: Array<{ x: number; y: number; positive: boolean }> = [];

const canvas = document.getElementById("board") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const categorySelect = document.getElementById("category") as HTMLSelectElement;
const sceneSelect = document.getElementById("scene") as HTMLSelectElement;
const newSessionBtn = document.getElementById("new-session") as HTMLButtonElement;
const finalizeBtn = document.getElementById("finalize") as HTMLButtonElement;
const alphaSlider = document.getElementById("alpha") as HTMLInputElement;
const readout = document.getElementById("readout") as HTMLElement;
const gallery = document.getElementById("gallery") as HTMLElement;
const toast = document.getElementById("toast") as HTMLElement;

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 2600);
}

function toImageData(rgba: Uint8ClampedArray, width: number, height: number): ImageData {
  const out = new ImageData(width, height);
  out.data.set(rgba);
  return out;
}

function paint(): void {
  if (!sceneImage) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  const composited =
    state.mask !== null
      ? compositeOverlay(sceneImage, state.mask, overlayAlpha)
      : new Uint8ClampedArray(sceneImage.rgba);
  const image = toImageData(composited, sceneImage.width, sceneImage.height);

  const off = document.createElement("canvas");
  off.width = sceneImage.width;
  off.height = sceneImage.height;
  off.getContext("2d")!.putImageData(image, 0, 0);

  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);

  for (const marker of state.markers) {
    ctx.beginPath();
    ctx.arc((marker.x + 0.5) * SCALE, (marker.y + 0.5) * SCALE, 5, 0, 2 * Math.PI);
    ctx.fillStyle = marker.positive ? "#2ecc40" : "#ff4136";
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.stroke();
  }
}

function updateReadout(): void {
  const iou = state.mask ? (state.iou * 100).toFixed(1) + "%" : "—";
  readout.textContent = `clicks: ${state.clicks}   IoU: ${iou}${state.finalized ? "   (finalized)" : ""}`;
}

async function renderGallery(): Promise<void> {
  gallery.replaceChildren();
  for (const prompt of state.prompts) {
    const cell = document.createElement("figure");
    cell.className = "prompt";
    const thumb = document.createElement("canvas");
    thumb.width = state.width;
    thumb.height = state.height;
    try {
      const bytes = await api.fetchSceneImage(prompt.image_url);
      const img = decodePpm(bytes);
      thumb.getContext("2d")!.putImageData(toImageData(img.rgba, img.width, img.height), 0, 0);
    } catch {
      // thumbnail failures must not break the session view
    }
    const caption = document.createElement("figcaption");
    caption.textContent = `${prompt.scene_id}  ·  ${prompt.score.toFixed(3)}`;
    cell.append(thumb, caption);
    gallery.append(cell);
  }
}

async function loadScenes(): Promise<void> {
  const scenes: SceneListEntry[] = await api.listScenes(undefined, "eval");
  const categories = [...new Set(scenes.map((s) => s.category))].sort();
  categorySelect.replaceChildren(
    ...categories.map((c) => new Option(c, c)),
  );
  refreshSceneOptions(scenes);
  categorySelect.onchange = () => refreshSceneOptions(scenes);
}

function refreshSceneOptions(scenes: SceneListEntry[]): void {
  const chosen = categorySelect.value;
  sceneSelect.replaceChildren(
    ...scenes.filter((s) => s.category === chosen).map((s) => new Option(s.id, s.id)),
  );
}

async function startSession(): Promise<void> {
  try {
    const info = await api.createSession(sceneSelect.value, 5);
    state = beginSession(info);
    const bytes = await api.fetchSceneImage(info.image_url);
    sceneImage = decodePpm(bytes);
    canvas.width = info.width * SCALE;
    canvas.height = info.height * SCALE;
    paint();
    updateReadout();
    await renderGallery();
  } catch (err) {
    showToast(err instanceof ApiError ? `server: ${err.message}` : String(err));
  }
}

async function submitClick(x: number, y: number, positive: boolean): Promise<void> {
  if (!state.sessionId) {
    showToast("start a session first");
    return;
  }
  if (inflight) {
    pending.push({ x, y, positive });
    return;
  }
  inflight = true;
  try {
    const resp = await api.sendClick(state.sessionId, x, y, positive);
    state = applyClickResponse(state, { x, y, positive }, resp);
    paint();
    updateReadout();
  } catch (err) {
    showToast(err instanceof ApiError ? `server: ${err.message}` : String(err));
  } finally {
    inflight = false;
    const next = pending.shift();
    if (next) void submitClick(next.x, next.y, next.positive);
  }
}

canvas.addEventListener("contextmenu", (e) => e.preventDefault());
canvas.addEventListener("mousedown", (e) => {
  const rect = canvas.getBoundingClientRect();
  const x = Math.floor(((e.clientX - rect.left) / rect.width) * state.width);
  const y = Math.floor(((e.clientY - rect.top) / rect.height) * state.height);
  const positive = e.button !== 2; // right button adds a negative click
  void submitClick(x, y, positive);
});

newSessionBtn.addEventListener("click", () => void startSession());
finalizeBtn.addEventListener("click", async () => {
  if (!state.sessionId) return;
  try {
    const resp = await api.finalize(state.sessionId);
    state = markFinalized(state);
    updateReadout();
    showToast(resp.warning ?? `prompt pool now holds ${resp.pool_size}`);
  } catch (err) {
    showToast(err instanceof ApiError ? `server: ${err.message}` : String(err));
  }
});
alphaSlider.addEventListener("input", () => {
  overlayAlpha = Number(alphaSlider.value) / 100;
  paint();
});

void loadScenes();
