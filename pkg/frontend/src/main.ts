/**
 * DOM wiring: canvas rendering, pixel-exact click mapping, and controls.
 * Left click places a positive (green) click, right click a negative (red)
 * one; the threshold slider binarizes the cached 16-bit map locally.
 */
import { ApiClient, Polarity } from "./api.js";
import { overlayFromMap, overlayFromMask, thresholdMask } from "./overlay.js";
import { SessionController, UiSessionState } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("view");
const banner = $<HTMLDivElement>("banner");
const bannerText = $<HTMLSpanElement>("banner-text");
const methodSelect = $<HTMLSelectElement>("method");
const thresholdInput = $<HTMLInputElement>("threshold");
const thresholdEnabled = $<HTMLInputElement>("threshold-enabled");
const thresholdValue = $<HTMLSpanElement>("threshold-value");
const opacityInput = $<HTMLInputElement>("opacity");
const zoomSelect = $<HTMLSelectElement>("zoom");
const undoButton = $<HTMLButtonElement>("undo");
const statusLine = $<HTMLSpanElement>("status");

const DEMO_SCENE = {
  height: 96,
  width: 96,
  bands: 24,
  wavelength_range: [450.0, 950.0],
  classes: [520.0, 660.0, 800.0].map((c) => ({
    centers_nm: [c],
    widths_nm: [55.0],
    amplitudes: [1.0],
    region_seeds: 3,
    baseline: 0.05,
  })),
  shading: { min: 0.7, max: 1.3, smoothness: 12.0 },
  noise_sigma: 0.25,
  border: 2,
  seed: 7,
};

let baseImage: ImageBitmap | null = null;
let currentMap: Uint16Array | null = null;

const api = new ApiClient("");
const controller = new SessionController(api, {
  onState: renderState,
  onOverlay: (map) => {
    currentMap = map;
    redraw();
  },
  onError: (message) => {
    bannerText.textContent = message;
    banner.hidden = false;
  },
});

function renderState(state: UiSessionState): void {
  undoButton.disabled = state.clicks.length === 0 || state.busy;
  const latency = state.lastLatencyMs === null ? "" : ` | ${state.lastLatencyMs} ms`;
  statusLine.textContent = state.meta
    ? `${state.meta.width}x${state.meta.height}, ${state.meta.bands} bands | ` +
      `${state.clicks.length} click(s)${latency}`
    : "no session";
  thresholdValue.textContent = thresholdEnabled.checked
    ? Number(thresholdInput.value).toFixed(3)
    : "off";
}

function applyZoom(): void {
  if (!controller.state.meta) return;
  const zoom = Number(zoomSelect.value);
  canvas.style.width = `${controller.state.meta.width * zoom}px`;
  canvas.style.height = `${controller.state.meta.height * zoom}px`;
}

function redraw(): void {
  const meta = controller.state.meta;
  if (!meta) return;
  canvas.width = meta.width;
  canvas.height = meta.height;
  applyZoom();
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (baseImage) ctx.drawImage(baseImage, 0, 0);

  if (currentMap) {
    const rgba = thresholdEnabled.checked
      ? overlayFromMask(
          thresholdMask(currentMap, Number(thresholdInput.value)),
          controller.state.opacity,
        )
      : overlayFromMap(currentMap, controller.state.opacity);
    const layer = document.createElement("canvas");
    layer.width = meta.width;
    layer.height = meta.height;
    layer.getContext("2d")!.putImageData(new ImageData(rgba, meta.width, meta.height), 0, 0);
    ctx.drawImage(layer, 0, 0);
  }

  for (const click of controller.state.clicks) {
    ctx.fillStyle = click.polarity === "positive" ? "#2ecc40" : "#ff4136";
    ctx.beginPath();
    ctx.arc(click.col + 0.5, click.row + 0.5, 1.6, 0, 2 * Math.PI);
    ctx.fill();
  }
}

/** Map a mouse event to image pixel coordinates, exact under zoom and DPR. */
function pixelFromEvent(event: MouseEvent): { row: number; col: number } | null {
  const meta = controller.state.meta;
  if (!meta) return null;
  const rect = canvas.getBoundingClientRect();
  const col = Math.floor(((event.clientX - rect.left) / rect.width) * meta.width);
  const row = Math.floor(((event.clientY - rect.top) / rect.height) * meta.height);
  if (row < 0 || col < 0 || row >= meta.height || col >= meta.width) return null;
  return { row, col };
}

async function openSession(source: { cubePath?: string; sceneSpec?: object }): Promise<void> {
  banner.hidden = true;
  try {
    await controller.open(source);
  } catch {
    return; // error already surfaced via the banner
  }
  const meta = controller.state.meta!;
  methodSelect.replaceChildren(
    ...meta.methods.map((m) => {
      const option = document.createElement("option");
      option.value = m;
      option.textContent = m;
      return option;
    }),
  );
  methodSelect.value = controller.state.method;
  const png = await api.fetchRgbPng(meta.id);
  baseImage = await createImageBitmap(new Blob([png as BlobPart], { type: "image/png" }));
  currentMap = null;
  redraw();
}

function clickHandler(polarity: Polarity) {
  return (event: MouseEvent) => {
    event.preventDefault();
    const pixel = pixelFromEvent(event);
    if (!pixel) return;
    void controller.clickAt(pixel.row, pixel.col, polarity).then(redraw);
  };
}

canvas.addEventListener("click", clickHandler("positive"));
canvas.addEventListener("contextmenu", clickHandler("negative"));
undoButton.addEventListener("click", () => void controller.undo().then(redraw));
methodSelect.addEventListener("change", () => void controller.setMethod(methodSelect.value));
thresholdInput.addEventListener("input", () => {
  controller.setThreshold(thresholdEnabled.checked ? Number(thresholdInput.value) : null);
  redraw();
});
thresholdEnabled.addEventListener("change", () => {
  controller.setThreshold(thresholdEnabled.checked ? Number(thresholdInput.value) : null);
  redraw();
});
opacityInput.addEventListener("input", () => {
  controller.setOpacity(Number(opacityInput.value));
  redraw();
});
zoomSelect.addEventListener("change", applyZoom);
$<HTMLButtonElement>("banner-dismiss").addEventListener("click", () => {
  banner.hidden = true;
});
$<HTMLButtonElement>("open-demo").addEventListener("click", () => {
  void openSession({ sceneSpec: DEMO_SCENE });
});
$<HTMLButtonElement>("open-cube").addEventListener("click", () => {
  const path = $<HTMLInputElement>("cube-path").value.trim();
  if (path) void openSession({ cubePath: path });
});

renderState(controller.state);
