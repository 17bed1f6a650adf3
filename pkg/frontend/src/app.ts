// DOM wiring for the operator console: upload, layer picker, segmentation
// preview with click-to-select merging, undo, and OSM export.

import { Api, GraphView } from "./api.js";
import { drawGraph, fitView, roomAt } from "./canvas.js";
import { openDocument, Session } from "./session.js";
import { validateOrigin } from "./validate.js";

const api = new Api("");
let session: Session | null = null;
const selectedRooms = new Set<number>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setError(message: string | null): void {
  const box = el<HTMLDivElement>("error");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

function setStatus(message: string): void {
  el<HTMLSpanElement>("status").textContent = message;
}

function renderLayerPicker(): void {
  const list = el<HTMLUListElement>("layers");
  list.innerHTML = "";
  if (!session) return;
  for (const layer of session.layers) {
    const item = document.createElement("li");
    const checkbox = document.createElement("input");
    checkbox.type = "checkbox";
    checkbox.checked = session.isSelected(layer.name);
    checkbox.addEventListener("change", () => {
      session!.toggleLayer(layer.name);
      refreshControls();
    });
    const label = document.createElement("label");
    label.append(checkbox,
                 ` ${layer.name} (${layer.entities} entities` +
                 `${layer.keyword_match ? ", keyword match" : ""})`);
    item.append(label);
    list.append(item);
  }
}

function refreshControls(): void {
  const segmentBtn = el<HTMLButtonElement>("segment");
  const mergeBtn = el<HTMLButtonElement>("merge");
  const undoBtn = el<HTMLButtonElement>("undo");
  const exportBtn = el<HTMLButtonElement>("export");
  segmentBtn.disabled = !session || !session.canSegment() || session.isBusy();
  mergeBtn.disabled = !session || selectedRooms.size < 2 || session.isBusy();
  undoBtn.disabled = !session || session.mergeCount() === 0 || session.isBusy();
  exportBtn.disabled = !session || !session.canExport() || session.isBusy();
  if (session && !session.canSegment()) {
    setError(session.segmentDisabledReason());
  }
}

function renderView(view: GraphView): void {
  const canvas = el<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d")!;
  const fit = fitView(view, canvas.width, canvas.height);
  drawGraph(ctx, view, fit, selectedRooms);
  const underlay = el<HTMLImageElement>("raster");
  underlay.src = `data:image/png;base64,${view.render_png_base64}`;
  setStatus(`${view.rooms.length} rooms, ${view.passages.length} passages,`
            + ` ${session?.mergeCount() ?? 0} merges applied`);
  refreshControls();
}

function repaint(): void {
  const view = session?.currentView();
  if (view) renderView(view);
}

async function handleUpload(file: File): Promise<void> {
  setError(null);
  const data = await file.arrayBuffer();
  session = await openDocument(api, data, {
    onView: view => {
      selectedRooms.clear();
      renderView(view);
    },
    onError: message => setError(message),
  });
  selectedRooms.clear();
  renderLayerPicker();
  refreshControls();
  setStatus(`document ${session.docId}: pick layers and segment`);
}

export function wireUp(): void {
  el<HTMLInputElement>("file").addEventListener("change", event => {
    const input = event.target as HTMLInputElement;
    if (input.files?.length) {
      handleUpload(input.files[0]).catch(err => setError(String(err)));
    }
  });

  el<HTMLButtonElement>("segment").addEventListener("click", () => {
    setError(null);
    session?.segment().catch(() => undefined); // errors surface via onError
  });

  el<HTMLCanvasElement>("map").addEventListener("click", event => {
    const view = session?.currentView();
    if (!view) return;
    const canvas = el<HTMLCanvasElement>("map");
    const rect = canvas.getBoundingClientRect();
    const fit = fitView(view, canvas.width, canvas.height);
    const sx = event.clientX - rect.left;
    const sy = event.clientY - rect.top;
    const worldX = (sx - fit.offsetX) / fit.scale;
    const worldY = (fit.height - sy - fit.offsetY) / fit.scale;
    const hit = roomAt(view, worldX, worldY);
    if (hit !== null) {
      if (selectedRooms.has(hit)) selectedRooms.delete(hit);
      else selectedRooms.add(hit);
      repaint();
    }
  });

  el<HTMLButtonElement>("merge").addEventListener("click", () => {
    setError(null);
    session?.mergeRooms([...selectedRooms]).catch(() => undefined);
  });

  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    setError(null);
    session?.undo().catch(() => undefined);
  });

  el<HTMLButtonElement>("export").addEventListener("click", async () => {
    setError(null);
    if (!session) return;
    const origin = {
      lat: parseFloat(el<HTMLInputElement>("lat").value),
      lon: parseFloat(el<HTMLInputElement>("lon").value),
      level: parseInt(el<HTMLInputElement>("level").value, 10),
    };
    const problems = validateOrigin(origin);
    if (problems.length) {
      setError(problems.join("; "));
      return;
    }
    try {
      const bytes = await session.exportOsm(origin.lat, origin.lon, origin.level);
      const blob = new Blob([bytes.slice()], { type: "application/xml" });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = "plan.osm";
      link.click();
      URL.revokeObjectURL(link.href);
    } catch {
      // surfaced via onError
    }
  });

  refreshControls();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  wireUp();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wireUp);
}
