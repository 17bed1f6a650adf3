// Canvas rendering of server-produced geometry: raster PNG underlay, room
// polygons, passage chords as distinct strokes. World coordinates are
// meters; the fit transform is the only math done client-side.

import { GraphView, RoomView } from "./api.js";

export interface Fit {
  scale: number;   // px per meter
  offsetX: number;
  offsetY: number;
  height: number;  // canvas height, for the y flip
}

export function fitView(view: GraphView, width: number, height: number,
                        margin = 16): Fit {
  let minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
  for (const room of view.rooms) {
    for (const [x, y] of room.polygon) {
      minX = Math.min(minX, x);
      minY = Math.min(minY, y);
      maxX = Math.max(maxX, x);
      maxY = Math.max(maxY, y);
    }
  }
  if (!Number.isFinite(minX)) {
    return { scale: 1, offsetX: 0, offsetY: 0, height };
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min((width - 2 * margin) / spanX,
                         (height - 2 * margin) / spanY);
  return {
    scale,
    offsetX: margin - minX * scale + (width - 2 * margin - spanX * scale) / 2,
    offsetY: margin - minY * scale + (height - 2 * margin - spanY * scale) / 2,
    height,
  };
}

export function toScreen(fit: Fit, x: number, y: number): [number, number] {
  // world y grows upward, canvas y grows downward
  return [x * fit.scale + fit.offsetX,
          fit.height - (y * fit.scale + fit.offsetY)];
}

const ROOM_COLORS = ["#7fb3d5", "#82d3a8", "#f3c98b", "#d7a6de", "#9fd4dd",
                     "#e8a09a", "#b5cc8e", "#c0b6e0"];

export function roomColor(roomId: number): string {
  return ROOM_COLORS[Math.abs(roomId) % ROOM_COLORS.length];
}

export function drawGraph(ctx: CanvasRenderingContext2D, view: GraphView,
                          fit: Fit, selected: Set<number>): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const room of view.rooms) {
    ctx.beginPath();
    room.polygon.forEach(([x, y], i) => {
      const [sx, sy] = toScreen(fit, x, y);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.closePath();
    ctx.fillStyle = roomColor(room.id) + (selected.has(room.id) ? "" : "66");
    ctx.fill();
    ctx.strokeStyle = selected.has(room.id) ? "#c0392b" : "#2c3e50";
    ctx.lineWidth = selected.has(room.id) ? 3 : 1;
    ctx.stroke();
    if (room.name) {
      const [cx, cy] = polygonLabelAnchor(room, fit);
      ctx.fillStyle = "#1a1a1a";
      ctx.font = "12px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(room.name, cx, cy);
    }
  }
  for (const passage of view.passages) {
    const [a, b] = passage.endpoints;
    const [ax, ay] = toScreen(fit, a[0], a[1]);
    const [bx, by] = toScreen(fit, b[0], b[1]);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.strokeStyle = "#c0392b";
    ctx.lineWidth = 4;
    ctx.stroke();
  }
}

function polygonLabelAnchor(room: RoomView, fit: Fit): [number, number] {
  let sx = 0, sy = 0;
  for (const [x, y] of room.polygon) {
    sx += x;
    sy += y;
  }
  return toScreen(fit, sx / room.polygon.length, sy / room.polygon.length);
}

// point-in-polygon for click-to-select; ray casting on world coordinates
export function roomAt(view: GraphView, x: number, y: number): number | null {
  for (const room of view.rooms) {
    if (pointInPolygon(x, y, room.polygon)) return room.id;
  }
  return null;
}

export function pointInPolygon(x: number, y: number,
                               polygon: [number, number][]): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const [xi, yi] = polygon[i];
    const [xj, yj] = polygon[j];
    if ((yi > y) !== (yj > y)
        && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}
