// Thin typed client for the plan2osm review service. The UI never computes
// geometry itself; every polygon it shows came out of these calls.

export interface LayerInfo {
  name: string;
  entities: number;
  keyword_match: boolean;
}

export interface UploadResponse {
  id: string;
  layers: LayerInfo[];
  warnings: string[];
}

export interface RoomView {
  id: number;
  name: string | null;
  area_m2: number;
  polygon: [number, number][];
}

export interface PassageView {
  id: number;
  room_a: number;
  room_b: number;
  endpoints: [[number, number], [number, number]];
}

export interface GraphView {
  document: string;
  rooms: RoomView[];
  passages: PassageView[];
  render_png_base64: string;
}

export interface SegmentConfig {
  layers?: { explicit_layers?: string[]; text_layers?: string[] };
  raster?: { resolution?: number };
  segmentation?: { alpha?: number; door_max_width?: number };
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function jsonOrThrow(response: Response): Promise<any> {
  if (response.ok) {
    return response.json();
  }
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class Api {
  constructor(private readonly baseUrl: string) {}

  async health(): Promise<boolean> {
    try {
      const response = await fetch(`${this.baseUrl}/health`);
      return response.ok;
    } catch {
      return false;
    }
  }

  async upload(dxf: ArrayBuffer | Uint8Array): Promise<UploadResponse> {
    const body = dxf instanceof Uint8Array
      ? (dxf.buffer.slice(dxf.byteOffset, dxf.byteOffset + dxf.byteLength) as ArrayBuffer)
      : dxf;
    const response = await fetch(`${this.baseUrl}/documents`, {
      method: "POST",
      headers: { "Content-Type": "application/octet-stream" },
      body,
    });
    return jsonOrThrow(response);
  }

  async segment(docId: string, config: SegmentConfig): Promise<GraphView> {
    const response = await fetch(`${this.baseUrl}/documents/${docId}/segment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ config }),
    });
    return jsonOrThrow(response);
  }

  async mergeRooms(docId: string, roomIds: number[]): Promise<GraphView> {
    const response = await fetch(`${this.baseUrl}/documents/${docId}/merge-rooms`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ room_ids: roomIds }),
    });
    return jsonOrThrow(response);
  }

  async exportOsm(docId: string, lat: number, lon: number,
                  level: number): Promise<Uint8Array> {
    const response = await fetch(`${this.baseUrl}/documents/${docId}/export`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ origin: { lat, lon }, level }),
    });
    if (!response.ok) {
      await jsonOrThrow(response); // throws with the server's detail
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}
