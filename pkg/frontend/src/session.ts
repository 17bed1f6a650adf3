// Session state for one open document. The server is the source of truth:
// the view only ever holds a server-confirmed graph, and undo replays the
// remaining merges on top of a fresh segmentation.

import { Api, ApiError, GraphView, LayerInfo, SegmentConfig } from "./api.js";

export interface SessionEvents {
  onView?: (view: GraphView) => void;
  onError?: (message: string) => void;
}

export class Session {
  readonly layers: LayerInfo[];
  private selection: Map<string, boolean>;
  private touched = false;
  private view: GraphView | null = null;
  private mergeHistory: number[][] = [];
  private busy = false;

  constructor(private readonly api: Api, readonly docId: string,
              layers: LayerInfo[], private readonly events: SessionEvents = {}) {
    this.layers = layers;
    // keyword hits are pre-checked, mirroring the pipeline's defaults
    this.selection = new Map(layers.map(l => [l.name, l.keyword_match]));
  }

  // --- layer picker ------------------------------------------------------

  isSelected(name: string): boolean {
    return this.selection.get(name) ?? false;
  }

  toggleLayer(name: string): void {
    if (!this.selection.has(name)) return;
    this.selection.set(name, !this.selection.get(name));
    this.touched = true;
  }

  selectedLayers(): string[] {
    return this.layers.map(l => l.name).filter(n => this.selection.get(n));
  }

  canSegment(): boolean {
    // untouched: the server applies its keyword defaults; after manual
    // edits an empty selection has nothing to rasterize
    return !this.touched || this.selectedLayers().length > 0;
  }

  segmentDisabledReason(): string | null {
    return this.canSegment() ? null : "select at least one structural layer";
  }

  private config(): SegmentConfig {
    if (!this.touched) return {};
    return { layers: { explicit_layers: this.selectedLayers() } };
  }

  // --- server-confirmed state --------------------------------------------

  currentView(): GraphView | null {
    return this.view;
  }

  mergeCount(): number {
    return this.mergeHistory.length;
  }

  canExport(): boolean {
    return this.view !== null;
  }

  isBusy(): boolean {
    return this.busy;
  }

  private confirm(view: GraphView): GraphView {
    this.view = view;
    this.events.onView?.(view);
    return view;
  }

  private fail(error: unknown): never {
    const message = error instanceof ApiError ? error.detail : String(error);
    this.events.onError?.(message);
    throw error;
  }

  async segment(): Promise<GraphView> {
    if (!this.canSegment()) {
      const reason = this.segmentDisabledReason()!;
      this.events.onError?.(reason);
      throw new Error(reason);
    }
    this.busy = true;
    try {
      const view = await this.api.segment(this.docId, this.config());
      this.mergeHistory = [];
      return this.confirm(view);
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
    }
  }

  async mergeRooms(roomIds: number[]): Promise<GraphView> {
    if (this.view === null) {
      throw new Error("segment the document first");
    }
    this.busy = true;
    try {
      const view = await this.api.mergeRooms(this.docId, roomIds);
      this.mergeHistory.push([...roomIds]);
      return this.confirm(view);
    } catch (error) {
      // a rejected merge leaves no partial state: the view is untouched
      this.fail(error);
    } finally {
      this.busy = false;
    }
  }

  async undo(): Promise<GraphView> {
    if (this.mergeHistory.length === 0) {
      throw new Error("nothing to undo");
    }
    const replay = this.mergeHistory.slice(0, -1);
    this.busy = true;
    try {
      let view = await this.api.segment(this.docId, this.config());
      for (const merge of replay) {
        view = await this.api.mergeRooms(this.docId, merge);
      }
      this.mergeHistory = replay;
      return this.confirm(view);
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
    }
  }

  async exportOsm(lat: number, lon: number, level: number): Promise<Uint8Array> {
    if (!this.canExport()) {
      throw new Error("segment the document before exporting");
    }
    this.busy = true;
    try {
      return await this.api.exportOsm(this.docId, lat, lon, level);
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
    }
  }
}

export async function openDocument(api: Api, dxf: ArrayBuffer | Uint8Array,
                                   events: SessionEvents = {}): Promise<Session> {
  const uploaded = await api.upload(dxf);
  return new Session(api, uploaded.id, uploaded.layers, events);
}
