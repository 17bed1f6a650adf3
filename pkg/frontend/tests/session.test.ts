import { describe, expect, it } from "vitest";

import type { GraphView, LayerInfo, SegmentConfig } from "../src/api.js";
import { ApiError } from "../src/api.js";
import { Session } from "../src/session.js";

const LAYERS: LayerInfo[] = [
  { name: "A-WALL", entities: 6, keyword_match: true },
  { name: "A-ANNO", entities: 2, keyword_match: false },
  { name: "Muri", entities: 6, keyword_match: false },
];

function view(rooms: number[], tag = ""): GraphView {
  return {
    document: "doc",
    rooms: rooms.map(id => ({
      id, name: tag || null, area_m2: 10,
      polygon: [[0, 0], [1, 0], [1, 1], [0, 1]] as [number, number][],
    })),
    passages: [],
    render_png_base64: "",
  };
}

class FakeApi {
  calls: string[] = [];
  segmentResult: GraphView = view([1, 2, 3]);
  mergeResult: GraphView | (() => GraphView) = view([1, 3]);
  failNextMerge = false;

  async segment(_doc: string, config: SegmentConfig): Promise<GraphView> {
    this.calls.push(`segment:${JSON.stringify(config)}`);
    return this.segmentResult;
  }

  async mergeRooms(_doc: string, roomIds: number[]): Promise<GraphView> {
    this.calls.push(`merge:${roomIds.join(",")}`);
    if (this.failNextMerge) {
      this.failNextMerge = false;
      throw new ApiError(400, "selected rooms are not adjacent");
    }
    return typeof this.mergeResult === "function"
      ? this.mergeResult() : this.mergeResult;
  }

  async exportOsm(): Promise<Uint8Array> {
    this.calls.push("export");
    return new Uint8Array([60]);
  }
}

function makeSession(api: FakeApi, errors: string[] = []) {
  return new Session(api as any, "doc", LAYERS, {
    onError: message => errors.push(message),
  });
}

describe("layer picker state", () => {
  it("pre-checks keyword matches", () => {
    const session = makeSession(new FakeApi());
    expect(session.isSelected("A-WALL")).toBe(true);
    expect(session.isSelected("A-ANNO")).toBe(false);
    expect(session.isSelected("Muri")).toBe(false);
  });

  it("untouched selection defers to server keyword defaults", async () => {
    const api = new FakeApi();
    const session = makeSession(api);
    await session.segment();
    expect(api.calls[0]).toBe("segment:{}");
  });

  it("touched selection sends explicit layers", async () => {
    const api = new FakeApi();
    const session = makeSession(api);
    session.toggleLayer("A-WALL");
    session.toggleLayer("Muri");
    await session.segment();
    expect(api.calls[0]).toBe(
      'segment:{"layers":{"explicit_layers":["Muri"]}}');
  });

  it("empty touched selection disables segmentation with a reason", async () => {
    const errors: string[] = [];
    const session = makeSession(new FakeApi(), errors);
    session.toggleLayer("A-WALL");
    expect(session.canSegment()).toBe(false);
    expect(session.segmentDisabledReason()).toMatch(/at least one/);
    await expect(session.segment()).rejects.toThrow();
    expect(errors.length).toBe(1);
  });
});

describe("merge and undo", () => {
  it("confirmed merges update the view and the history", async () => {
    const api = new FakeApi();
    const session = makeSession(api);
    await session.segment();
    await session.mergeRooms([1, 2]);
    expect(session.currentView()!.rooms.map(r => r.id)).toEqual([1, 3]);
    expect(session.mergeCount()).toBe(1);
  });

  it("a rejected merge leaves the confirmed view untouched", async () => {
    const api = new FakeApi();
    const errors: string[] = [];
    const session = makeSession(api, errors);
    await session.segment();
    const before = session.currentView();
    api.failNextMerge = true;
    await expect(session.mergeRooms([1, 3])).rejects.toThrow();
    expect(session.currentView()).toBe(before);
    expect(session.mergeCount()).toBe(0);
    expect(errors).toContain("selected rooms are not adjacent");
  });

  it("undo re-segments and replays the remaining merges", async () => {
    const api = new FakeApi();
    const session = makeSession(api);
    await session.segment();
    await session.mergeRooms([1, 2]);
    await session.mergeRooms([3, 4]);
    api.calls = [];
    await session.undo();
    expect(api.calls).toEqual(["segment:{}", "merge:1,2"]);
    expect(session.mergeCount()).toBe(1);
  });

  it("segmenting again clears the merge history", async () => {
    const api = new FakeApi();
    const session = makeSession(api);
    await session.segment();
    await session.mergeRooms([1, 2]);
    await session.segment();
    expect(session.mergeCount()).toBe(0);
  });
});

describe("export gating", () => {
  it("export is disabled before the first segmentation", async () => {
    const session = makeSession(new FakeApi());
    expect(session.canExport()).toBe(false);
    await expect(session.exportOsm(31, 121, 0)).rejects.toThrow(/segment/);
  });

  it("export works after segmentation", async () => {
    const api = new FakeApi();
    const session = makeSession(api);
    await session.segment();
    const bytes = await session.exportOsm(31, 121, 0);
    expect(bytes.length).toBeGreaterThan(0);
  });
});
