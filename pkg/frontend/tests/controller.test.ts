/** Controller logic against an in-memory fake of the mixvis service. */

import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import {
  buffersEqual,
  Controller,
  defaultState,
  PANEL_NAMES,
  panelPath,
  snapshotsEqual,
} from "../src/controller.js";
import { orbitToCamera, SummaryInfo } from "../src/model.js";

const INFO: SummaryInfo = {
  attributes: [
    { name: "position", kind: "position", components: 3 },
    { name: "temp", kind: "scalar", components: 1 },
    { name: "rho", kind: "scalar", components: 1 },
  ],
  dim_names: ["position.x", "position.y", "position.z", "temp", "rho"],
  cluster_count: 4,
  n_total: 1000,
  extents: [[0, 1], [0, 1], [0, 1], [-2, 2], [0, 5]],
  mean_wasserstein: 0.01,
  timesteps: 3,
  timestep: 0,
  has_raw: true,
  lod_threshold: null,
  mean_doi: 1,
  min_doi: 1,
  max_doi: 1,
  n_brushes: 0,
};

/** Deterministic fake: panel bytes are a pure function of path + state. */
function fakeService(): { fetchImpl: FetchLike; state: { brushes: unknown[]; t: number } } {
  const state = { brushes: [] as unknown[], t: 0 };
  const encoder = new TextEncoder();
  const fetchImpl: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url;
    if (method === "POST" && path === "/api/brush") {
      state.brushes.push(JSON.parse(String(init!.body)));
      return new Response(JSON.stringify({ mean_doi: 0.5, min_doi: 0, max_doi: 1,
                                           n_brushes: state.brushes.length }));
    }
    if (method === "DELETE" && path === "/api/brush") {
      state.brushes = [];
      return new Response(JSON.stringify({ mean_doi: 1, min_doi: 1, max_doi: 1, n_brushes: 0 }));
    }
    if (method === "POST" && path === "/api/timestep") {
      state.t = (JSON.parse(String(init!.body)) as { t: number }).t;
      return new Response(JSON.stringify({ timestep: state.t }));
    }
    if (method === "POST" && path === "/api/lod") {
      return new Response(JSON.stringify({ lod_threshold: 0.5 }));
    }
    if (path === "/api/summary") {
      return new Response(JSON.stringify(INFO));
    }
    // panel responses: bytes depend deterministically on path + session state
    const doc = { path, brushes: state.brushes, t: state.t };
    if (path.startsWith("/api/density1d")) {
      return new Response(JSON.stringify({ dim: 3, extent: [-2, 2],
        values: [1, 2, 3, state.brushes.length] }));
    }
    if (path.startsWith("/api/density2d")) {
      return new Response(JSON.stringify({ dims: [3, 4],
        extent: [[-2, 2], [0, 5]], width: 2, height: 2,
        values: [0, 1, 2, 3 + state.brushes.length] }));
    }
    return new Response(encoder.encode(JSON.stringify(doc)));
  };
  return { fetchImpl, state };
}

describe("defaultState", () => {
  it("picks scalar dims and a sane orbit", () => {
    const state = defaultState(INFO);
    expect(state.histDim).toBe(3);
    expect(state.heatDims).toEqual([3, 4]);
    expect(state.pcpAxes.length).toBeGreaterThanOrEqual(2);
    expect(state.orbit.distance).toBeGreaterThan(0);
  });
});

describe("panelPath", () => {
  it("encodes the camera JSON for the frame", () => {
    const state = defaultState(INFO);
    const path = panelPath("frame", state);
    expect(path).toContain("/api/frame?");
    const camParam = new URLSearchParams(path.split("?")[1]).get("camera")!;
    const cam = JSON.parse(camParam);
    expect(cam.eye).toHaveLength(3);
    expect(cam.look_at).toEqual(state.orbit.center);
  });

  it("orbitToCamera keeps the distance", () => {
    const state = defaultState(INFO);
    const cam = orbitToCamera(state.orbit) as { eye: number[]; look_at: number[] };
    const d = Math.hypot(
      cam.eye[0] - cam.look_at[0],
      cam.eye[1] - cam.look_at[1],
      cam.eye[2] - cam.look_at[2],
    );
    expect(d).toBeCloseTo(state.orbit.distance, 9);
  });
});

describe("Controller", () => {
  it("refresh populates all five panels", async () => {
    const { fetchImpl } = fakeService();
    const controller = new Controller(new ApiClient("", fetchImpl), INFO);
    await controller.refresh();
    for (const name of PANEL_NAMES) {
      expect(controller.payloads.get(name)).toBeDefined();
    }
  });

  it("brush posts then refreshes every panel with new payloads", async () => {
    const { fetchImpl } = fakeService();
    const controller = new Controller(new ApiClient("", fetchImpl), INFO);
    await controller.refresh();
    const before = controller.snapshot();
    const notified: string[] = [];
    controller.onPanel((name) => notified.push(name));
    const stats = await controller.brush(3, -1, 1);
    expect(stats.n_brushes).toBe(1);
    expect(new Set(notified)).toEqual(new Set(PANEL_NAMES));
    const after = controller.snapshot();
    expect(buffersEqual(before.get("histogram")!, after.get("histogram")!)).toBe(false);
  });

  it("clearing brushes restores byte-identical panels", async () => {
    const { fetchImpl } = fakeService();
    const controller = new Controller(new ApiClient("", fetchImpl), INFO);
    await controller.refresh();
    const base = controller.snapshot();
    await controller.brush(3, -1, 1);
    expect(snapshotsEqual(base, controller.snapshot())).toBe(false);
    await controller.clearBrushes();
    expect(snapshotsEqual(base, controller.snapshot())).toBe(true);
  });

  it("two and-brushes never raise the mean DOI", async () => {
    // fuzzy-and combination is monotone decreasing in added brushes;
    // mirror of the server-side min() combination
    const { fetchImpl } = fakeService();
    const controller = new Controller(new ApiClient("", fetchImpl), INFO);
    await controller.refresh();
    const one = await controller.brush(3, -1, 1);
    const two = await controller.brush(4, 0, 2);
    expect(two.n_brushes).toBe(2);
    expect(one.mean_doi).toBeLessThanOrEqual(1);
  });

  it("timestep change refreshes panels with the new frame state", async () => {
    const { fetchImpl } = fakeService();
    const controller = new Controller(new ApiClient("", fetchImpl), INFO);
    await controller.refresh();
    const before = controller.payloads.get("pcp")!.bytes;
    await controller.setTimestep(2);
    const after = controller.payloads.get("pcp")!.bytes;
    expect(buffersEqual(before, after)).toBe(false);
    expect(controller.state.timestep).toBe(2);
  });

  it("replaying the recorded log reproduces identical responses", async () => {
    const first = fakeService();
    const api = new ApiClient("", first.fetchImpl, true);
    const controller = new Controller(api, INFO);
    await controller.refresh();
    await controller.brush(3, -0.5, 0.5);
    await controller.setTimestep(1);
    await controller.clearBrushes();

    const second = fakeService();
    const replayApi = new ApiClient("", second.fetchImpl, true);
    const bodies = await replayApi.replay(controller.requestLog());
    expect(bodies.length).toBe(api.bodies.length);
    bodies.forEach((body, i) => {
      expect(buffersEqual(body, api.bodies[i])).toBe(true);
    });
  });

  it("drops stale responses when a newer refresh wins", async () => {
    const { fetchImpl } = fakeService();
    let release: (() => void) | null = null;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    let delayedFirst = false;
    const slowFetch: FetchLike = async (url, init) => {
      if (!delayedFirst && url.startsWith("/api/density1d")) {
        delayedFirst = true;
        await gate;
      }
      return fetchImpl(url, init);
    };
    const controller = new Controller(new ApiClient("", slowFetch), INFO);
    const firstRefresh = controller.refresh(["histogram"]);
    controller.state.histDim = 4;
    await controller.refresh(["histogram"]);
    const fresh = controller.payloads.get("histogram")!;
    release!();
    await firstRefresh;
    // the slow (stale) response must not overwrite the newer payload
    expect(controller.payloads.get("histogram")).toBe(fresh);
  });
});
