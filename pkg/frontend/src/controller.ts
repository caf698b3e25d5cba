/** View state and panel refresh orchestration.
 *
 * The controller never computes densities: each panel's pixels come from
 * one API response, cached by its request path. Refreshes de-duplicate
 * in-flight requests per panel and bump a generation counter so stale
 * responses are dropped.
 */

import { ApiClient, queryString, RequestRecord } from "./api.js";
import {
  BrushRequest,
  DoiStats,
  Orbit,
  orbitToCamera,
  SummaryInfo,
} from "./model.js";

export interface ViewState {
  histDim: number;
  heatDims: [number, number];
  pcpAxes: number[];
  timeDim: number;
  timestep: number;
  gamma: number;
  lodThreshold: number | null;
  colorDim: number;
  orbit: Orbit;
  brushes: BrushRequest[];
}

export interface PanelPayload {
  path: string;
  bytes: ArrayBuffer;
}

export type PanelName = "histogram" | "heatmap" | "pcp" | "timehist" | "frame";

export const PANEL_NAMES: PanelName[] = [
  "histogram",
  "heatmap",
  "pcp",
  "timehist",
  "frame",
];

export function defaultState(info: SummaryInfo): ViewState {
  const m = info.dim_names.length;
  const scalarDims: number[] = [];
  for (let d = 0; d < m; d++) {
    if (d >= 3 || m <= 3) scalarDims.push(d);
  }
  const histDim = scalarDims[0] ?? 0;
  const second = scalarDims[1] ?? Math.min(1, m - 1);
  const lo = info.extents.map((e) => (e ? e[0] : 0));
  const hi = info.extents.map((e) => (e ? e[1] : 1));
  const center: [number, number, number] = [
    (lo[0] + hi[0]) / 2,
    (lo[1] + hi[1]) / 2,
    (lo[2] + hi[2]) / 2,
  ];
  const radius = Math.max(
    Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) / 2,
    1e-6,
  );
  return {
    histDim,
    heatDims: histDim < second ? [histDim, second] : [second, histDim],
    pcpAxes: scalarDims.slice(0, Math.max(2, Math.min(4, scalarDims.length))),
    timeDim: histDim,
    timestep: info.timestep,
    gamma: 4.0,
    lodThreshold: null,
    colorDim: m - 1,
    orbit: {
      center,
      distance: radius * 2.4,
      azimuth: 0.7,
      elevation: 0.45,
      width: 480,
      height: 360,
    },
    brushes: [],
  };
}

export function panelPath(name: PanelName, state: ViewState): string {
  switch (name) {
    case "histogram":
      return `/api/density1d${queryString({ dim: state.histDim, bins: 256 })}`;
    case "heatmap":
      return `/api/density2d${queryString({
        dims: `${state.heatDims[0]},${state.heatDims[1]}`,
        w: 160,
        h: 160,
      })}`;
    case "pcp":
      return `/api/pcp${queryString({ axes: state.pcpAxes.join(","), w: 480, h: 200 })}`;
    case "timehist":
      return `/api/timehist${queryString({ dim: state.timeDim, bins: 96 })}`;
    case "frame":
      return `/api/frame${queryString({
        camera: JSON.stringify(orbitToCamera(state.orbit)),
        gamma: state.gamma,
        color_dim: state.colorDim,
        format: "png",
      })}`;
  }
}

export class Controller {
  state: ViewState;
  readonly payloads = new Map<PanelName, PanelPayload>();
  private generation = 0;
  private inflight = new Map<PanelName, Promise<void>>();
  private listeners: ((name: PanelName) => void)[] = [];

  constructor(
    readonly api: ApiClient,
    readonly info: SummaryInfo,
    state?: ViewState,
  ) {
    this.state = state ?? defaultState(info);
  }

  onPanel(listener: (name: PanelName) => void): void {
    this.listeners.push(listener);
  }

  private async fetchPanel(name: PanelName, generation: number): Promise<void> {
    const path = panelPath(name, this.state);
    const bytes = await this.api.getRaw(path);
    if (generation !== this.generation) return; // stale response
    this.payloads.set(name, { path, bytes });
    for (const cb of this.listeners) cb(name);
  }

  /** Refresh the named panels (all by default), deduplicating in flight. */
  refresh(names: PanelName[] = PANEL_NAMES): Promise<void> {
    this.generation += 1;
    const generation = this.generation;
    const jobs = names.map((name) => {
      const job = this.fetchPanel(name, generation).finally(() => {
        if (this.inflight.get(name) === job) this.inflight.delete(name);
      });
      this.inflight.set(name, job);
      return job;
    });
    return Promise.all(jobs).then(() => undefined);
  }

  async brush(dim: number, a: number, b: number, mode: "and" | "or" = "and"): Promise<DoiStats> {
    const req: BrushRequest = { dim, a, b, mode };
    this.state.brushes.push(req);
    const stats = await this.api.post<DoiStats>("/api/brush", req);
    await this.refresh();
    return stats;
  }

  async clearBrushes(): Promise<DoiStats> {
    this.state.brushes = [];
    const stats = await this.api.delete<DoiStats>("/api/brush");
    await this.refresh();
    return stats;
  }

  async setTimestep(t: number): Promise<void> {
    await this.api.post("/api/timestep", { t });
    this.state.timestep = t;
    await this.refresh();
  }

  async setLod(threshold: number | null): Promise<void> {
    await this.api.post("/api/lod", { threshold });
    this.state.lodThreshold = threshold;
    await this.refresh(["histogram", "heatmap"]);
  }

  async setGamma(gamma: number): Promise<void> {
    this.state.gamma = gamma;
    await this.refresh(["frame"]);
  }

  async orbitBy(dAzimuth: number, dElevation: number): Promise<void> {
    const o = this.state.orbit;
    o.azimuth += dAzimuth;
    o.elevation = Math.max(-1.4, Math.min(1.4, o.elevation + dElevation));
    await this.refresh(["frame"]);
  }

  /** Byte snapshot of every panel, for replay/restore comparisons. */
  snapshot(): Map<PanelName, ArrayBuffer> {
    const out = new Map<PanelName, ArrayBuffer>();
    for (const [name, payload] of this.payloads) out.set(name, payload.bytes);
    return out;
  }

  requestLog(): RequestRecord[] {
    return this.api.log.map((r) => ({ ...r }));
  }
}

export function buffersEqual(a: ArrayBuffer, b: ArrayBuffer): boolean {
  if (a.byteLength !== b.byteLength) return false;
  const va = new Uint8Array(a);
  const vb = new Uint8Array(b);
  for (let i = 0; i < va.length; i++) {
    if (va[i] !== vb[i]) return false;
  }
  return true;
}

export function snapshotsEqual(
  a: Map<PanelName, ArrayBuffer>,
  b: Map<PanelName, ArrayBuffer>,
): boolean {
  if (a.size !== b.size) return false;
  for (const [name, bytes] of a) {
    const other = b.get(name);
    if (!other || !buffersEqual(bytes, other)) return false;
  }
  return true;
}
