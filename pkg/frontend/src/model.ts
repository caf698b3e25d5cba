/** JSON shapes of the mixvis HTTP API (see docs/formats.md). */

export interface AttributeInfo {
  name: string;
  kind: "position" | "vector" | "scalar";
  components: number;
}

export interface SummaryInfo {
  attributes: AttributeInfo[];
  dim_names: string[];
  cluster_count: number;
  n_total: number;
  extents: ([number, number] | null)[];
  mean_wasserstein: number;
  timesteps: number;
  timestep: number;
  has_raw: boolean;
  lod_threshold: number | null;
  mean_doi: number;
  min_doi: number;
  max_doi: number;
  n_brushes: number;
}

export interface Density1d {
  dim: number;
  extent: [number, number];
  values: number[];
}

export interface Density2d {
  dims: [number, number];
  extent: [[number, number], [number, number]];
  width: number;
  height: number;
  values: number[];
}

export interface PcpPanel {
  dims: [number, number];
  width: number;
  extent_a: [number, number];
  extent_b: [number, number];
}

export interface PcpImage {
  axes: number[];
  width: number;
  height: number;
  values: number[];
  panels: PcpPanel[];
}

export interface TimeHist {
  dim: number;
  bins: number;
  timesteps: number;
  extent: [number, number];
  rows: number[][];
}

export interface DoiStats {
  mean_doi: number;
  min_doi: number;
  max_doi: number;
  n_brushes: number;
}

export interface BrushRequest {
  dim: number;
  a: number;
  b: number;
  mode: "and" | "or";
}

/** Orbit camera the spatial panel drives; converted to the server's camera JSON. */
export interface Orbit {
  center: [number, number, number];
  distance: number;
  azimuth: number;
  elevation: number;
  width: number;
  height: number;
}

export function orbitToCamera(o: Orbit): Record<string, unknown> {
  const ce = Math.cos(o.elevation);
  const eye = [
    o.center[0] + o.distance * ce * Math.cos(o.azimuth),
    o.center[1] + o.distance * ce * Math.sin(o.azimuth),
    o.center[2] + o.distance * Math.sin(o.elevation),
  ];
  return {
    eye,
    look_at: o.center,
    up: [0, 0, 1],
    fov_deg: 45,
    width: o.width,
    height: o.height,
  };
}
