/** DOM panels: each one paints exactly one API payload onto a canvas.
 *
 * Brushing: horizontal drag on the histogram or the time histogram posts a
 * value-range brush; a rectangle drag on the heatmap posts one brush per
 * dimension (combined server-side with "and"). The spatial panel shows the
 * server-rendered frame and orbits on drag.
 */

import { Controller, PanelName } from "./controller.js";
import { gridToRgba } from "./colormap.js";
import { Density1d, Density2d, PcpImage, TimeHist } from "./model.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  parent?.appendChild(node);
  return node;
}

function decodeJson<T>(bytes: ArrayBuffer): T {
  return JSON.parse(new TextDecoder().decode(bytes)) as T;
}

interface DragRange {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

function trackDrag(
  canvas: HTMLCanvasElement,
  onMove: (r: DragRange) => void,
  onDone: (r: DragRange) => void,
): void {
  let start: [number, number] | null = null;
  canvas.addEventListener("pointerdown", (ev) => {
    start = [ev.offsetX, ev.offsetY];
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (start) onMove({ x0: start[0], x1: ev.offsetX, y0: start[1], y1: ev.offsetY });
  });
  canvas.addEventListener("pointerup", (ev) => {
    if (!start) return;
    const range = { x0: start[0], x1: ev.offsetX, y0: start[1], y1: ev.offsetY };
    start = null;
    onDone(range);
  });
}

abstract class Panel {
  readonly root: HTMLElement;
  protected readonly canvas: HTMLCanvasElement;
  protected readonly ctx: CanvasRenderingContext2D;

  constructor(
    protected readonly controller: Controller,
    readonly name: PanelName,
    title: string,
    width: number,
    height: number,
  ) {
    this.root = el("div", "panel");
    el("h3", undefined, this.root).textContent = title;
    this.canvas = el("canvas", undefined, this.root);
    this.canvas.width = width;
    this.canvas.height = height;
    this.ctx = this.canvas.getContext("2d")!;
    controller.onPanel((changed) => {
      if (changed === this.name) this.paint();
    });
  }

  protected payload(): ArrayBuffer | undefined {
    return this.controller.payloads.get(this.name)?.bytes;
  }

  abstract paint(): void;
}

export class HistogramPanel extends Panel {
  private overlay: [number, number] | null = null;

  constructor(controller: Controller) {
    super(controller, "histogram", "density", 360, 180);
    trackDrag(
      this.canvas,
      (r) => {
        this.overlay = [r.x0, r.x1];
        this.paint();
      },
      (r) => {
        this.overlay = null;
        const doc = this.doc();
        if (!doc || Math.abs(r.x1 - r.x0) < 2) return;
        const [lo, hi] = doc.extent;
        const toVal = (x: number) => lo + (x / this.canvas.width) * (hi - lo);
        const a = toVal(Math.min(r.x0, r.x1));
        const b = toVal(Math.max(r.x0, r.x1));
        void this.controller.brush(doc.dim, a, b);
      },
    );
  }

  private doc(): Density1d | undefined {
    const bytes = this.payload();
    return bytes ? decodeJson<Density1d>(bytes) : undefined;
  }

  paint(): void {
    const doc = this.doc();
    const { width, height } = this.canvas;
    this.ctx.clearRect(0, 0, width, height);
    if (!doc) return;
    const max = Math.max(...doc.values, 1e-300);
    this.ctx.beginPath();
    this.ctx.moveTo(0, height);
    doc.values.forEach((v, i) => {
      const x = (i / (doc.values.length - 1)) * width;
      this.ctx.lineTo(x, height - (v / max) * (height - 8));
    });
    this.ctx.lineTo(width, height);
    this.ctx.closePath();
    this.ctx.fillStyle = "#4d7bd0";
    this.ctx.fill();
    if (this.overlay) {
      const [x0, x1] = this.overlay;
      this.ctx.fillStyle = "rgba(220, 80, 60, 0.3)";
      this.ctx.fillRect(Math.min(x0, x1), 0, Math.abs(x1 - x0), height);
    }
  }
}

export class HeatmapPanel extends Panel {
  constructor(controller: Controller) {
    super(controller, "heatmap", "2D density", 320, 320);
    trackDrag(
      this.canvas,
      () => undefined,
      (r) => {
        const doc = this.doc();
        if (!doc || Math.abs(r.x1 - r.x0) < 2 || Math.abs(r.y1 - r.y0) < 2) return;
        const [[xlo, xhi], [ylo, yhi]] = doc.extent;
        const xa = xlo + (Math.min(r.x0, r.x1) / this.canvas.width) * (xhi - xlo);
        const xb = xlo + (Math.max(r.x0, r.x1) / this.canvas.width) * (xhi - xlo);
        // canvas rows run top-down, grid rows bottom-up
        const ya = ylo + (1 - Math.max(r.y0, r.y1) / this.canvas.height) * (yhi - ylo);
        const yb = ylo + (1 - Math.min(r.y0, r.y1) / this.canvas.height) * (yhi - ylo);
        void this.controller
          .brush(doc.dims[0], xa, xb)
          .then(() => this.controller.brush(doc.dims[1], ya, yb));
      },
    );
  }

  private doc(): Density2d | undefined {
    const bytes = this.payload();
    return bytes ? decodeJson<Density2d>(bytes) : undefined;
  }

  paint(): void {
    const doc = this.doc();
    if (!doc) return;
    const rgba = gridToRgba(doc.values, doc.width, doc.height, 60);
    const image = new ImageData(rgba, doc.width, doc.height);
    // draw off-screen, then flip vertically so low values sit at the bottom
    const tmp = document.createElement("canvas");
    tmp.width = doc.width;
    tmp.height = doc.height;
    tmp.getContext("2d")!.putImageData(image, 0, 0);
    this.ctx.save();
    this.ctx.imageSmoothingEnabled = false;
    this.ctx.scale(1, -1);
    this.ctx.drawImage(tmp, 0, -this.canvas.height, this.canvas.width, this.canvas.height);
    this.ctx.restore();
  }
}

export class PcpPanel extends Panel {
  constructor(controller: Controller) {
    super(controller, "pcp", "parallel coordinates", 480, 200);
  }

  paint(): void {
    const bytes = this.payload();
    if (!bytes) return;
    const doc = decodeJson<PcpImage>(bytes);
    const rgba = gridToRgba(doc.values, doc.width, doc.height, 60);
    const image = new ImageData(rgba, doc.width, doc.height);
    const tmp = document.createElement("canvas");
    tmp.width = doc.width;
    tmp.height = doc.height;
    tmp.getContext("2d")!.putImageData(image, 0, 0);
    this.ctx.save();
    this.ctx.imageSmoothingEnabled = false;
    this.ctx.scale(1, -1);
    this.ctx.drawImage(tmp, 0, -this.canvas.height, this.canvas.width, this.canvas.height);
    this.ctx.restore();
    this.ctx.strokeStyle = "rgba(255,255,255,0.6)";
    doc.panels.reduce((x, panel) => {
      this.ctx.beginPath();
      this.ctx.moveTo(x + 0.5, 0);
      this.ctx.lineTo(x + 0.5, this.canvas.height);
      this.ctx.stroke();
      return x + (panel.width / doc.width) * this.canvas.width;
    }, 0);
  }
}

export class TimeHistPanel extends Panel {
  constructor(controller: Controller) {
    super(controller, "timehist", "time histogram", 480, 140);
    trackDrag(
      this.canvas,
      () => undefined,
      (r) => {
        const bytes = this.payload();
        if (!bytes || Math.abs(r.x1 - r.x0) < 2) return;
        const doc = decodeJson<TimeHist>(bytes);
        const [lo, hi] = doc.extent;
        const a = lo + (Math.min(r.x0, r.x1) / this.canvas.width) * (hi - lo);
        const b = lo + (Math.max(r.x0, r.x1) / this.canvas.width) * (hi - lo);
        void this.controller.brush(doc.dim, a, b);
      },
    );
  }

  paint(): void {
    const bytes = this.payload();
    if (!bytes) return;
    const doc = decodeJson<TimeHist>(bytes);
    const flat = doc.rows.flat();
    const rgba = gridToRgba(flat, doc.bins, doc.timesteps, 30);
    const image = new ImageData(rgba, doc.bins, doc.timesteps);
    const tmp = document.createElement("canvas");
    tmp.width = doc.bins;
    tmp.height = doc.timesteps;
    tmp.getContext("2d")!.putImageData(image, 0, 0);
    this.ctx.imageSmoothingEnabled = false;
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    this.ctx.drawImage(tmp, 0, 0, this.canvas.width, this.canvas.height);
    // highlight the current timestep row
    const rowH = this.canvas.height / doc.timesteps;
    this.ctx.strokeStyle = "rgba(255, 80, 60, 0.9)";
    this.ctx.strokeRect(0, this.controller.state.timestep * rowH, this.canvas.width, rowH);
  }
}

export class FramePanel extends Panel {
  constructor(controller: Controller) {
    super(controller, "frame", "spatial view", 480, 360);
    let last: [number, number] | null = null;
    this.canvas.addEventListener("pointerdown", (ev) => {
      last = [ev.offsetX, ev.offsetY];
      this.canvas.setPointerCapture(ev.pointerId);
    });
    this.canvas.addEventListener("pointerup", () => {
      last = null;
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!last) return;
      const [dx, dy] = [ev.offsetX - last[0], ev.offsetY - last[1]];
      last = [ev.offsetX, ev.offsetY];
      void this.controller.orbitBy(-dx * 0.01, dy * 0.01);
    });
  }

  paint(): void {
    const bytes = this.payload();
    if (!bytes) return;
    const blob = new Blob([bytes], { type: "image/png" });
    createImageBitmap(blob).then((bmp) => {
      this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
      this.ctx.drawImage(bmp, 0, 0, this.canvas.width, this.canvas.height);
    });
  }
}

export function buildPanels(controller: Controller, root: HTMLElement): Panel[] {
  const panels = [
    new HistogramPanel(controller),
    new HeatmapPanel(controller),
    new PcpPanel(controller),
    new TimeHistPanel(controller),
    new FramePanel(controller),
  ];
  for (const p of panels) root.appendChild(p.root);
  return panels;
}
