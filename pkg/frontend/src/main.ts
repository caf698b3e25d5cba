/** Bootstrap: load the summary manifest, build the linked panels and the
 * control strip (dim selectors, timestep, gamma, LOD, clear-brush). */

import { ApiClient } from "./api.js";
import { Controller } from "./controller.js";
import { buildPanels } from "./panels.js";
import { SummaryInfo } from "./model.js";

function option(select: HTMLSelectElement, value: string, label: string): void {
  const node = document.createElement("option");
  node.value = value;
  node.textContent = label;
  select.appendChild(node);
}

async function boot(): Promise<void> {
  const root = document.getElementById("app")!;
  const api = new ApiClient("");
  let info: SummaryInfo;
  try {
    info = await api.getJson<SummaryInfo>("/api/summary");
  } catch (err) {
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = `failed to reach the mixvis service: ${err}`;
    root.appendChild(banner);
    return;
  }
  const controller = new Controller(api, info);

  const bar = document.createElement("div");
  bar.className = "controls";
  root.appendChild(bar);

  const dimSelect = document.createElement("select");
  info.dim_names.forEach((name, d) => option(dimSelect, String(d), name));
  dimSelect.value = String(controller.state.histDim);
  dimSelect.addEventListener("change", () => {
    controller.state.histDim = Number(dimSelect.value);
    controller.state.timeDim = Number(dimSelect.value);
    void controller.refresh(["histogram", "timehist"]);
  });
  bar.append("dim ", dimSelect);

  const clear = document.createElement("button");
  clear.textContent = "clear brushes";
  clear.addEventListener("click", () => void controller.clearBrushes());
  bar.appendChild(clear);

  const gamma = document.createElement("input");
  gamma.type = "range";
  gamma.min = "0.5";
  gamma.max = "40";
  gamma.step = "0.5";
  gamma.value = String(controller.state.gamma);
  gamma.addEventListener("change", () => void controller.setGamma(Number(gamma.value)));
  bar.append(" opacity γ ", gamma);

  if (info.timesteps > 1) {
    const tSlider = document.createElement("input");
    tSlider.type = "range";
    tSlider.min = "0";
    tSlider.max = String(info.timesteps - 1);
    tSlider.step = "1";
    tSlider.value = String(info.timestep);
    tSlider.addEventListener("change", () => void controller.setTimestep(Number(tSlider.value)));
    bar.append(" timestep ", tSlider);
  }

  if (info.has_raw) {
    const lod = document.createElement("input");
    lod.type = "checkbox";
    lod.addEventListener("change", () =>
      void controller.setLod(lod.checked ? 0.5 : null),
    );
    bar.append(" raw detail (doi ≥ 0.5) ", lod);
  }

  const status = document.createElement("span");
  status.className = "status";
  bar.appendChild(status);
  controller.onPanel(() => {
    status.textContent = ` ${info.cluster_count} clusters | ${info.n_total} samples`;
  });

  const grid = document.createElement("div");
  grid.className = "grid";
  root.appendChild(grid);
  buildPanels(controller, grid);
  await controller.refresh();
}

void boot();
