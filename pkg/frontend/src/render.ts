// Thin DOM sink: ConsoleView in, innerHTML out.

import type { ConsoleView } from "./controller.js";
import {
  correlationChartSvg,
  describeAnalysis,
  downlinkPercent,
  formatEpoch,
  passViews,
  payloadStatus,
  thermalChartSvg,
  trendChartSvg,
} from "./viewmodel.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function render(view: ConsoleView, root: Document): void {
  const el = (id: string) => root.getElementById(id)!;

  el("banner").hidden = !view.unreachable;
  const s = view.snapshot;
  if (!s) return;

  el("epoch").textContent = formatEpoch(s.epoch_s);
  el("clock-rate").textContent = s.clock_rate > 0 ? `${s.clock_rate} s/s` : "paused";
  el("payload-status").textContent = payloadStatus(s);
  el("pass-indicator").textContent = s.in_pass ? "in pass" : "no contact";
  el("pass-indicator").className = s.in_pass ? "on" : "off";

  const pct = downlinkPercent(s.slot);
  el("slot").innerHTML = s.slot
    ? `file ${s.slot.file_id} (${esc(s.slot.profile_id)}) awaiting downlink ` +
      `<progress max="100" value="${pct ?? 0}"></progress> ${pct ?? 0}%`
    : "empty";
  el("queues").textContent =
    `ground ${s.ground_queue.length ? s.ground_queue.join(", ") : "none"} | ` +
    `onboard ${s.onboard_queue.length ? s.onboard_queue.join(", ") : "none"}`;

  el("passes").innerHTML = passViews(view.passes, s.epoch_s)
    .map(
      (p) =>
        `<tr class="${p.active ? "active" : ""}"><td>${esc(p.label)}</td>` +
        `<td>${esc(p.countdown)}</td><td>${esc(p.maxElevation)}</td></tr>`,
    )
    .join("");

  el("thermal-chart").innerHTML = thermalChartSvg(view.trace);
  el("notice").textContent = view.notice;

  el("profile-select").innerHTML = view.profiles
    .map((p) => {
      const label =
        `${p.id} - heat ${p.heating_min}m dark ${p.dark_min}m expt ${p.expt_min}m, ` +
        `${p.pump_mode === "off" ? "pump off" : `${p.pump_power_mw} mW`}` +
        `${p.rotated_arm === "idler" ? ", rotates idler" : ""}`;
      return `<option value="${p.id}">${esc(label)}</option>`;
    })
    .join("");

  el("files").innerHTML = view.files
    .map(
      (f) =>
        `<button class="file ${view.selectedFileId === f.file_id ? "selected" : ""}" ` +
        `data-file="${f.file_id}">file ${f.file_id} ${esc(f.profile_id ?? "?")}` +
        `${f.has_fit ? " ✓fit" : " (dark)"}</button>`,
    )
    .join("") || "no downlinked files yet";

  const a = view.selectedAnalysis;
  if (a) {
    el("analysis-text").innerHTML = describeAnalysis(a)
      .map((line) => `<div>${esc(line)}</div>`)
      .join("");
    el("correlation-chart").innerHTML = correlationChartSvg(a);
  } else {
    el("analysis-text").textContent = "select a downlinked file";
    el("correlation-chart").innerHTML = "";
  }
  el("trend-chart").innerHTML = view.report ? trendChartSvg(view.report) : "";
}
