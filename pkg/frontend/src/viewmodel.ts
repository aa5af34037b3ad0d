// Pure view-model helpers: server JSON in, display strings/SVG out.
// Nothing here talks to the network or the DOM, so it all unit-tests cleanly.

import type {
  FileAnalysis,
  PassRow,
  Report,
  SlotInfo,
  StateSnapshot,
} from "./api.js";

export interface TraceSample {
  epoch_s: number;
  t1_c: number;
  t2_c: number;
  ambient_c: number;
}

export function formatEpoch(epochS: number): string {
  const day = Math.floor(epochS / 86_400);
  const rem = epochS % 86_400;
  const h = String(Math.floor(rem / 3600)).padStart(2, "0");
  const m = String(Math.floor((rem % 3600) / 60)).padStart(2, "0");
  const s = String(rem % 60).padStart(2, "0");
  return `day ${day} ${h}:${m}:${s}`;
}

export function formatCountdown(seconds: number): string {
  if (seconds <= 0) return "now";
  if (seconds < 90) return `${Math.round(seconds)} s`;
  if (seconds < 5400) return `${(seconds / 60).toFixed(1)} min`;
  return `${(seconds / 3600).toFixed(1)} h`;
}

export function payloadStatus(state: StateSnapshot): string {
  if (state.running) {
    return `running ${state.running.profile_id} (${state.running.phase})`;
  }
  return "idle";
}

export function downlinkPercent(slot: SlotInfo | null): number | null {
  if (!slot || slot.frames_total === 0) return null;
  return Math.floor((100 * slot.frames_acked) / slot.frames_total);
}

export interface PassView {
  label: string;
  countdown: string;
  active: boolean;
  maxElevation: string;
}

export function passViews(passes: PassRow[], epochS: number): PassView[] {
  return passes.map((p) => ({
    label: `${formatEpoch(p.aos_epoch_s)} for ${p.duration_s} s`,
    countdown: p.aos_epoch_s <= epochS ? "in progress" : formatCountdown(p.aos_epoch_s - epochS),
    active: p.aos_epoch_s <= epochS && epochS < p.los_epoch_s,
    maxElevation: `${p.max_elevation_deg.toFixed(1)} deg`,
  }));
}

export function pushTrace(
  trace: TraceSample[], state: StateSnapshot, cap = 600,
): TraceSample[] {
  const last = trace[trace.length - 1];
  if (last && last.epoch_s === state.epoch_s) return trace;
  const next = trace.concat({
    epoch_s: state.epoch_s,
    t1_c: state.thermal.t1_c,
    t2_c: state.thermal.t2_c,
    ambient_c: state.thermal.ambient_c,
  });
  return next.length > cap ? next.slice(next.length - cap) : next;
}

export function commandNotice(status: number, detail: string, commandId?: string): string {
  if (status === 201) return `queued ${commandId ?? ""}`.trim();
  if (status === 409) return `payload busy: ${detail}`;
  if (status === 422) return `rejected: ${detail}`;
  return `error ${status}: ${detail}`;
}

export function describeAnalysis(a: FileAnalysis): string[] {
  const lines = [
    `file ${a.file_id}, profile ${a.profile_id}, day ${a.elapsed_days.toFixed(1)}`,
  ];
  if (a.dark_cps) {
    lines.push(
      `dark rates ${a.dark_cps.arm1.toFixed(0)} / ${a.dark_cps.arm2.toFixed(0)} cps`,
    );
  }
  if (a.fit) {
    lines.push(`scanned arm: ${a.scanned_arm ?? "signal"}`);
    lines.push(
      `singles ${a.mean_s1_cps?.toFixed(0)} / ${a.mean_s2_cps?.toFixed(0)} cps, ` +
        `pairs ${a.corrected_coinc_cps?.toFixed(1)} cps after background subtraction`,
    );
    lines.push(
      `visibility ${a.fit.visibility.toFixed(4)} ± ${a.fit.sigma_visibility.toFixed(4)}` +
        ` at θ₀ ${a.fit.theta0_deg.toFixed(1)} deg`,
    );
  } else {
    lines.push("dark-count run: no correlation fit");
  }
  return lines;
}

// --- SVG charts ------------------------------------------------------------
// Plain strings so the renderer stays a dumb innerHTML sink.

function scaleLinear(domain: [number, number], range: [number, number]) {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const k = d1 === d0 ? 0 : (r1 - r0) / (d1 - d0);
  return (x: number) => r0 + (x - d0) * k;
}

export function correlationChartSvg(a: FileAnalysis, width = 560, height = 300): string {
  if (!a.fit || !a.scan || !a.fit_curve) {
    return `<svg width="${width}" height="${height}"><text x="16" y="24">no fit for this file</text></svg>`;
  }
  const rates = a.scan.corrected_counts.map((c, i) => c / a.scan!.seconds[i]);
  const model = a.fit_curve.model_cps;
  const yMax = Math.max(...rates, ...model) * 1.1 + 1;
  const yMin = Math.min(0, ...rates, ...model);
  const x = scaleLinear([0, 360], [40, width - 12]);
  const y = scaleLinear([yMin, yMax], [height - 28, 12]);

  const curve = a.fit_curve.angle_deg
    .map((ang, i) => `${x(ang).toFixed(1)},${y(model[i]).toFixed(1)}`)
    .join(" ");
  const points = a.scan.angle_deg
    .map((ang, i) => `<circle cx="${x(ang).toFixed(1)}" cy="${y(rates[i]).toFixed(1)}" r="3.5" class="pt"/>`)
    .join("");
  const axis =
    `<line x1="40" y1="${y(0)}" x2="${width - 12}" y2="${y(0)}" class="axis"/>` +
    `<line x1="40" y1="12" x2="40" y2="${height - 28}" class="axis"/>` +
    [0, 90, 180, 270, 360]
      .map((t) => `<text x="${x(t)}" y="${height - 8}" class="tick">${t}°</text>`)
      .join("");
  return (
    `<svg viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    `${axis}<polyline points="${curve}" class="fit"/>` +
    `${points}</svg>`
  );
}

export function trendChartSvg(report: Report, width = 560, height = 200): string {
  const darkFiles = report.files.filter((f) => f.dark_cps);
  if (darkFiles.length === 0) {
    return `<svg width="${width}" height="${height}"><text x="16" y="24">no dark data yet</text></svg>`;
  }
  const days = darkFiles.map((f) => f.elapsed_days);
  const values = darkFiles.flatMap((f) => [f.dark_cps!.arm1, f.dark_cps!.arm2]);
  const x = scaleLinear([Math.min(0, ...days), Math.max(...days) + 1], [40, width - 12]);
  const y = scaleLinear([0, Math.max(...values) * 1.15 + 1], [height - 24, 10]);
  const marks = darkFiles
    .map(
      (f) =>
        `<circle cx="${x(f.elapsed_days).toFixed(1)}" cy="${y(f.dark_cps!.arm1).toFixed(1)}" r="4" class="arm1"/>` +
        `<circle cx="${x(f.elapsed_days).toFixed(1)}" cy="${y(f.dark_cps!.arm2).toFixed(1)}" r="4" class="arm2"/>`,
    )
    .join("");
  let trendLines = "";
  if (report.dark_trend) {
    for (const [arm, t] of Object.entries(report.dark_trend)) {
      const d0 = Math.min(...days);
      const d1 = Math.max(...days);
      trendLines +=
        `<line x1="${x(d0)}" y1="${y(t.intercept_cps + t.slope_cps_per_day * d0)}" ` +
        `x2="${x(d1)}" y2="${y(t.intercept_cps + t.slope_cps_per_day * d1)}" class="trend ${arm}"/>`;
    }
  }
  return (
    `<svg viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    `<line x1="40" y1="${height - 24}" x2="${width - 12}" y2="${height - 24}" class="axis"/>` +
    `${trendLines}${marks}</svg>`
  );
}

export function thermalChartSvg(trace: TraceSample[], width = 560, height = 180): string {
  if (trace.length < 2) {
    return `<svg width="${width}" height="${height}"><text x="16" y="24">collecting samples...</text></svg>`;
  }
  const x = scaleLinear([trace[0].epoch_s, trace[trace.length - 1].epoch_s], [40, width - 12]);
  const y = scaleLinear([-5, 30], [height - 20, 10]);
  const line = (pick: (s: TraceSample) => number, cls: string) =>
    `<polyline class="${cls}" points="${trace
      .map((s) => `${x(s.epoch_s).toFixed(1)},${y(pick(s)).toFixed(1)}`)
      .join(" ")}"/>`;
  return (
    `<svg viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    line((s) => s.ambient_c, "ambient") +
    line((s) => s.t1_c, "t1") +
    line((s) => s.t2_c, "t2") +
    `</svg>`
  );
}
