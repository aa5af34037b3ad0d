// Typed client for the mission operations API. Every mutation is one POST;
// the console never computes physics, it only renders what these calls return.

export interface ThermalSnapshot {
  ambient_c: number;
  payload_c: number;
  t1_c: number;
  t2_c: number;
}

export interface RunningInfo {
  profile_id: string;
  phase: string;
  start_epoch_s: number;
  end_epoch_s: number;
}

export interface SlotInfo {
  file_id: number;
  profile_id: string;
  frames_acked: number;
  frames_total: number;
}

export interface StateSnapshot {
  epoch_s: number;
  state_version: number;
  thermal: ThermalSnapshot;
  running: RunningInfo | null;
  in_pass: boolean;
  ground_queue: string[];
  onboard_queue: string[];
  slot: SlotInfo | null;
  archived_files: number[];
  event_count: number;
  clock_rate: number;
}

export interface PassRow {
  aos_epoch_s: number;
  los_epoch_s: number;
  duration_s: number;
  max_elevation_deg: number;
}

export interface ProfileRow {
  id: string;
  heating_min: number;
  dark_min: number;
  expt_min: number;
  pump_mode: string;
  pump_setting: number;
  pump_power_mw: number;
  memory: string;
  turn_on_c: number | null;
  rotated_arm: string;
  hv_variant: boolean;
}

export interface FileRow {
  file_id: number;
  profile_id: string | null;
  run_count: number | null;
  has_fit: boolean;
}

export interface FitInfo {
  mean_rate_cps: number;
  amp_cos_cps: number;
  amp_sin_cps: number;
  visibility: number;
  sigma_visibility: number;
  theta0_deg: number;
  sigma_theta_deg: number | null;
  chi2_per_dof: number;
}

export interface ScanTable {
  angle_deg: number[];
  seconds: number[];
  s1_counts: number[];
  s2_counts: number[];
  coinc_counts: number[];
  corrected_counts: number[];
  variance_counts: number[];
}

export interface FileAnalysis {
  file_id: number;
  profile_id: string;
  start_epoch_s: number;
  elapsed_days: number;
  bias_mv: number;
  dark_records: number;
  run_count: number;
  dark_cps?: { arm1: number; arm2: number };
  scanned_arm?: string;
  valid_runs?: number;
  mean_s1_cps?: number;
  mean_s2_cps?: number;
  mean_coinc_cps?: number;
  corrected_coinc_cps?: number;
  fit: FitInfo | null;
  scan?: ScanTable;
  fit_curve?: { angle_deg: number[]; model_cps: number[] };
}

export interface TrendInfo {
  slope_cps_per_day: number;
  intercept_cps: number;
  stderr_slope: number;
  excess_cps: number;
  flagged: boolean;
}

export interface Report {
  files: FileAnalysis[];
  dark_trend: { [arm: string]: TrendInfo } | null;
}

export type CommandWhen = "next_window" | { day: number } | { epoch_s: number };

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = typeof fetch;

async function parse<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
  }
  return body as T;
}

export class OpsClient {
  constructor(readonly base: string, private readonly fetchFn: FetchLike = fetch) {}

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(this.base + path).then((r) => parse<T>(r));
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    }).then((r) => parse<T>(r));
  }

  state(): Promise<StateSnapshot> {
    return this.get("/state");
  }

  passes(n: number): Promise<PassRow[]> {
    return this.get<{ passes: PassRow[] }>(`/passes?n=${n}`).then((d) => d.passes);
  }

  profiles(): Promise<ProfileRow[]> {
    return this.get<{ profiles: ProfileRow[] }>("/profiles").then((d) => d.profiles);
  }

  files(): Promise<FileRow[]> {
    return this.get<{ files: FileRow[] }>("/files").then((d) => d.files);
  }

  analysis(fileId: number): Promise<FileAnalysis> {
    return this.get(`/files/${fileId}/analysis`);
  }

  report(): Promise<Report> {
    return this.get("/report");
  }

  queueProfile(profile: string, when: CommandWhen, id?: string): Promise<{ command_id: string }> {
    const body: Record<string, unknown> = { profile, when };
    if (id) body.id = id;
    return this.post("/commands", body);
  }

  setClockRate(rate: number): Promise<{ clock_rate: number }> {
    return this.post("/clock", { rate });
  }

  stepClock(seconds: number): Promise<{ epoch_s: number }> {
    return this.post("/clock", { step_seconds: seconds });
  }
}
