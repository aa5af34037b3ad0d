// Console state machine: polls /state keyed on the server's state_version
// and refetches dependent resources only when that version moves.  All
// mission mutations are single API calls routed through here; the view
// renders only what the server acknowledged.

import {
  ApiError,
  OpsClient,
  type CommandWhen,
  type FileAnalysis,
  type FileRow,
  type PassRow,
  type ProfileRow,
  type Report,
  type StateSnapshot,
} from "./api.js";
import { pushTrace, type TraceSample } from "./viewmodel.js";

export interface ConsoleView {
  snapshot: StateSnapshot | null;
  unreachable: boolean;
  passes: PassRow[];
  profiles: ProfileRow[];
  files: FileRow[];
  selectedFileId: number | null;
  selectedAnalysis: FileAnalysis | null;
  report: Report | null;
  trace: TraceSample[];
  notice: string;
}

export class ConsoleController {
  readonly view: ConsoleView = {
    snapshot: null,
    unreachable: false,
    passes: [],
    profiles: [],
    files: [],
    selectedFileId: null,
    selectedAnalysis: null,
    report: null,
    trace: [],
    notice: "",
  };

  private lastVersion = -1;
  private onChange: (view: ConsoleView) => void;

  constructor(private readonly client: OpsClient, onChange?: (view: ConsoleView) => void) {
    this.onChange = onChange ?? (() => undefined);
  }

  private emit(): void {
    this.onChange(this.view);
  }

  async bootstrap(): Promise<void> {
    this.view.profiles = await this.client.profiles();
    await this.poll();
  }

  /** One poll cycle; refetches passes/files only when state_version moved. */
  async poll(): Promise<ConsoleView> {
    let snapshot: StateSnapshot;
    try {
      snapshot = await this.client.state();
    } catch {
      this.view.unreachable = true;
      this.emit();
      return this.view;
    }
    this.view.unreachable = false;
    this.view.snapshot = snapshot;
    this.view.trace = pushTrace(this.view.trace, snapshot);
    if (snapshot.state_version !== this.lastVersion) {
      this.lastVersion = snapshot.state_version;
      this.view.passes = await this.client.passes(6);
      const files = await this.client.files();
      const grew = files.length > this.view.files.length;
      this.view.files = files;
      if (files.length > 0) {
        this.view.report = await this.client.report().catch(() => null);
      }
      if (grew && this.view.selectedFileId === null) {
        await this.selectFile(files[files.length - 1].file_id);
      } else if (this.view.selectedFileId !== null) {
        this.view.selectedAnalysis = await this.client
          .analysis(this.view.selectedFileId)
          .catch(() => null);
      }
    }
    this.emit();
    return this.view;
  }

  async selectFile(fileId: number): Promise<void> {
    try {
      this.view.selectedAnalysis = await this.client.analysis(fileId);
      this.view.selectedFileId = fileId;
    } catch (err) {
      this.view.notice = err instanceof ApiError
        ? `analysis ${fileId}: ${err.status} ${err.message}`
        : String(err);
    }
    this.emit();
  }

  /** Queue a run-profile command; the notice reflects only the server's answer. */
  async queueProfile(profile: string, when: CommandWhen): Promise<boolean> {
    try {
      const ack = await this.client.queueProfile(profile, when);
      this.view.notice = `queued ${ack.command_id}`;
      await this.poll();
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.view.notice = err.status === 409
          ? `payload busy: ${err.message}`
          : `rejected (${err.status}): ${err.message}`;
      } else {
        this.view.notice = String(err);
        this.view.unreachable = true;
      }
      this.emit();
      return false;
    }
  }

  async setClockRate(rate: number): Promise<void> {
    try {
      const ack = await this.client.setClockRate(rate);
      this.view.notice = `clock rate ${ack.clock_rate} s/s`;
      await this.poll();
    } catch (err) {
      this.view.notice = err instanceof ApiError ? err.message : String(err);
      this.emit();
    }
  }

  async stepClock(seconds: number): Promise<void> {
    try {
      await this.client.stepClock(seconds);
      await this.poll();
    } catch (err) {
      this.view.notice = err instanceof ApiError ? err.message : String(err);
      this.emit();
    }
  }
}
