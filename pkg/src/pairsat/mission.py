"""Deterministic mission event loop binding environment, payload and link.

Time is integer seconds since launch.  The loop is event-driven: between
discrete events (pass boundaries, command dispatch, profile completion) the
thermal state fast-forwards in one vectorized jump, and downlink frames
complete at fixed absolute times inside pass windows, so advancing the clock
in one call or in many produces identical state.  A profile executes
atomically when dispatched; its phase changes, heater toggles and
temperatures are then replayed against the clock so observers see them at
the right times.  The radio is idle while the payload operates: uplink and
downlink defer to the next pass time after the run completes.

Everything stochastic draws from named substreams of the one mission seed
("counts", "mode-hops", "channel"), so added draws in one subsystem never
perturb another.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from . import environment as env
from . import payload as pl
from . import telemetry as tm
from .config import MissionConfig
from .onboard_file import OnboardFile, decode_file, encode_file


class CommandError(ValueError):
    pass


def substream(seed: int, name: str) -> np.random.Generator:
    """Named, independent random stream derived from the mission seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


@dataclass(frozen=True)
class Command:
    command_id: str
    profile_id: int
    when_epoch_s: int | None = None  # None: run at the next uplink window
    kind: str = "run_profile"


def parse_schedule(text: str) -> list[Command]:
    """Parse a JSON command schedule.

    Each entry: {"id": str, "profile": "0x10", "when": {"day": 36} |
    {"epoch_s": 3110400} | "next_window"}.
    """
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CommandError(f"schedule is not valid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise CommandError("schedule must be a JSON list")
    out = []
    for k, row in enumerate(rows):
        try:
            pid = row["profile"]
            pid = int(pid, 16) if isinstance(pid, str) else int(pid)
            when = row.get("when", "next_window")
            if when == "next_window":
                epoch = None
            elif "epoch_s" in when:
                epoch = int(when["epoch_s"])
            elif "day" in when:
                epoch = int(round(float(when["day"]) * 86_400))
            else:
                raise KeyError("when")
            out.append(Command(row.get("id", f"cmd-{k + 1}"), pid, epoch))
        except (KeyError, TypeError, ValueError) as exc:
            raise CommandError(f"malformed schedule row {k}: {row!r} ({exc})") from exc
    return out


@dataclass
class _UplinkedCommand:
    command: Command
    due_epoch_s: int


@dataclass
class _ActiveProfile:
    profile_id: int
    start_epoch_s: int
    end_epoch_s: int
    result: pl.ProfileResult
    sub_events: list[tuple[int, str, dict]]
    flushed: int = 0
    sample_pos: int = 0


@dataclass
class _Downlink:
    file_id: int
    wire: dict[int, bytes]
    total: int
    received: dict[int, tm.TelemetryFrame] = field(default_factory=dict)
    session: tm.DownlinkSession | None = None
    # per-burst transmission state
    desired: list[int] = field(default_factory=list)
    slot_idx: int = 0
    anchor_s: int = 0
    air_used_s: float = 0.0
    burst_los_s: int = 0
    in_burst: bool = False


class MissionRuntime:
    """Single-owner simulation core; all mutation goes through one driver."""

    def __init__(self, config: MissionConfig):
        self.config = config
        self.profiles = pl.default_profiles()
        self.config_hash = config.config_hash()
        self.epoch_s = 0
        self.state_version = 0
        self.thermal = env.initial_thermal_state(0, config.thermal, config.orbit)
        self.rng_counts = substream(config.seed, "counts")
        self.rng_hops = substream(config.seed, "mode-hops")
        self.rng_channel = substream(config.seed, "channel")

        self.event_log: list[dict] = []
        self.ground_queue: list[Command] = []
        self.onboard_queue: list[_UplinkedCommand] = []
        self._command_ids: set[str] = set()
        self.active: _ActiveProfile | None = None
        self.slot: tuple[int, OnboardFile, bytes] | None = None
        self.downlink: _Downlink | None = None
        self.next_file_id = 1
        self.archive_images: dict[int, bytes] = {}
        self.archive_analyses: dict[int, dict] = {}
        self.archive_sessions: dict[int, dict] = {}

        self._passes: list[env.Pass] = []
        self._pass_horizon_s = 0
        self._pass_log_idx = 0  # passes whose LOS is already logged
        self._aos_logged = False  # AOS of pass _pass_log_idx already logged

    # ------------------------------------------------------------------ log
    def _log(self, event: str, **fields) -> None:
        self.event_log.append({"t": self.epoch_s, "event": event, **fields})

    def _log_at(self, t: int, event: str, **fields) -> None:
        self.event_log.append({"t": t, "event": event, **fields})

    # ---------------------------------------------------------------- passes
    def _ensure_passes(self, until_s: int) -> None:
        while self._pass_horizon_s < until_s:
            chunk_end = self._pass_horizon_s + 4 * 86_400
            found = env.scan_passes(
                self._pass_horizon_s, chunk_end, self.config.orbit, self.config.station
            )
            # drop a pass clipped by the scan horizon; rescan it next chunk
            if found and found[-1].los_epoch_s >= chunk_end:
                chunk_end = found[-1].aos_epoch_s
                found = found[:-1]
            self._passes.extend(found)
            self._pass_horizon_s = chunk_end

    def pass_at(self, t: int) -> env.Pass | None:
        self._ensure_passes(t + 1)
        for p in self._passes:
            if p.aos_epoch_s <= t < p.los_epoch_s:
                return p
            if p.aos_epoch_s > t:
                break
        return None

    def next_passes(self, count: int, search_limit_s: int = 60 * 86_400) -> list[env.Pass]:
        self._ensure_passes(self.epoch_s + 4 * 86_400)
        out = [p for p in self._passes if p.los_epoch_s > self.epoch_s]
        while len(out) < count and self._pass_horizon_s < self.epoch_s + search_limit_s:
            self._ensure_passes(self._pass_horizon_s + 4 * 86_400)
            out = [p for p in self._passes if p.los_epoch_s > self.epoch_s]
        return out[:count]

    # -------------------------------------------------------------- commands
    def enqueue_command(self, command: Command) -> None:
        if command.kind != "run_profile":
            raise CommandError(f"unknown command kind {command.kind!r}")
        if command.command_id in self._command_ids:
            raise CommandError(f"duplicate command id {command.command_id!r}")
        if command.profile_id not in self.profiles:
            raise CommandError(f"unknown profile id 0x{command.profile_id:02X}")
        self._command_ids.add(command.command_id)
        self.ground_queue.append(command)
        self._log("command_queued", command_id=command.command_id,
                  profile_id=f"0x{command.profile_id:02X}",
                  when_epoch_s=command.when_epoch_s)
        self.state_version += 1

    # ------------------------------------------------------------- main loop
    def advance(self, seconds: int) -> None:
        if seconds < 0:
            raise ValueError("cannot run the mission clock backwards")
        self._run_until(self.epoch_s + int(seconds))
        self.state_version += 1

    def run_until(self, epoch_s: int) -> None:
        self._run_until(int(epoch_s))
        self.state_version += 1

    def _run_until(self, target_s: int) -> None:
        while True:
            self._process_instant()
            if self.epoch_s >= target_s:
                break
            nxt = self._next_event_epoch(target_s)
            self._progress_to(nxt)

    def _next_event_epoch(self, target_s: int) -> int:
        self._ensure_passes(target_s + 1)
        candidates = [target_s]
        if self.active is not None:
            candidates.append(self.active.end_epoch_s)
        for up in self.onboard_queue:
            if up.due_epoch_s > self.epoch_s:
                candidates.append(up.due_epoch_s)
        for p in self._passes:
            if p.aos_epoch_s > self.epoch_s:
                candidates.append(p.aos_epoch_s)
                break
        current = self.pass_at(self.epoch_s)
        if current is not None:
            candidates.append(current.los_epoch_s)
        return min(c for c in candidates if c > self.epoch_s)

    # ------------------------------------------------------ instant handlers
    def _process_instant(self) -> None:
        self._flush_pass_boundaries()
        if self.active is not None and self.epoch_s >= self.active.end_epoch_s:
            self._finish_profile()
        in_pass = self.pass_at(self.epoch_s) is not None
        if in_pass and self.active is None and self.ground_queue:
            for cmd in self.ground_queue:
                due = cmd.when_epoch_s if cmd.when_epoch_s is not None else self.epoch_s
                self.onboard_queue.append(_UplinkedCommand(cmd, max(due, self.epoch_s)))
                self._log("command_uplinked", command_id=cmd.command_id,
                          due_epoch_s=max(due, self.epoch_s))
            self.ground_queue.clear()
        due_now = [u for u in self.onboard_queue if u.due_epoch_s <= self.epoch_s]
        for up in due_now:
            self.onboard_queue.remove(up)
            self._dispatch(up.command)
        if self.active is not None and self.epoch_s >= self.active.end_epoch_s:
            self._finish_profile()
        self._maybe_start_downlink_burst()

    def _flush_pass_boundaries(self) -> None:
        while self._pass_log_idx < len(self._passes):
            p = self._passes[self._pass_log_idx]
            if not self._aos_logged:
                if p.aos_epoch_s > self.epoch_s:
                    break
                self._log_at(p.aos_epoch_s, "aos", los_epoch_s=p.los_epoch_s,
                             max_elevation_deg=p.max_elevation_deg)
                self._aos_logged = True
            if p.los_epoch_s > self.epoch_s:
                break
            self._log_at(p.los_epoch_s, "los", aos_epoch_s=p.aos_epoch_s)
            self._pass_log_idx += 1
            self._aos_logged = False

    def _dispatch(self, cmd: Command) -> None:
        profile = self.profiles[cmd.profile_id]
        if self.active is not None:
            self._log("command_rejected_busy", command_id=cmd.command_id,
                      running=f"0x{self.active.profile_id:02X}")
            return
        energy = pl.worst_case_energy_wh(profile, self.config.payload)
        if not env.power_available(energy, self.config.runtime.battery_budget_wh, False):
            self._log("command_rejected_power", command_id=cmd.command_id,
                      energy_wh=round(energy, 6))
            return
        result = pl.execute_profile(
            profile,
            self.epoch_s,
            self.thermal,
            self.config.thermal,
            self.config.orbit,
            self.config.source,
            self.config.detectors,
            self.config.payload,
            self.rng_counts,
            config_hash=self.config_hash,
            hop_rng=self.rng_hops,
        )
        start = self.epoch_s
        subs: list[tuple[int, str, dict]] = []
        for name, a, b in result.phase_log.phases:
            if b > a:
                subs.append((start + a, "phase", {"phase": name}))
        if result.phase_log.heating_timeout:
            heat_end = result.phase_log.phases[0][2]
            subs.append((start + heat_end, "heating_timeout", {}))
        for off, on in result.phase_log.heater_toggles:
            subs.append((start + off, "heater", {"on": on}))
        for a, b in result.phase_log.dropout_windows:
            subs.append((start + int(a), "mode_hop", {"duration_s": round(b - a, 3)}))
        subs.sort(key=lambda e: e[0])
        self.active = _ActiveProfile(
            profile_id=cmd.profile_id,
            start_epoch_s=start,
            end_epoch_s=start + result.phase_log.elapsed_s,
            result=result,
            sub_events=subs,
        )
        if self.downlink is not None:
            # the radio yields to the payload; a fresh gap list starts the
            # next burst after completion
            self.downlink.in_burst = False
        self._log("profile_start", command_id=cmd.command_id,
                  profile_id=f"0x{cmd.profile_id:02X}",
                  end_epoch_s=self.active.end_epoch_s)
        if result.phase_log.elapsed_s == 0:
            self._finish_profile()

    def _finish_profile(self) -> None:
        active = self.active
        assert active is not None
        self._replay_profile(active.end_epoch_s)
        if self.slot is not None:
            old_id = self.slot[0]
            self._log_at(active.end_epoch_s, "slot_overwrite_warning", lost_file_id=old_id)
            self.archive_sessions.pop(old_id, None)
            self.downlink = None
        file_id = self.next_file_id
        self.next_file_id += 1
        image = encode_file(active.result.file)
        self.slot = (file_id, active.result.file, image)
        frames = tm.frame_file(image, file_id)
        self.downlink = _Downlink(
            file_id=file_id,
            wire={f.seq: tm.encode_frame(f) for f in frames},
            total=len(frames),
        )
        self.downlink.session = tm.DownlinkSession(file_id=file_id)
        self._log_at(active.end_epoch_s, "file_written", file_id=file_id,
                     profile_id=f"0x{active.profile_id:02X}",
                     runs=len(active.result.file.runs),
                     dark_records=len(active.result.file.dark_records),
                     energy_wh=round(active.result.energy_wh, 6))
        self.thermal = active.result.thermal_state
        self.active = None

    # -------------------------------------------------------------- downlink
    def _maybe_start_downlink_burst(self) -> None:
        dl = self.downlink
        if dl is None or dl.in_burst or self.active is not None:
            return
        current = self.pass_at(self.epoch_s)
        if current is None:
            return
        desired = [s for s in range(dl.total) if s not in dl.received]
        if not desired:
            return
        dl.desired = desired
        dl.slot_idx = 0
        dl.anchor_s = self.epoch_s
        dl.air_used_s = 0.0
        dl.burst_los_s = current.los_epoch_s
        dl.in_burst = True
        dl.session.passes_used.append((current.aos_epoch_s, current.los_epoch_s))
        self._log("downlink_burst", file_id=dl.file_id, missing=len(desired),
                  los_epoch_s=current.los_epoch_s)

    def _progress_downlink(self, until_s: int) -> None:
        dl = self.downlink
        if dl is None or not dl.in_burst:
            return
        frame_air = tm.FRAME_SIZE * 8 / self.config.link.bit_rate_bps
        ber = self.config.link.bit_error_rate
        horizon = min(until_s, dl.burst_los_s)
        session = dl.session
        while dl.anchor_s + dl.air_used_s + frame_air <= horizon:
            seq = dl.desired[dl.slot_idx % len(dl.desired)]
            dl.slot_idx += 1
            dl.air_used_s += frame_air
            session.frames_sent += 1
            session.on_air_s += frame_air
            wire = dl.wire[seq]
            if ber > 0.0:
                wire = tm._corrupt(wire, ber, self.rng_channel)
            try:
                got = tm.decode_frame(wire)
            except tm.FrameError:
                t_done = int(dl.anchor_s + dl.air_used_s)
                session.lost_seqs.append((t_done, seq))
                self._log_at(t_done, "frame_lost", file_id=dl.file_id, seq=seq)
                continue
            dl.received[got.seq] = got
            session.frames_acked = len(dl.received)
            if len(dl.received) == dl.total:
                session.completed = True
                session.completion_epoch_s = dl.anchor_s + dl.air_used_s
                self._finish_downlink(int(session.completion_epoch_s))
                return
        if until_s >= dl.burst_los_s:
            dl.in_burst = False

    def _finish_downlink(self, t_done: int) -> None:
        dl = self.downlink
        assert dl is not None and dl.session is not None
        result = tm.reassemble(list(dl.received.values()), dl.file_id)
        session = dl.session
        self._log_at(t_done, "downlink_complete", file_id=dl.file_id,
                     frames_sent=session.frames_sent,
                     bits_on_air=session.bits_on_air,
                     on_air_s=round(session.on_air_s, 3))
        self.archive_sessions[dl.file_id] = {
            "file_id": dl.file_id,
            "frames_sent": session.frames_sent,
            "frames_acked": session.frames_acked,
            "bits_on_air": session.bits_on_air,
            "on_air_s": round(session.on_air_s, 6),
            "completed": session.completed,
            "completion_epoch_s": session.completion_epoch_s,
            "passes_used": session.passes_used,
            "lost_frames": len(session.lost_seqs),
        }
        self.archive_images[dl.file_id] = result.image
        try:
            decoded = decode_file(result.image)
            self.archive_analyses[dl.file_id] = analysis.analyze_file(
                decoded, dl.file_id,
                coincidence_window_s=self.config.source.coincidence_window_s,
                profiles=self.profiles,
                bootstrap_samples=self.config.analysis.bootstrap_sigma_samples,
            )
            self._log_at(t_done, "analysis_done", file_id=dl.file_id)
        except Exception as exc:  # corrupt image past the CRCs is conceivable
            self._log_at(t_done, "analysis_failed", file_id=dl.file_id, error=str(exc))
        self.slot = None
        self.downlink = None

    # ------------------------------------------------------------- continuous
    def _replay_profile(self, until_s: int) -> None:
        active = self.active
        assert active is not None
        while active.flushed < len(active.sub_events):
            t, name, fields = active.sub_events[active.flushed]
            if t > until_s:
                break
            self._log_at(t, name, **fields)
            active.flushed += 1
        samples = active.result.phase_log.samples
        offset = until_s - active.start_epoch_s
        pos = active.sample_pos
        latest = None
        while pos < len(samples) and samples[pos][0] <= offset:
            latest = samples[pos]
            pos += 1
        active.sample_pos = pos
        if latest is not None:
            amb = env.ambient_temperature(
                active.start_epoch_s + latest[0], self.config.thermal, self.config.orbit
            )
            self.thermal = env.ThermalState(
                ambient_c=amb, payload_c=latest[1], heater_on=self.thermal.heater_on,
                t1_c=latest[1], t2_c=latest[2],
            )

    def _progress_to(self, nxt: int) -> None:
        assert nxt > self.epoch_s
        if self.active is not None and self.epoch_s < self.active.end_epoch_s:
            self._replay_profile(min(nxt, self.active.end_epoch_s))
        else:
            self._progress_downlink(nxt)
            self.thermal = env.advance_thermal(
                self.thermal, self.epoch_s, nxt - self.epoch_s,
                self.config.thermal, self.config.orbit,
            )
        self.epoch_s = nxt
        self._flush_pass_boundaries()

    # ---------------------------------------------------------------- output
    def build_report(self) -> dict | None:
        if not self.archive_analyses:
            return None
        return analysis.build_report(
            list(self.archive_analyses.values()),
            self.config.analysis.dark_excess_threshold_cps,
        )

    def state_dict(self) -> dict:
        running = None
        if self.active is not None:
            offset = self.epoch_s - self.active.start_epoch_s
            running = {
                "profile_id": f"0x{self.active.profile_id:02X}",
                "phase": self.active.result.phase_log.phase_at(offset) or "starting",
                "start_epoch_s": self.active.start_epoch_s,
                "end_epoch_s": self.active.end_epoch_s,
            }
        slot = None
        if self.slot is not None:
            file_id = self.slot[0]
            dl = self.downlink
            slot = {
                "file_id": file_id,
                "profile_id": f"0x{self.slot[1].profile_id:02X}",
                "frames_acked": dl.session.frames_acked if dl and dl.session else 0,
                "frames_total": dl.total if dl else tm.FRAMES_PER_FILE,
            }
        current = self.pass_at(self.epoch_s)
        return {
            "epoch_s": self.epoch_s,
            "state_version": self.state_version,
            "thermal": {
                "ambient_c": round(self.thermal.ambient_c, 4),
                "payload_c": round(self.thermal.payload_c, 4),
                "t1_c": round(self.thermal.t1_c, 4),
                "t2_c": round(self.thermal.t2_c, 4),
            },
            "running": running,
            "in_pass": current is not None,
            "ground_queue": [c.command_id for c in self.ground_queue],
            "onboard_queue": [u.command.command_id for u in self.onboard_queue],
            "slot": slot,
            "archived_files": sorted(self.archive_images),
            "event_count": len(self.event_log),
        }

    def write_archive(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        (out / "files").mkdir(parents=True, exist_ok=True)
        (out / "sessions").mkdir(exist_ok=True)
        (out / "analysis").mkdir(exist_ok=True)
        for file_id, image in sorted(self.archive_images.items()):
            (out / "files" / f"file_{file_id:04d}.bin").write_bytes(image)
        for file_id, session in sorted(self.archive_sessions.items()):
            with open(out / "sessions" / f"session_{file_id:04d}.json", "w") as fh:
                json.dump(session, fh, indent=2, sort_keys=True)
                fh.write("\n")
        for file_id, a in sorted(self.archive_analyses.items()):
            with open(out / "analysis" / f"analysis_{file_id:04d}.json", "w") as fh:
                json.dump(a, fh, indent=2, sort_keys=True)
                fh.write("\n")
        report = self.build_report()
        if report is not None:
            analysis.write_report_files(report, out)
        with open(out / "events.log", "w") as fh:
            for entry in self.event_log:
                fh.write(json.dumps(entry, sort_keys=True))
                fh.write("\n")


def run_campaign(
    config: MissionConfig,
    duration_days: float,
    schedule: list[Command],
    out_dir: str | Path | None = None,
) -> tuple[MissionRuntime, dict | None]:
    """Execute a whole campaign and optionally write the archive directory."""
    runtime = MissionRuntime(config)
    for cmd in schedule:
        runtime.enqueue_command(cmd)
    runtime.advance(int(round(duration_days * 86_400)))
    report = runtime.build_report()
    if out_dir is not None:
        runtime.write_archive(out_dir)
    return runtime, report
