"""Downlink framing, CRC protection, lossy-channel simulation and reassembly.

Wire format (252 bytes per frame, all multi-byte fields little-endian except
the CRC which is stored big-endian):

    offset 0   sync        1A CF FC 1D
    offset 4   version     u8
    offset 5   file_id     u16
    offset 7   seq         u16
    offset 9   payload_len u8   (<= 240)
    offset 10  payload     240 bytes, zero padded
    offset 250 crc16       CRC-16/CCITT-FALSE over bytes 4..249

The decoder resynchronizes on the sync marker, so frames survive leading
garbage in a byte stream.
"""
from __future__ import annotations

import binascii
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .environment import Pass

SYNC = bytes((0x1A, 0xCF, 0xFC, 0x1D))
FRAME_SIZE = 252
PAYLOAD_CAPACITY = 240
FILE_IMAGE_SIZE = 65_536
FRAMES_PER_FILE = math.ceil(FILE_IMAGE_SIZE / PAYLOAD_CAPACITY)  # 274
DOWNLINK_BIT_RATE = 1200.0
FRAME_AIR_TIME_S = FRAME_SIZE * 8 / DOWNLINK_BIT_RATE

_HEADER = struct.Struct("<BHHB")


class FrameError(Exception):
    pass


class NoSyncError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    pass


class CrcMismatchError(FrameError):
    pass


class ReassemblyConflictError(Exception):
    """Same sequence number received twice with different payloads."""


def crc16_ccitt_false(data: bytes, crc: int = 0xFFFF) -> int:
    # crc_hqx implements poly 0x1021 with a caller-supplied init and no reflection
    return binascii.crc_hqx(data, crc)


@dataclass(frozen=True)
class TelemetryFrame:
    file_id: int
    seq: int
    payload: bytes
    version: int = 1

    def __post_init__(self) -> None:
        if len(self.payload) > PAYLOAD_CAPACITY:
            raise ValueError("payload exceeds 240 bytes")
        if not 0 <= self.file_id <= 0xFFFF or not 0 <= self.seq <= 0xFFFF:
            raise ValueError("file_id/seq out of range")


def encode_frame(frame: TelemetryFrame) -> bytes:
    body = _HEADER.pack(frame.version, frame.file_id, frame.seq, len(frame.payload))
    body += frame.payload.ljust(PAYLOAD_CAPACITY, b"\x00")
    crc = crc16_ccitt_false(body)
    return SYNC + body + struct.pack(">H", crc)


def decode_frame(buf: bytes) -> TelemetryFrame:
    """Decode the first frame found in ``buf``, resyncing past leading garbage."""
    start = buf.find(SYNC)
    if start < 0:
        raise NoSyncError("no sync marker in stream")
    if len(buf) - start < FRAME_SIZE:
        raise TruncatedFrameError(f"{len(buf) - start} bytes after sync, need {FRAME_SIZE}")
    body = buf[start + 4 : start + FRAME_SIZE - 2]
    (crc,) = struct.unpack(">H", buf[start + FRAME_SIZE - 2 : start + FRAME_SIZE])
    if crc16_ccitt_false(body) != crc:
        raise CrcMismatchError("frame CRC mismatch")
    version, file_id, seq, length = _HEADER.unpack(body[:6])
    if length > PAYLOAD_CAPACITY:
        raise FrameError(f"payload_len {length} exceeds capacity")
    return TelemetryFrame(file_id=file_id, seq=seq, payload=body[6 : 6 + length], version=version)


def deframe_stream(buf: bytes):
    """Yield every valid frame in a byte stream, skipping garbage and bad CRCs."""
    i = 0
    while True:
        start = buf.find(SYNC, i)
        if start < 0 or len(buf) - start < FRAME_SIZE:
            return
        try:
            yield decode_frame(buf[start : start + FRAME_SIZE])
            i = start + FRAME_SIZE
        except FrameError:
            i = start + 1


def frame_file(image: bytes, file_id: int) -> list[TelemetryFrame]:
    """Split a 64 KiB onboard file image into 274 sequenced frames."""
    if len(image) != FILE_IMAGE_SIZE:
        raise ValueError(f"file image must be {FILE_IMAGE_SIZE} bytes, got {len(image)}")
    return [
        TelemetryFrame(file_id=file_id, seq=k, payload=image[k * PAYLOAD_CAPACITY : (k + 1) * PAYLOAD_CAPACITY])
        for k in range(FRAMES_PER_FILE)
    ]


@dataclass
class ReassemblyResult:
    complete: bool
    image: bytes | None
    missing: tuple[int, ...]


def reassemble(frames, file_id: int) -> ReassemblyResult:
    """Rebuild the file image from received frames, or report the gap list."""
    by_seq: dict[int, bytes] = {}
    for f in frames:
        if f.file_id != file_id:
            continue
        if f.seq in by_seq and by_seq[f.seq] != f.payload:
            raise ReassemblyConflictError(f"seq {f.seq} received with conflicting payloads")
        by_seq[f.seq] = f.payload
    missing = tuple(s for s in range(FRAMES_PER_FILE) if s not in by_seq)
    if missing:
        return ReassemblyResult(complete=False, image=None, missing=missing)
    image = b"".join(by_seq[s] for s in range(FRAMES_PER_FILE))[:FILE_IMAGE_SIZE]
    return ReassemblyResult(complete=True, image=image, missing=())


@dataclass
class DownlinkSession:
    file_id: int
    frames_sent: int = 0
    frames_acked: int = 0
    on_air_s: float = 0.0
    completed: bool = False
    completion_epoch_s: float | None = None
    passes_used: list[tuple[int, int]] = field(default_factory=list)
    lost_seqs: list[tuple[int, int]] = field(default_factory=list)  # (pass aos, seq)

    @property
    def bits_on_air(self) -> int:
        return self.frames_sent * FRAME_SIZE * 8


def _corrupt(encoded: bytes, ber: float, rng: np.random.Generator) -> bytes:
    nbits = len(encoded) * 8
    k = int(rng.binomial(nbits, ber))
    if k == 0:
        return encoded
    positions = rng.choice(nbits, size=k, replace=False)
    buf = bytearray(encoded)
    for p in positions:
        buf[p >> 3] ^= 0x80 >> (p & 7)
    return bytes(buf)


def simulate_downlink(
    frames: list[TelemetryFrame],
    passes: list[Pass],
    bit_error_rate: float,
    rng: np.random.Generator,
    bit_rate_bps: float = DOWNLINK_BIT_RATE,
) -> tuple[list[TelemetryFrame], DownlinkSession]:
    """Transmit frames over pass windows with i.i.d. bit errors.

    Selective repeat with per-pass gap lists: the ground reports the missing
    sequence set between passes, and the spacecraft cycles through that set
    for the whole pass (it cannot know mid-pass what got through).  Frames
    whose CRC fails on receive are dropped.  The session may end incomplete
    if the passes are exhausted.
    """
    if not 0.0 <= bit_error_rate < 1.0:
        raise ValueError("bit_error_rate must be in [0, 1)")
    frame_air = FRAME_SIZE * 8 / bit_rate_bps
    session = DownlinkSession(file_id=frames[0].file_id if frames else 0)
    received: dict[int, TelemetryFrame] = {}
    pending = {f.seq: f for f in frames}
    wire_cache = {seq: encode_frame(f) for seq, f in pending.items()}

    for p in passes:
        if session.completed:
            break
        desired = [s for s in sorted(pending) if s not in received]
        if not desired:
            break
        session.passes_used.append((p.aos_epoch_s, p.los_epoch_s))
        budget = float(p.duration_s)
        used = 0.0
        slot = 0
        while used + frame_air <= budget and not session.completed:
            seq = desired[slot % len(desired)]
            slot += 1
            used += frame_air
            session.frames_sent += 1
            session.on_air_s += frame_air
            wire = wire_cache[seq]
            if bit_error_rate > 0.0:
                wire = _corrupt(wire, bit_error_rate, rng)
            try:
                got = decode_frame(wire)
            except FrameError:
                session.lost_seqs.append((p.aos_epoch_s, seq))
                continue
            received[got.seq] = got
            session.frames_acked = len(received)
            if len(received) == len(pending):
                session.completed = True
                session.completion_epoch_s = p.aos_epoch_s + used

    return list(received.values()), session
