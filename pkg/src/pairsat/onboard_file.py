"""Bit-exact codec for the 64 KiB onboard experiment data file.

Image layout (65,536 bytes, little-endian fields):

    offset 0    magic           "GLSQ" (4 B)
    offset 4    version         u8
    offset 5    profile id      u8
    offset 6    start epoch     u64 seconds
    offset 14   bias            u16 mV
    offset 16   run count       u16
    offset 18   dark-record     u16
    offset 20   config hash     u32
    offset 24   header crc      u16  CRC-16/CCITT-FALSE over bytes 0..23
    offset 26   reserved        zeros to offset 60
    offset 60   payload crc     u32  CRC-32/ISO-HDLC over bytes 64..65535
    offset 64   dark records    dark_count x 24 B setting records
    ...         run records     run_count x (16 B run header + 16 x 24 B)
    ...         padding         0xFF to 65,536

Run header: run seq (u16), epoch offset s (u32), pump centi-mW (u16),
flags (u8), 7 reserved bytes.  Setting record: setting index (u8), angle
centi-deg (u16), integration ms (u16), s1 (u32), s2 (u32), coincidences
(u16), T1 centi-degC (i16), T2 centi-degC (i16), bias mV (u16), flags (u8),
1 reserved byte.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from .telemetry import crc16_ccitt_false

FILE_SIZE = 65_536
MAGIC = b"GLSQ"
FORMAT_VERSION = 1
HEADER_SIZE = 64
RECORD_SIZE = 24
RUN_HEADER_SIZE = 16
SETTINGS_PER_RUN = 16
RUN_SIZE = RUN_HEADER_SIZE + SETTINGS_PER_RUN * RECORD_SIZE

FLAG_MODE_HOP = 0x01
FLAG_SATURATED_1 = 0x02
FLAG_SATURATED_2 = 0x04
FLAG_DARK_PHASE = 0x08

_HEADER = struct.Struct("<4sBBQHHHI")  # bytes 0..23
_RECORD = struct.Struct("<BHHIIHhhHB2x")
_RUN_HEADER = struct.Struct("<HIHB7x")

assert _RECORD.size == RECORD_SIZE and _RUN_HEADER.size == RUN_HEADER_SIZE and _HEADER.size == 24


class FileCodecError(Exception):
    pass


class BadMagicError(FileCodecError):
    pass


class FileCrcError(FileCodecError):
    pass


class TruncatedFileError(FileCodecError):
    pass


@dataclass(frozen=True)
class SettingRecord:
    setting_index: int
    angle_centideg: int
    integration_ms: int
    s1: int
    s2: int
    coinc: int
    t1_centideg_c: int
    t2_centideg_c: int
    hv_mv: int
    flags: int

    def __post_init__(self) -> None:
        if not 0 <= self.setting_index < SETTINGS_PER_RUN:
            raise ValueError(f"setting_index out of range: {self.setting_index}")
        if min(self.s1, self.s2, self.coinc) < 0:
            raise ValueError("counts must be nonnegative")
        if self.coinc > 0xFFFF or max(self.s1, self.s2) > 0xFFFFFFFF:
            raise ValueError("count exceeds field width")

    @property
    def dark_phase(self) -> bool:
        return bool(self.flags & FLAG_DARK_PHASE)

    @property
    def dropout(self) -> bool:
        return bool(self.flags & FLAG_MODE_HOP)

    @property
    def saturated(self) -> bool:
        return bool(self.flags & (FLAG_SATURATED_1 | FLAG_SATURATED_2))

    @property
    def angle_deg(self) -> float:
        return self.angle_centideg / 100.0


@dataclass(frozen=True)
class RunRecord:
    run_seq: int
    epoch_offset_s: int
    pump_centimw: int
    flags: int
    settings: tuple[SettingRecord, ...]

    def __post_init__(self) -> None:
        if len(self.settings) != SETTINGS_PER_RUN:
            raise ValueError(f"a run holds exactly {SETTINGS_PER_RUN} setting records")

    @property
    def valid(self) -> bool:
        """True when no record carries a dropout or saturation flag."""
        return not any(s.dropout or s.saturated for s in self.settings)


@dataclass(frozen=True)
class OnboardFile:
    profile_id: int
    start_epoch_s: int
    bias_mv: int
    config_hash: int
    dark_records: tuple[SettingRecord, ...]
    runs: tuple[RunRecord, ...]
    version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        payload = len(self.dark_records) * RECORD_SIZE + len(self.runs) * RUN_SIZE
        if HEADER_SIZE + payload > FILE_SIZE:
            raise ValueError("records exceed file capacity")


def _pack_record(r: SettingRecord) -> bytes:
    return _RECORD.pack(
        r.setting_index,
        r.angle_centideg,
        r.integration_ms,
        r.s1,
        r.s2,
        r.coinc,
        r.t1_centideg_c,
        r.t2_centideg_c,
        r.hv_mv,
        r.flags,
    )


def _unpack_record(buf: bytes) -> SettingRecord:
    fields = _RECORD.unpack(buf)
    return SettingRecord(*fields)


def encode_file(f: OnboardFile) -> bytes:
    """Serialize to the fixed 65,536-byte image."""
    payload = bytearray()
    for rec in f.dark_records:
        payload += _pack_record(rec)
    for run in f.runs:
        payload += _RUN_HEADER.pack(run.run_seq, run.epoch_offset_s, run.pump_centimw, run.flags)
        for rec in run.settings:
            payload += _pack_record(rec)
    payload += b"\xff" * (FILE_SIZE - HEADER_SIZE - len(payload))

    head = _HEADER.pack(
        MAGIC,
        f.version,
        f.profile_id,
        f.start_epoch_s,
        f.bias_mv,
        len(f.runs),
        len(f.dark_records),
        f.config_hash,
    )
    head += struct.pack("<H", crc16_ccitt_false(head))
    head += b"\x00" * (60 - len(head))
    head += struct.pack("<I", zlib.crc32(payload))
    return bytes(head) + bytes(payload)


def decode_file(image: bytes) -> OnboardFile:
    """Parse and validate an onboard file image."""
    if len(image) != FILE_SIZE:
        raise TruncatedFileError(f"truncated image: expected {FILE_SIZE} bytes, got {len(image)}")
    if image[:4] != MAGIC:
        raise BadMagicError(f"bad magic {image[:4]!r}")
    magic, version, profile_id, epoch, bias, run_count, dark_count, config_hash = _HEADER.unpack(
        image[:24]
    )
    (head_crc,) = struct.unpack("<H", image[24:26])
    if crc16_ccitt_false(image[:24]) != head_crc:
        raise FileCrcError("header CRC mismatch")
    if version != FORMAT_VERSION:
        raise FileCodecError(f"unsupported version {version}")
    if image[26:60] != b"\x00" * 34:
        raise FileCodecError("reserved header bytes not zero")
    (payload_crc,) = struct.unpack("<I", image[60:64])
    if zlib.crc32(image[64:]) != payload_crc:
        raise FileCrcError("payload CRC mismatch")

    need = dark_count * RECORD_SIZE + run_count * RUN_SIZE
    if HEADER_SIZE + need > FILE_SIZE:
        raise FileCodecError("record counts exceed file capacity")

    pos = HEADER_SIZE
    darks = []
    for _ in range(dark_count):
        darks.append(_unpack_record(image[pos : pos + RECORD_SIZE]))
        pos += RECORD_SIZE
    runs = []
    for k in range(run_count):
        seq, offset, pump, flags = _RUN_HEADER.unpack(image[pos : pos + RUN_HEADER_SIZE])
        if seq != k:
            raise FileCodecError(f"run sequence {seq} at position {k}")
        pos += RUN_HEADER_SIZE
        settings = []
        for j in range(SETTINGS_PER_RUN):
            rec = _unpack_record(image[pos : pos + RECORD_SIZE])
            if rec.setting_index != j:
                raise FileCodecError(f"setting index {rec.setting_index} at slot {j}")
            settings.append(rec)
            pos += RECORD_SIZE
        runs.append(RunRecord(seq, offset, pump, flags, tuple(settings)))
    if image[pos:].count(0xFF) != FILE_SIZE - pos:
        raise FileCodecError("padding region not 0xFF")

    return OnboardFile(
        profile_id=profile_id,
        start_epoch_s=epoch,
        bias_mv=bias,
        config_hash=config_hash,
        dark_records=tuple(darks),
        runs=tuple(runs),
        version=version,
    )
