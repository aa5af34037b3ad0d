"""Noisy UHF downlink: frame loss, retransmission, and exact reassembly.

Pushes one 64 KiB file image through the 1.2 kbps link at several bit error
rates.  The CRC-16 drops corrupted frames; selective repeat over successive
passes recovers them, and the reassembled image is always byte-identical.
"""
import numpy as np

from pairsat.environment import Pass
from pairsat.telemetry import FILE_IMAGE_SIZE, frame_file, reassemble, simulate_downlink

image = np.random.default_rng(0).integers(0, 256, FILE_IMAGE_SIZE).astype(np.uint8).tobytes()
frames = frame_file(image, file_id=1)
passes = [Pass(k * 7000, k * 7000 + 500, 50.0) for k in range(80)]

print(f"file: {FILE_IMAGE_SIZE} bytes -> {len(frames)} frames of 252 bytes")
print(f"{'ber':>8} {'sent':>6} {'lost':>6} {'passes':>7} {'on-air (s)':>11} {'identical':>10}")
for ber in (0.0, 1e-5, 1e-4, 1e-3):
    rng = np.random.default_rng(99)
    received, session = simulate_downlink(frames, passes, ber, rng)
    result = reassemble(received, 1)
    ok = result.complete and result.image == image
    print(f"{ber:8.0e} {session.frames_sent:6d} {len(session.lost_seqs):6d} "
          f"{len(session.passes_used):7d} {session.on_air_s:11.1f} {str(ok):>10}")

print("\nat ber 1e-3 roughly 87% of 2016-bit frames carry at least one flipped bit,")
print("so the spacecraft cycles each pass's gap list until everything lands.")
