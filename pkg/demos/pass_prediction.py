"""Ground-station pass prediction for the first mission day.

The 550 km, 15 deg orbit crosses the near-equatorial station longitude
about 14 times per day, so most orbits give a usable pass.
"""
from pairsat.environment import GroundStation, OrbitModel, scan_passes

orbit = OrbitModel()
station = GroundStation()

print(f"orbit: {orbit.altitude_km:.0f} km, {orbit.inclination_deg:.0f} deg inclination, "
      f"period {orbit.period_s / 60:.1f} min")
print(f"station: {station.name} ({station.latitude_deg} N, {station.longitude_deg} E), "
      f"mask {station.mask_deg} deg")
print()

passes = scan_passes(0, 86_400, orbit, station)
print(f"{len(passes)} passes in the first 24 h")
print(f"{'aos (h)':>9} {'los (h)':>9} {'dur (s)':>8} {'max el (deg)':>13}")
for p in passes:
    print(f"{p.aos_epoch_s / 3600:9.2f} {p.los_epoch_s / 3600:9.2f} "
          f"{p.duration_s:8d} {p.max_elevation_deg:13.1f}")

total = sum(p.duration_s for p in passes)
print(f"\ntotal contact time: {total} s ({total / 60:.1f} min); "
      f"a 64 KiB file needs 460.3 s on-air at 1.2 kbps")
