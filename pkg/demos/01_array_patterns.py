"""Polarimetric array manifold: pattern evaluation, steering matrices,
and tabulated-pattern interpolation.

Run:  python3 demos/01_array_patterns.py
"""

import numpy as np

from blindchan import (
    Direction,
    build_steering_matrix,
    default_array,
    evaluate_pattern,
    pattern_from_grid,
    sample_pattern_grid,
)

# ----------------------------------------------------------------------
# The default receiver: three dual-polarized elements (x- and z-dipole)
# at (0,0,0), (0.5,0,0) and (0,0.5,0) wavelengths -- six ports total.
# ----------------------------------------------------------------------
array = default_array()
print(f"ports: {array.port_count}")

# Port responses for a wave arriving from azimuth 30 deg, elevation 35 deg.
d = Direction(np.deg2rad(30.0), np.deg2rad(35.0))
b_h, b_v = evaluate_pattern(array, d)
print("\nper-port response (horizontal | vertical polarization):")
for m in range(array.port_count):
    print(f"  port {m}: {b_h[m]: .3f}  |  {b_v[m]: .3f}")

# A z-dipole never couples to the horizontal polarization, and its
# vertical response follows cos(elevation):
for el_deg in (0.0, 30.0, 60.0, 89.0):
    _, b_v = evaluate_pattern(array, Direction(0.5, np.deg2rad(el_deg)))
    print(f"z-dipole |b_V| at elevation {el_deg:5.1f} deg: {abs(b_v[1]):.4f}"
          f"  (cos = {np.cos(np.deg2rad(el_deg)):.4f})")

# ----------------------------------------------------------------------
# The steering matrix stacks one (H, V) column pair per path.
# ----------------------------------------------------------------------
directions = [Direction(np.deg2rad(a), np.deg2rad(e))
              for a, e in ((30.0, 35.0), (150.0, 50.0), (-45.0, 75.0))]
b = build_steering_matrix(array, directions)
print(f"\nsteering matrix for 3 paths: shape {b.shape}")
print(f"condition number: {np.linalg.cond(b):.2f}")

# ----------------------------------------------------------------------
# Patterns can also come from a tabulated grid (e.g. calibration data).
# Here: sample the analytic model on a 1-degree grid, then compare the
# bilinear interpolation against the analytic values between nodes.
# ----------------------------------------------------------------------
az = np.deg2rad(np.arange(-180.0, 180.0, 1.0))
el = np.deg2rad(np.arange(-90.0, 90.1, 1.0))
grid = sample_pattern_grid(array, az, el)

rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    q = Direction(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi / 2, np.pi / 2))
    got = np.concatenate(pattern_from_grid(grid, q))
    want = np.concatenate(evaluate_pattern(array, q))
    worst = max(worst, float(np.max(np.abs(got - want))))
print(f"\n1-degree grid vs analytic pattern, worst error over 200 queries: {worst:.2e}")
