"""
What a sloppy multiplier search does to WSR-MM.

The exact search stops when the power constraint is met to 1e-10. The
relaxed rule stops as soon as the bisection interval is narrower than
``2**-i``. With a wide interval the returned multiplier is too large, the
beamformers are shrunk and the monotone ascent of the method is lost.
"""
import dataclasses

import numpy as np

from wsrmax import bench

cfg = dataclasses.replace(bench.default_config(), seeds=tuple(range(20)))
records, variants, summary = bench.relaxed_bisection(cfg, [1, 2, 8, 60])

for i, s in summary.items():
    print(f"width 2^-{i:<3s} non-monotone on {len(s['non_monotone']):2d} "
          f"seeds, shortfall > 1e-3 on {len(s['shortfall']):2d}, "
          f"max |final gap| {s['max_abs_final_gap']:.2e}")

# a trajectory that goes downhill
for n, rec in enumerate(records):
    d = np.diff(rec.traj.wsr)
    if variants.get(n, "").startswith("relaxed") and d.min() < -1e-9:
        k = int(np.argmin(d))
        print(f"\nseed {rec.seed}, {variants[n]}: WSR "
              f"{rec.traj.wsr[k]:.6f} -> {rec.traj.wsr[k + 1]:.6f} at round "
              f"{k + 1}")
        break
