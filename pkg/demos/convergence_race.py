"""
WSR against iteration and against step time for the five MISO families on
a single channel draw.

The solvers that need a multiplier search converge in fewer rounds; the
projected-step solvers take more, cheaper rounds.
"""
from wsrmax import bench

cfg = bench.ExperimentConfig(seeds=(7,))
records = bench.run_seed(cfg, 7)

print(f"{'solver':20s} {'iters':>5s} {'final WSR':>12s} {'step time':>10s}")
for r in records:
    t = r.traj
    print(f"{r.spec.label:20s} {t.iterations:5d} {t.final_wsr:12.6f} "
          f"{t.total_seconds * 1e3:8.2f}ms")

print("\nfirst rounds (nats):")
print("iter " + " ".join(f"{r.spec.algorithm:>10s}" for r in records))
for i in range(8):
    print(f"{i:4d} " + " ".join(
        f"{r.traj.wsr[min(i, r.traj.iterations)]:10.5f}" for r in records))
