"""
Field-level control versus whole-object locking
===============================================

Four transactions each increment their own field of one shared instance.
A classical reader/writer lock on the whole object serializes them;
access vectors let all four run at once.
"""

from pathlib import Path

from fieldlock import load_workload
from fieldlock.harness import RunConfig, run

HERE = Path(__file__).resolve().parent

workload = load_workload(HERE / "data" / "disjoint.wl")

print(f"{'mode':<11} {'blocks':>6} {'mean wait':>9} {'edges':>5}  verdict")
for mode in ("compat", "static-av", "dynamic-av"):
    metrics, verdict, _ = run(RunConfig(mode=mode, seed=0, iterations=50), workload)
    print(f"{mode:<11} {metrics.block_events:>6} {metrics.mean_queue_wait:>9.2f} {metrics.conflict_edges:>5}  "
          f"{'pass' if verdict else 'FAIL'}")

# the same comparison with real threads instead of the seeded step driver
for mode in ("compat", "static-av"):
    metrics, verdict, _ = run(RunConfig(mode=mode, driver="threads", workers=4, iterations=50), workload)
    print(f"threads {mode:<11} blocks={metrics.block_events} verdict={'pass' if verdict else 'FAIL'}")
