"""
Downgrading after execution
===========================

``cap()`` assigns the balance only when it is above the limit, so its static
vector claims Write. When the branch is not taken the dynamic vector says
Read, and the monitor lets a waiting reader in before the holder commits.
"""

from pathlib import Path

from fieldlock import format_vector, load_workload
from fieldlock.harness import RunConfig, run_workload

HERE = Path(__file__).resolve().parent

workload = load_workload(HERE / "data" / "conditional.wl")

for mode in ("static-av", "dynamic-av"):
    res = run_workload(workload, RunConfig(mode=mode), seed=1)
    print(f"--- {mode}")
    for ev in res.trace:
        if ev.event in ("block", "grant", "downgrade", "release", "commit") and ev.field in (0, None):
            print(f"  t={ev.ts:<3} {ev.txn} {ev.event:<9} {ev.op or ''} {ev.mode or ''}".rstrip())
    m = res.metrics
    print(f"  early releases {m.early_releases}, max queue wait {m.max_queue_wait} steps")

# the log only keeps fields the operation actually wrote
res = run_workload(workload, RunConfig(mode="dynamic-av"), seed=1)
cap = res.manager.transactions["T1"].executed[0].record
print("cap() dynamic vector", format_vector(cap.dynamic_dav), "before-image", cap.before_image)
