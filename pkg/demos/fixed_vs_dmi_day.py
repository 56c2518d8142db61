"""One day of bank-shaped traffic: fixed 600 s blocks against per-block retargeting.

Both chains start with a 16,000 transaction backlog and then receive an hourly
profile of arrivals. Prints the hourly confirmation counts side by side.

Run: python demos/fixed_vs_dmi_day.py
"""
import numpy as np

from dmisim.config import load_config
from dmisim.engine import run
from dmisim.metrics import report

runs = {name: run(load_config(name)) for name in ("sim2", "sim3")}
hours = {}
for name, r in runs.items():
    per_hour = np.zeros(48, dtype=int)
    for b in r.canonical[1:]:
        per_hour[min(int(b.time // 3600), 47)] += b.tx_count
    hours[name] = per_hour

print("hour   fixed     dmi")
for h in range(48):
    if hours["sim2"][h] or hours["sim3"][h]:
        print(f"{h:4d} {hours['sim2'][h]:7d} {hours['sim3'][h]:7d}")

for name, label in (("sim2", "fixed"), ("sim3", "dmi")):
    m = report(runs[name])
    print(f"{label:>5}: {m.tps:.3f} tps, {m.canonical_blocks} blocks, "
          f"fork rate {m.fork_rate:.2%}, makespan {m.makespan / 60:.0f} min")
