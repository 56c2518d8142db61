"""Walk a fork-rate budget through target, difficulty and interval and back.

Run: python demos/target_arithmetic.py
"""
from dmisim import numerics
from dmisim.propagation import NetworkParams, uninformed_for_size

HASH_RATE = 4e7
BUDGET = 0.0095

net = NetworkParams(delay=0.016530815731260695)
print(f"{'block bytes':>12} {'W (s)':>8} {'interval (s)':>13} {'difficulty':>12}  target")
for size in (1_000, 50_000, 250_000, 1_001_000, 4_000_000):
    w = uninformed_for_size(size, net)
    t = numerics.target_for_fork_limit(BUDGET, w, HASH_RATE)
    d = numerics.difficulty_from_target(t)
    interval = numerics.expected_interval(d, HASH_RATE)
    back = numerics.fork_rate_from_interval(interval, w)
    assert abs(back - BUDGET) < 1e-12
    print(f"{size:>12,} {w:8.3f} {interval:13.2f} {d:12.4g}  {t.hex()[:16]}...")

# A bigger block takes longer to reach everyone, so the budget buys a longer
# interval; a tiny block can be followed almost immediately.
