"""How fast does a block reach 10,000 nodes when each node pushes to 8 peers?

Compares the collision-aware wave model with the literal recurrence and
prints the informed-fraction curve for a full block.

Run: python demos/gossip_waves.py
"""
from dmisim.propagation import NetworkParams, curve_table, informed_curve, uninformed_integral, wave_counts

n, m = 10_000, 8
collision = wave_counts(n, m)
linear = wave_counts(n, m, "linear")
print("wave  collision-aware    literal")
for k in range(max(len(collision), len(linear))):
    a = collision[k] if k < len(collision) else n
    b = linear[k] if k < len(linear) else n
    print(f"{k:4d}  {a:15.1f}  {b:9.1f}")

net = NetworkParams(delay=0.016530815731260695)
curve = informed_curve(1_001_000, net)
print("\nfull 1 MB block, informed fraction over time")
for t, f in curve_table(curve):
    print(f"  t={t:6.2f}s  {'#' * int(f * 50):<50} {f:6.1%}")
print(f"uninformed integral W = {uninformed_integral(curve):.3f} s")
