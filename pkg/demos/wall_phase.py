"""Wall-induced rotation of the three-sphere swimmer over one classical stroke.

Positive delta_theta turns the swimmer away from the wall, negative
towards it.
"""

from swimopt import harness

rows = harness.wall_phase_table(heights=(2, 3, 5, 10, 20))
print(f"{'regime':>7} {'h/R':>5} {'delta_theta':>12}")
for regime, h, d in rows:
    print(f"{regime:>7} {h:5.0f} {d:+12.3e}")
