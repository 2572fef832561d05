"""Swept-field response of the default 5-link swimmer.

Prints the net x-advance per period for a planar field of amplitude
0.01 and marks the frequency of the largest advance.
"""

from swimopt import harness, nlink

params = nlink.NLinkParams()
freqs = [0.25 * k for k in range(1, 13)]
rows = harness.frequency_sweep(params, freqs)
for f, dx in rows:
    print(f"{f:5.2f} Hz  {dx:+.5f} L  " + "#" * int(max(dx, 0.0) * 4000))

f_peak = harness.peak_frequency(params)
print(f"peak near {f_peak:.2f} Hz")
