"""
Designing a constellation mixture
=================================

Sweep the rate floor on a flat channel and watch which alphabets the optimal
mixture uses for each receiver chain, then solve a frequency-selective case
subcarrier by subcarrier.

"""

import numpy as np

from isaclab.constellations import apsk32, qpsk, square_qam
from isaclab.optimizer import (ClassSpec, InfeasibleProblemError, bilevel_solve,
                               flat_fading_solve, support_size)

cons = [qpsk(), square_qam(16), apsk32(), square_qam(64)]
names = [c.id for c in cons]
n, m, p_ave, gain = 64, 16, 6.0, 35.0

##############################################################################
# Flat channel
# ------------
#
# Each class is summarized by its moments, rate and the least power that
# meets the BER ceiling at this channel gain.

classes = [ClassSpec.for_channel(c, gain, 1.0, 1e-4) for c in cons]
print("r_min  chain  " + "  ".join(f"{s:>7s}" for s in names))
for r_min in np.arange(2.0, 5.01, 0.5):
    for chain in ("MF", "RF"):
        try:
            plan = flat_fading_solve(chain, classes, r_min, p_ave, n=n, m=m)
        except InfeasibleProblemError:
            print(f"{r_min:5.2f}  {chain}     infeasible")
            continue
        eta = "  ".join(f"{e:7.3f}" for e in plan.eta)
        print(f"{r_min:5.2f}  {chain}     {eta}   support={support_size(plan)}")

##############################################################################
# Frequency-selective channel
# ---------------------------
#
# Stronger subcarriers carry denser alphabets; power stays equal within each
# alphabet block.

gains = np.random.default_rng(7).exponential(60.0, n)
plan = bilevel_solve("MF", gains, cons, 3.5, p_ave, m=m)
for j, name in enumerate(names):
    sel = plan.assignment == j
    if sel.any():
        print(f"{name:8s} {sel.sum():3d} subcarriers, mean gain {gains[sel].mean():7.1f}, "
              f"power {plan.power[sel].mean():.3f}")
print(f"rate {plan.rates[plan.assignment].mean():.3f} bits, stop: {plan.stop_reason}")
