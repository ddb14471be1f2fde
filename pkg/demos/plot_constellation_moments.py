"""
Constellation moments and matched-filter sidelobes
==================================================

Random data on the subcarriers leaves a noise-like floor in the matched
filter output. Its level is set by the kurtosis ``mu4`` of each alphabet, and
coherent integration over M symbols pushes it down as 1/M.

"""

import numpy as np

from isaclab.constellations import apsk32, moments, qpsk, square_qam
from isaclab.sensing import closed_form_esl, empirical_acf_power, moment_vectors

##############################################################################
# Moments of the built-in alphabets
# ---------------------------------
#
# ``mu4`` drives matched-filter sidelobes, ``nu_minus2`` drives noise
# enhancement in the reciprocal filter. Both are scale free.

for c in (qpsk(), square_qam(16), apsk32(), square_qam(64)):
    mo = moments(c)
    print(f"{c.id:8s} mu4={mo.mu4:.4f}  nu_-2={mo.nu_minus2:.4f}")

##############################################################################
# Expected sidelobe level, simulated and closed form
# --------------------------------------------------

n = 64
rng = np.random.default_rng(0)
p = rng.uniform(0.5, 1.5, n)
for frac in (0.0, 0.5, 1.0):
    k = int(frac * n)
    cmap = [square_qam(16)] * k + [qpsk()] * (n - k)
    mu4, _ = moment_vectors(cmap)
    est = empirical_acf_power(cmap, p, 1, 5000, seed=1)
    print(f"16QAM share {frac:.1f}: ESL {est.esl:8.3f} +/- {est.esl_stderr:.3f}"
          f"  closed form {closed_form_esl(p, mu4):8.3f}")

##############################################################################
# Coherent integration
# --------------------
#
# With equal power the whole sidelobe floor is random, so each decade of M
# buys 10 dB.

cmap = [square_qam(16)] * n
mu4, _ = moment_vectors(cmap)
for m in (1, 10, 100):
    print(f"M={m:4d}: ESL {10 * np.log10(closed_form_esl(np.ones(n), mu4, m)):6.2f} dB")
