"""Exact box-constrained water level for separable power problems.

Both sensing objectives lead to the same inner structure once the
constellation choice is fixed: every unit i gets P_i(s) = clip(s * w_i,
lo_i, hi_i) for a scalar level s, chosen so that sum_i weight_i P_i(s)
meets the budget.  MF uses w_i = 1 / (2 a_i) (level = power price); RF
uses w_i = sqrt(nu_i).  sum_i weight_i P_i(s) is piecewise linear and
nondecreasing in s, so the level is found exactly from its breakpoints.
"""

from __future__ import annotations

import numpy as np


def water_level(w, lo, hi, weights, budget: float, rtol: float = 1e-12):
    """Return ``(P, s)`` or ``None`` if the budget is outside the box range."""
    w = np.asarray(w, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    weights = np.asarray(weights, dtype=float)
    active = weights > 0
    tot_lo = float(np.dot(weights[active], lo[active]))
    tot_hi = float(np.dot(weights[active], hi[active]))
    slack = rtol * max(abs(budget), 1.0)
    if budget < tot_lo - slack or budget > tot_hi + slack:
        return None
    if budget <= tot_lo:
        return lo.copy(), float(np.min(lo[active] / w[active]))
    if budget >= tot_hi:
        return hi.copy(), float(np.max(hi[active] / w[active]))
    wa, la, ha, ka = w[active], lo[active], hi[active], weights[active]
    bps = np.unique(np.concatenate([la / wa, ha / wa]))
    f = np.clip(bps[:, None] * wa[None, :], la, ha) @ ka
    k = int(np.searchsorted(f, budget, side="right")) - 1
    k = min(max(k, 0), bps.size - 2)
    f0, f1 = f[k], f[k + 1]
    s = bps[k] if f1 == f0 else bps[k] + (budget - f0) * (bps[k + 1] - bps[k]) / (f1 - f0)
    return np.clip(s * w, lo, hi), float(s)
