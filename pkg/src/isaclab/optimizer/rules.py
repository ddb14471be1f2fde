"""Sensing-optimal power rules with no communication constraint."""

from __future__ import annotations

import numpy as np

from ..ofdm import PowerAllocation


def mf_weights(mu4, m: int) -> np.ndarray:
    """b_n = (mu4_n - 1) / M + N / (N - 1)."""
    mu4 = np.asarray(mu4, dtype=float)
    n = mu4.size
    if n < 2:
        raise ValueError("need N >= 2")
    return (mu4 - 1.0) / m + n / (n - 1.0)


def mf_power_rule(mu4, m: int, p_ave: float) -> PowerAllocation:
    """Minimize sum b_n P_n^2 subject to sum P_n = N P_ave.

    P_n = N P_ave / (b_n sum_i 1/b_i): high-kurtosis subcarriers get less.
    """
    b = mf_weights(mu4, m)
    n = b.size
    p = n * p_ave / (b * np.sum(1.0 / b))
    return PowerAllocation(p, p_ave)


def rf_power_rule(nu_minus2, p_ave: float) -> PowerAllocation:
    """Minimize sum nu_n / P_n subject to sum P_n = N P_ave.

    P_n = N P_ave sqrt(nu_n) / sum_i sqrt(nu_i).
    """
    r = np.sqrt(np.asarray(nu_minus2, dtype=float))
    n = r.size
    return PowerAllocation(n * p_ave * r / np.sum(r), p_ave)


def mf_rule_objective(p, mu4, m: int) -> float:
    return float(np.sum(mf_weights(mu4, m) * np.asarray(p) ** 2))


def rf_rule_objective(p, nu_minus2) -> float:
    return float(np.sum(np.asarray(nu_minus2) / np.asarray(p)))
