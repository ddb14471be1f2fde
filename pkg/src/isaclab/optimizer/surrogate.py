"""Closed-form sensing surrogates used for reporting designed plans."""

from __future__ import annotations

import math

import numpy as np

from ..ofdm import SensingScene
from ..sensing import MF, RF, SINR_OVERFLOW
from .bilevel import SubcarrierPlan
from .flat import MixturePlan, check_chain


def _subcarrier_sums(plan, n: int):
    """(sum P, sum P^2, sum P^2 (mu4 - 1), sum nu / P) over N subcarriers."""
    if isinstance(plan, MixturePlan):
        on = plan.eta > 0
        eta, p = plan.eta[on], plan.p_per_class[on]
        mu4 = np.array([c.mu4 for c in plan.classes])[on]
        nu = np.array([c.nu_minus2 for c in plan.classes])[on]
        return (n * float(np.sum(eta * p)), n * float(np.sum(eta * p**2)),
                n * float(np.sum(eta * p**2 * (mu4 - 1))), n * float(np.sum(eta * nu / p)))
    if isinstance(plan, SubcarrierPlan):
        a = plan.assignment
        p = plan.power
        mu4, nu = plan.mu4[a], plan.nu_minus2[a]
    else:
        p, mu4, nu = (np.asarray(v, dtype=float) for v in plan)
    with np.errstate(divide="ignore"):
        inv = float(np.sum(nu / p))
    return float(np.sum(p)), float(np.sum(p**2)), float(np.sum(p**2 * (mu4 - 1))), inv


def surrogate_sinr(chain: str, plan, scene: SensingScene, n: int | None = None, m: int = 1,
                   q: int = 0, exact_peak: bool = False) -> float:
    """Surrogate MF SINR or RF SNR of a designed plan.

    Args:
        chain: "MF" or "RF".
        plan: MixturePlan, SubcarrierPlan or a ``(p, mu4, nu_minus2)`` tuple.
        scene: Targets and receiver noise; target ``q`` is the desired one.
        n: Number of subcarriers (required for a MixturePlan).
        m: Coherently integrated symbols.
        exact_peak: MF only; use E|r0|^2 including the moment term instead of
            the (sum P)^2 approximation.
    """
    chain = check_chain(chain)
    if n is None:
        if isinstance(plan, MixturePlan):
            raise ValueError("n is required for a mixture plan")
        n = plan.chi.shape[0] if isinstance(plan, SubcarrierPlan) else len(plan[0])
    s1, s2, s4, inv = _subcarrier_sums(plan, n)
    sig = scene.targets[q].sigma_alpha_sq
    if chain == MF:
        peak = s1**2 + (s4 / m if exact_peak else 0.0)
        side = (n - 1) / m * s4 + n * s2 - s1**2
        den = scene.clutter_power(q) / (n - 1) * side + scene.noise_var / m * s1
        val = math.inf if den <= 0 else sig * peak / den
    else:
        den = scene.noise_var * inv
        val = math.inf if den <= 0 else sig * m * n * n / den
    return math.inf if val > SINR_OVERFLOW else val
