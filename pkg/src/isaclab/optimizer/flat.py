"""Joint constellation-mixture and power design on a flat channel.

With identical subcarrier gains the design variables are the fraction
eta_j of subcarriers using class j and its power P_j.  In the perspective
variables theta_j = eta_j P_j both sensing surrogates are convex:

    MF: min sum_j c_j theta_j^2 / eta_j
    RF: min sum_j nu_j eta_j^2 / theta_j

subject to sum eta = 1, sum theta = P_ave, sum eta_j R_j >= r_min and
eta_j P_min_j <= theta_j <= eta_j P_max.  An optimal eta exists with at
most three nonzero entries, so the solver enumerates supports of size one,
two and three and solves each reduced problem exactly.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..constellations import ConstellationSpec, Moments, min_power, moments
from ..sensing import MF, RF
from .waterlevel import water_level

log = logging.getLogger(__name__)

P_MAX_FACTOR = 1e3
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleProblemError(ValueError):
    """The rate, BER and power constraints admit no solution."""


@dataclass(frozen=True)
class ClassSpec:
    """One candidate constellation as seen by the optimizer."""

    name: str
    mu4: float
    nu_minus2: float
    rate: float
    p_min: float = 0.0

    @classmethod
    def from_constellation(cls, c: ConstellationSpec, p_min: float = 0.0) -> "ClassSpec":
        mo = moments(c)
        return cls(c.id, mo.mu4, mo.nu_minus2, float(mo.rate_bits), float(p_min))

    @classmethod
    def for_channel(cls, c: ConstellationSpec, channel_gain_sq: float,
                    noise_psd_bw: float, ber_th: float) -> "ClassSpec":
        return cls.from_constellation(c, min_power(c, channel_gain_sq, noise_psd_bw, ber_th))


def as_class_specs(classes) -> list[ClassSpec]:
    """Accept ClassSpec, ConstellationSpec or (Moments, P_min) entries."""
    out = []
    for i, c in enumerate(classes):
        if isinstance(c, ClassSpec):
            out.append(c)
        elif isinstance(c, ConstellationSpec):
            out.append(ClassSpec.from_constellation(c))
        else:
            mo, p_min = c
            if not isinstance(mo, Moments):
                raise TypeError(f"class {i}: expected (Moments, P_min), got {type(mo)!r}")
            out.append(ClassSpec(f"class{i}", mo.mu4, mo.nu_minus2, float(mo.rate_bits),
                                 float(p_min)))
    if not out:
        raise ValueError("need at least one constellation class")
    return out


def mf_cost_coefficients(mu4, n: int, m: int, clutter_power: float = 1.0) -> np.ndarray:
    """c_j = S (N/M)(mu4_j - 1) + S N^2/(N - 1), S the clutter power."""
    mu4 = np.asarray(mu4, dtype=float)
    return clutter_power * (n / m * (mu4 - 1.0) + n * n / (n - 1.0))


def check_chain(chain: str) -> str:
    c = str(chain).upper()
    if c not in (MF, RF):
        raise ValueError(f"unknown chain {chain!r}; expected MF or RF")
    return c


@dataclass
class MixturePlan:
    chain: str
    classes: list[ClassSpec]
    eta: np.ndarray
    p_per_class: np.ndarray
    theta: np.ndarray
    objective: float
    r_min: float = 0.0
    p_ave: float = 1.0
    p_max: float = math.inf
    diagnostics: dict = field(default_factory=dict)

    @property
    def rate(self) -> float:
        return float(np.dot(self.eta, [c.rate for c in self.classes]))

    def check(self, atol: float = 1e-9) -> None:
        """Raise AssertionError if any constraint is violated beyond ``atol``."""
        eta, th = self.eta, self.theta
        scale = max(self.p_ave, 1.0)
        assert np.all(eta >= -atol) and abs(eta.sum() - 1) <= atol, "eta off simplex"
        assert np.all(th >= -atol * scale), "negative theta"
        assert abs(th.sum() - self.p_ave) <= atol * scale, "power budget"
        p_min = np.array([c.p_min for c in self.classes])
        assert np.all(th >= eta * p_min - atol * scale), "BER floor"
        assert np.all(th <= eta * self.p_max + atol * scale), "power cap"
        assert self.rate >= self.r_min - 1e-9, "rate"

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "classes": [c.name for c in self.classes],
            "eta": self.eta.tolist(),
            "p_per_class": self.p_per_class.tolist(),
            "theta": self.theta.tolist(),
            "objective": self.objective,
            "rate": self.rate,
            "support_size": support_size(self),
            "diagnostics": self.diagnostics,
        }


def support_size(plan: MixturePlan, tol: float = 1e-8) -> int:
    return int(np.sum(plan.eta > tol))


class _Evaluator:
    """Exact optimal value for a fixed eta (inner power problem)."""

    def __init__(self, chain, classes, p_ave, p_max, n, m, clutter_power):
        self.chain = chain
        self.p_ave = p_ave
        self.lo = np.array([c.p_min for c in classes], dtype=float)
        self.hi = np.full(len(classes), float(p_max))
        self.rate = np.array([c.rate for c in classes], dtype=float)
        if chain == MF:
            self.cost = mf_cost_coefficients([c.mu4 for c in classes], n, m, clutter_power)
            if np.any(self.cost <= 0):
                raise ValueError("MF cost coefficients must be positive; check clutter_power")
            self.w = 1.0 / (2.0 * self.cost)
        else:
            self.cost = np.array([c.nu_minus2 for c in classes], dtype=float)
            self.w = np.sqrt(self.cost)

    def powers(self, eta):
        res = water_level(self.w, self.lo, self.hi, eta, self.p_ave)
        return None if res is None else res[0]

    def value(self, eta, p) -> float:
        on = eta > 0
        if self.chain == MF:
            return float(np.sum(self.cost[on] * eta[on] * p[on] ** 2))
        return float(np.sum(self.cost[on] * eta[on] / p[on]))

    def __call__(self, eta) -> float:
        p = self.powers(eta)
        return math.inf if p is None else self.value(eta, p)


def _line_interval(eta0, d, ev: _Evaluator, r_min: float):
    """Range of t keeping eta0 + t d nonnegative, rate- and power-feasible."""
    lo_t, hi_t = -math.inf, math.inf

    def cut(a0, a1, bound):  # a0 + t a1 <= bound
        nonlocal lo_t, hi_t
        if abs(a1) < 1e-15:
            if a0 > bound + 1e-12 * max(1.0, abs(bound)):
                lo_t, hi_t = 1.0, 0.0
            return
        t = (bound - a0) / a1
        if a1 > 0:
            hi_t = min(hi_t, t)
        else:
            lo_t = max(lo_t, t)

    for i in range(eta0.size):
        cut(-eta0[i], -d[i], 0.0)
    cut(-np.dot(eta0, ev.rate), -np.dot(d, ev.rate), -r_min)
    cut(np.dot(eta0, ev.lo), np.dot(d, ev.lo), ev.p_ave)
    cut(-np.dot(eta0, ev.hi), -np.dot(d, ev.hi), -ev.p_ave)
    return lo_t, hi_t


def _golden_min(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Minimize a convex function on [a, b]; endpoints are also checked."""
    best = min(((f(a), a), (f(b), b)))
    if b - a <= tol:
        return best
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    mid = 0.5 * (a + b)
    return min(best, (f1, x1), (f2, x2), (f(mid), mid))


def _segment_search(ev, eta0, d, r_min):
    t0, t1 = _line_interval(eta0, d, ev, r_min)
    if not t0 <= t1:
        return None
    # snap tiny negatives produced by the interval arithmetic
    def point(t):
        return np.clip(eta0 + t * d, 0.0, None)

    val, t = _golden_min(lambda t: ev(point(t)), t0, t1)
    if not math.isfinite(val):
        return None
    return val, point(t)


def _candidates(ev: _Evaluator, j: int, r_min: float):
    """Yield (value, eta) for every support of size <= 3."""
    rate = ev.rate
    for i in range(j):
        eta = np.zeros(j)
        eta[i] = 1.0
        if rate[i] >= r_min - 1e-12:
            v = ev(eta)
            if math.isfinite(v):
                yield v, eta, (i,)
    for a, b in itertools.combinations(range(j), 2):
        eta0 = np.zeros(j)
        eta0[b] = 1.0
        d = np.zeros(j)
        d[a], d[b] = 1.0, -1.0
        res = _segment_search(ev, eta0, d, r_min)
        if res is not None:
            yield res[0], res[1], (a, b)
    for tri in itertools.combinations(range(j), 3):
        idx = list(tri)
        r3 = rate[idx]
        # rate-active line: sum eta = 1, sum eta R = r_min
        d3 = np.cross(np.ones(3), r3)
        if np.linalg.norm(d3) < 1e-12:
            continue
        a_mat = np.vstack([np.ones(3), r3])
        p3, *_ = np.linalg.lstsq(a_mat, np.array([1.0, r_min]), rcond=None)
        eta0 = np.zeros(j)
        d = np.zeros(j)
        eta0[idx] = p3
        d[idx] = d3 / np.linalg.norm(d3)
        res = _segment_search(ev, eta0, d, r_min)
        if res is not None:
            yield res[0], res[1], tri


def flat_fading_solve(chain: str, classes: Sequence, r_min: float, p_ave: float,
                      n: int = 64, m: int = 1, clutter_power: float = 1.0,
                      p_max: float | None = None, support_tol: float = 1e-10) -> MixturePlan:
    """Optimal constellation mixture and per-class power for a flat channel.

    Args:
        chain: "MF" or "RF".
        classes: ClassSpec, ConstellationSpec or (Moments, P_min) entries.
        r_min: Required mean bits per subcarrier.
        p_ave: Mean power per subcarrier.
        n, m: Subcarriers and integrated symbols; they enter the MF weights c_j.
        clutter_power: Sum of the non-desired target variances in c_j.
        p_max: Per-subcarrier cap, default 1e3 * p_ave.

    Returns:
        MixturePlan with support size at most three.

    Raises:
        InfeasibleProblemError: if no mixture satisfies rate, BER and budget.
    """
    chain = check_chain(chain)
    cls = as_class_specs(classes)
    p_max = P_MAX_FACTOR * p_ave if p_max is None else float(p_max)
    if not p_ave > 0:
        raise ValueError("p_ave must be positive")
    rates = np.array([c.rate for c in cls])
    if r_min > rates.max() + 1e-12:
        raise InfeasibleProblemError(
            f"r_min={r_min} exceeds the highest class rate {rates.max()}")
    ev = _Evaluator(chain, cls, p_ave, p_max, n, m, clutter_power)
    best = None
    for val, eta, sup in _candidates(ev, len(cls), r_min):
        if best is None or val < best[0] - 1e-14 * abs(val):
            best = (val, eta, sup)
    if best is None:
        raise InfeasibleProblemError(
            "no mixture meets the rate target with BER-limited powers inside the budget")
    _, eta, sup = best
    eta = np.where(eta > support_tol, eta, 0.0)
    eta /= eta.sum()
    p = ev.powers(eta)
    if p is None:  # pruning a negligible weight broke the budget; keep the raw eta
        eta = best[1]
        p = ev.powers(eta)
    theta = eta * p
    p = np.where(eta > 0, p, 0.0)
    plan = MixturePlan(chain, cls, eta, p, theta, ev.value(eta, p), float(r_min),
                       float(p_ave), p_max,
                       {"support": list(sup), "rate_active": bool(abs(
                           np.dot(eta, rates) - r_min) <= 1e-9)})
    if support_size(plan) == 3:
        log.info("three-class support %s at r_min=%g (rate constraint %s)", sup, r_min,
                 "active" if plan.diagnostics["rate_active"] else "inactive")
    return plan


def surrogate_objective_from_plan(plan: MixturePlan, n: int, m: int,
                                  clutter_power: float = 1.0) -> float:
    """Recompute the plan objective from eta and theta (perspective form)."""
    on = plan.eta > 0
    if plan.chain == MF:
        c = mf_cost_coefficients([k.mu4 for k in plan.classes], n, m, clutter_power)
        return float(np.sum(c[on] * plan.theta[on] ** 2 / plan.eta[on]))
    nu = np.array([k.nu_minus2 for k in plan.classes])
    return float(np.sum(nu[on] * plan.eta[on] ** 2 / plan.theta[on]))
