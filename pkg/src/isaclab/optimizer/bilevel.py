"""Per-subcarrier constellation selection and power on a frequency-selective channel.

For fixed prices (psi on the power budget, lambda on the mean rate) the
Lagrangian decouples over subcarriers: each one picks the class minimizing
its reduced cost minus lambda R_j / N, and its power follows a clamped
closed form.  The prices are updated by projected subgradient steps.
Every iterate's assignment is repaired to an exactly feasible power
allocation and the best repaired iterate is returned.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..constellations import ConstellationSpec, InfeasibleSubcarrierError, min_power, moments
from ..sensing import MF, RF
from .flat import (P_MAX_FACTOR, InfeasibleProblemError, as_class_specs, check_chain,
                   mf_cost_coefficients)
from .waterlevel import water_level

log = logging.getLogger(__name__)

ORACLE_LIMIT = 10**6


class DualNonConvergenceWarning(UserWarning):
    pass


def reduced_cost_phi(a_j, p_min_nj, p_max, psi):
    """min over p_min <= k <= p_max of a k^2 - psi k (three-branch closed form).

    Vectorized over any broadcastable inputs.
    """
    a, lo, hi, psi = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                           for v in (a_j, p_min_nj, p_max, psi)))
    x = psi / (2 * a)
    out = np.where(x <= lo, a * lo**2 - psi * lo,
                   np.where(x >= hi, a * hi**2 - psi * hi, -psi**2 / (4 * a)))
    return out[()] if out.ndim == 0 else out


def reduced_cost_phi_rf(nu_j, p_min_nj, p_max, psi):
    """min over p_min <= k <= p_max of nu / k - psi k.

    With omega = -psi the unconstrained minimizer is sqrt(nu / omega) when
    omega > 0, giving 2 sqrt(nu omega); otherwise the cost decreases in k
    and the cap binds.
    """
    nu, lo, hi, psi = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                            for v in (nu_j, p_min_nj, p_max, psi)))
    k = rf_clamped_power(nu, lo, hi, psi)
    out = nu / k - psi * k
    return out[()] if out.ndim == 0 else out


def mf_clamped_power(a_j, p_min, p_max, psi):
    return np.clip(np.asarray(psi, dtype=float) / (2 * np.asarray(a_j, dtype=float)),
                   p_min, p_max)


def rf_clamped_power(nu_j, p_min, p_max, psi):
    omega = -np.asarray(psi, dtype=float)
    nu = np.asarray(nu_j, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k = np.where(omega > 0, np.sqrt(nu / np.where(omega > 0, omega, 1.0)), np.inf)
    return np.clip(k, p_min, p_max)


@dataclass
class DualConfig:
    max_iter: int = 2000
    psi_scale: float = 1.0
    lam_scale: float = 1.0
    power_tol: float = 1e-4
    rate_tol: float = 1e-4
    comp_tol: float = 1e-3
    record_history: bool = True
    rate_repair: bool = True
    local_search: bool = True
    local_search_passes: int = 50
    patience: int = 300


@dataclass
class DualState:
    psi: float
    lam: float = 0.0
    step_schedule: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("rate price must be nonnegative")


@dataclass
class SubcarrierPlan:
    chain: str
    class_names: list[str]
    chi: np.ndarray
    kappa: np.ndarray
    objective: float
    rates: np.ndarray
    p_min: np.ndarray
    p_max: float
    r_min: float
    p_ave: float
    mu4: np.ndarray
    nu_minus2: np.ndarray
    channel_gains: np.ndarray | None = None
    dual: DualState | None = None
    converged: bool = True
    iterations: int = 0
    stop_reason: str = "exact"

    @property
    def assignment(self) -> np.ndarray:
        return np.argmax(self.chi, axis=1)

    @property
    def power(self) -> np.ndarray:
        return self.kappa.sum(axis=1)

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rates[self.assignment]))

    def check(self, atol: float = 1e-9) -> None:
        n = self.chi.shape[0]
        assert np.all(self.chi.sum(axis=1) == 1), "assignment not one-hot"
        assert np.all(self.kappa[self.chi == 0] == 0), "power on unassigned class"
        idx = np.arange(n), self.assignment
        scale = max(self.p_ave, 1.0)
        k = self.kappa[idx]
        assert np.all(k >= self.p_min[idx] - atol * scale), "BER floor"
        assert np.all(k <= self.p_max + atol * scale), "power cap"
        assert abs(k.mean() - self.p_ave) <= atol * scale, "power budget"
        assert self.mean_rate >= self.r_min - 1e-9, "rate"

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "classes": self.class_names,
            "assignment": self.assignment.tolist(),
            "power": self.power.tolist(),
            "objective": self.objective,
            "mean_rate": self.mean_rate,
            "converged": self.converged,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
        }


class _Problem:
    """Shared per-instance data for the bilevel solver and the oracle."""

    def __init__(self, chain, channel_gains, classes, r_min, p_ave, ber_th,
                 noise_psd_bw, m, clutter_power, p_max):
        self.chain = check_chain(chain)
        gains = np.asarray(channel_gains, dtype=float)
        if gains.ndim != 1 or gains.size < 1:
            raise ValueError("channel_gains must be a non-empty vector")
        self.n = n = gains.size
        self.gains = gains
        consts = [c for c in classes]
        specs = as_class_specs(consts)
        self.names = [s.name for s in specs]
        self.rates = np.array([s.rate for s in specs])
        self.mu4 = np.array([s.mu4 for s in specs])
        self.nu = np.array([s.nu_minus2 for s in specs])
        self.p_ave = float(p_ave)
        self.r_min = float(r_min)
        self.p_max = P_MAX_FACTOR * p_ave if p_max is None else float(p_max)
        j = len(specs)
        p_min = np.empty((n, j))
        for k, c in enumerate(consts):
            if isinstance(c, ConstellationSpec):
                for i, g in enumerate(gains):
                    try:
                        p_min[i, k] = min_power(c, g, noise_psd_bw, ber_th)
                    except InfeasibleSubcarrierError as exc:
                        raise InfeasibleSubcarrierError(f"subcarrier {i}: {exc}") from None
            else:
                # moment-only classes carry a gain-free floor; scale it by the gain
                if np.any(gains <= 0):
                    raise InfeasibleSubcarrierError("zero channel gain on some subcarrier")
                p_min[:, k] = specs[k].p_min / gains
        p_min[p_min > self.p_max] = np.inf
        self.p_min = p_min
        if chain_is_mf(self.chain):
            self.cost = mf_cost_coefficients(self.mu4, max(n, 2), m, clutter_power)
            self.w = 1.0 / (2.0 * self.cost)
        else:
            self.cost = self.nu
            self.w = np.sqrt(self.nu)
        self._precheck()

    def _precheck(self):
        if self.r_min > self.rates.max() + 1e-12:
            raise InfeasibleProblemError(
                f"r_min={self.r_min} exceeds the highest class rate {self.rates.max()}")
        floor = self.p_min.min(axis=1)
        if np.any(~np.isfinite(floor)):
            bad = int(np.flatnonzero(~np.isfinite(floor))[0])
            raise InfeasibleProblemError(f"subcarrier {bad}: no class meets the BER target "
                                         "below the power cap")
        if floor.sum() > self.n * self.p_ave * (1 + 1e-12):
            raise InfeasibleProblemError("BER power floors exceed the total budget")

    def repair(self, assign):
        """Exact optimal powers for a fixed assignment, or None if infeasible."""
        idx = np.arange(self.n), assign
        lo = self.p_min[idx]
        if not np.all(np.isfinite(lo)):
            return None
        if self.rates[assign].mean() < self.r_min - 1e-12:
            return None
        res = water_level(self.w[assign], lo, np.full(self.n, self.p_max),
                          np.ones(self.n), self.n * self.p_ave)
        if res is None:
            return None
        return res[0]

    def value(self, assign, power) -> float:
        c = self.cost[assign]
        if self.chain == MF:
            return float(np.mean(c * power**2))
        return float(np.mean(c / power))

    def plan(self, assign, power, **kw) -> SubcarrierPlan:
        j = self.rates.size
        chi = np.zeros((self.n, j), dtype=int)
        chi[np.arange(self.n), assign] = 1
        kappa = np.zeros((self.n, j))
        kappa[np.arange(self.n), assign] = power
        return SubcarrierPlan(self.chain, self.names, chi, kappa, self.value(assign, power),
                              self.rates, self.p_min, self.p_max, self.r_min, self.p_ave,
                              self.mu4, self.nu, self.gains, **kw)


def chain_is_mf(chain: str) -> bool:
    return chain == MF


def _reduced_costs(prob: _Problem, psi: float) -> np.ndarray:
    lo, hi = prob.p_min, prob.p_max
    finite = np.isfinite(lo)
    lo_safe = np.where(finite, lo, hi)
    if prob.chain == MF:
        phi = reduced_cost_phi(prob.cost[None, :], lo_safe, hi, psi)
    else:
        phi = reduced_cost_phi_rf(prob.cost[None, :], lo_safe, hi, psi)
    return np.where(finite, phi, np.inf)


def _rate_repair(prob: _Problem, assign, phi) -> np.ndarray:
    """Upgrade subcarriers until the rate target holds.

    Each step takes the move with the smallest reduced-cost increase per
    extra bit at the current prices.
    """
    assign = assign.copy()
    rows = np.arange(prob.n)
    need = prob.r_min * prob.n - prob.rates[assign].sum()
    while need > 1e-9:
        d_rate = prob.rates[None, :] - prob.rates[assign][:, None]
        d_cost = phi - phi[rows, assign][:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(d_rate > 0, d_cost / np.where(d_rate > 0, d_rate, 1.0), np.inf)
        k = int(np.argmin(ratio))
        n, j = divmod(k, prob.rates.size)
        if not np.isfinite(ratio[n, j]):
            break
        need -= prob.rates[j] - prob.rates[assign[n]]
        assign[n] = j
    return assign


def _local_search(prob: _Problem, best, passes: int):
    """Single-subcarrier class changes, accepted on exact improvement."""
    val, assign, power = best
    j = prob.rates.size
    for _ in range(passes):
        improved = False
        for n in range(prob.n):
            cur = assign[n]
            for k in range(j):
                if k == cur:
                    continue
                assign[n] = k
                p = prob.repair(assign)
                v = math.inf if p is None else prob.value(assign, p)
                if v < val * (1 - 1e-12):
                    val, power, cur, improved = v, p, k, True
                assign[n] = cur
        if not improved:
            break
    return val, assign, power


def _pricing(prob: _Problem, psi: float, lam: float):
    """Per-subcarrier pick, clamped powers and the dual function value."""
    lo, hi = prob.p_min, prob.p_max
    score = _reduced_costs(prob, psi) - lam * prob.rates[None, :] / prob.n
    assign = np.argmin(score, axis=1)
    idx = np.arange(prob.n), assign
    if prob.chain == MF:
        kappa = mf_clamped_power(prob.cost[assign], lo[idx], hi, psi)
    else:
        kappa = rf_clamped_power(prob.cost[assign], lo[idx], hi, psi)
    dual = float(score[idx].sum() + psi * prob.n * prob.p_ave + lam * prob.r_min)
    return assign, kappa, dual


def bilevel_solve(chain: str, channel_gains, classes: Sequence, r_min: float, p_ave: float,
                  ber_th: float = 1e-4, dual_cfg: DualConfig | None = None,
                  noise_psd_bw: float = 1.0, m: int = 1, clutter_power: float = 1.0,
                  p_max: float | None = None) -> SubcarrierPlan:
    """Lagrangian dual heuristic for joint per-subcarrier selection and power.

    Args:
        chain: "MF" or "RF".
        channel_gains: |H_n|^2 per subcarrier.
        classes: ConstellationSpec entries (BER floors derived per gain).
        r_min: Required mean bits per subcarrier.
        p_ave: Mean power per subcarrier.
        ber_th: Uncoded BER target.
        dual_cfg: Iteration cap, step scales and stopping tolerances.
        noise_psd_bw: N0 times the subcarrier spacing.

    Returns:
        The best feasible repaired iterate as a SubcarrierPlan.
    """
    cfg = dual_cfg or DualConfig()
    prob = _Problem(chain, channel_gains, classes, r_min, p_ave, ber_th, noise_psd_bw,
                    m, clutter_power, p_max)
    n, budget = prob.n, prob.n * prob.p_ave
    r_span = max(float(np.ptp(prob.rates)), 1.0)
    if prob.chain == MF:
        psi_ref = 2.0 * float(np.mean(prob.cost)) * prob.p_ave
        lam_ref = n * float(np.mean(prob.cost)) * prob.p_ave**2 / r_span
    else:
        psi_ref = float(np.mean(prob.cost)) / prob.p_ave**2
        lam_ref = n * 2.0 * float(np.mean(prob.cost)) / prob.p_ave / r_span
    sign = 1.0 if prob.chain == MF else -1.0
    state = DualState(psi=sign * psi_ref, lam=0.0)
    best = None
    seen: dict[bytes, float] = {}
    converged = False
    stop_reason = "iteration cap"
    last_gain = 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        assign, kappa, dual = _pricing(prob, state.psi, state.lam)
        cand = assign
        if cfg.rate_repair and prob.rates[assign].mean() < prob.r_min - 1e-12:
            cand = _rate_repair(prob, assign, _reduced_costs(prob, state.psi))
        key = cand.astype(np.int16).tobytes()
        if key not in seen:
            power = prob.repair(cand)
            seen[key] = math.inf if power is None else prob.value(cand, power)
            if power is not None and (best is None or seen[key] < best[0]):
                best = (seen[key], cand.copy(), power)
                last_gain = it
        p_gap = budget - float(kappa.sum())
        r_gap = prob.r_min - float(prob.rates[assign].mean())
        comp = state.lam * abs(r_gap) / max(lam_ref, 1e-300)
        step = cfg.psi_scale / math.sqrt(it)
        state.step_schedule.append(step)
        if cfg.record_history:
            state.history.append({"iter": it, "psi": state.psi, "lam": state.lam,
                                  "power_gap": p_gap, "rate_gap": r_gap, "dual": dual,
                                  "best": best[0] if best else math.inf})
        if (abs(p_gap) <= cfg.power_tol * budget and r_gap <= cfg.rate_tol
                and comp <= cfg.comp_tol):
            converged, stop_reason = True, "converged"
            break
        if best is not None and it - last_gain >= cfg.patience:
            stop_reason = "stalled"
            break
        state.psi += step * psi_ref * p_gap / budget
        state.lam = max(0.0, state.lam + cfg.lam_scale * step * lam_ref * r_gap / r_span)
    if best is None:
        # floor-driven construction: cheapest BER floors, then cheapest upgrades
        cand = _rate_repair(prob, np.argmin(prob.p_min, axis=1), prob.p_min)
        power = prob.repair(cand)
        if power is not None:
            best = (prob.value(cand, power), cand, power)
    if best is None:
        raise InfeasibleProblemError(
            "no feasible assignment reached by the dual iterations "
            f"(r_min={prob.r_min}, p_ave={prob.p_ave})")
    if cfg.local_search:
        best = _local_search(prob, best, cfg.local_search_passes)
    if stop_reason == "iteration cap":
        warnings.warn(f"dual iteration cap {cfg.max_iter} reached; "
                      "returning the best feasible iterate", DualNonConvergenceWarning,
                      stacklevel=2)
    return prob.plan(best[1], best[2], dual=state, converged=converged, iterations=it,
                     stop_reason=stop_reason)


def exhaustive_oracle(chain: str, channel_gains, classes: Sequence, r_min: float,
                      p_ave: float, ber_th: float = 1e-4, noise_psd_bw: float = 1.0,
                      m: int = 1, clutter_power: float = 1.0,
                      p_max: float | None = None) -> SubcarrierPlan:
    """Global optimum by enumerating every rate-feasible assignment."""
    prob = _Problem(chain, channel_gains, classes, r_min, p_ave, ber_th, noise_psd_bw,
                    m, clutter_power, p_max)
    j = prob.rates.size
    if j**prob.n > ORACLE_LIMIT:
        raise ValueError(f"J^N = {j}^{prob.n} exceeds the oracle limit {ORACLE_LIMIT}")
    best = None
    for assign in itertools.product(range(j), repeat=prob.n):
        a = np.fromiter(assign, dtype=int, count=prob.n)
        if prob.rates[a].mean() < prob.r_min - 1e-12:
            continue
        power = prob.repair(a)
        if power is None:
            continue
        v = prob.value(a, power)
        if best is None or v < best[0]:
            best = (v, a, power)
    if best is None:
        raise InfeasibleProblemError("no assignment satisfies rate, BER and budget")
    return prob.plan(best[1], best[2], iterations=0)


def equal_power_within_blocks_check(plan, tol: float = 1e-4, mu4=None, nu_minus2=None,
                                    channel_gains=None, exclude_pinned: bool = True) -> bool:
    """True iff subcarriers with identical (mu4, nu, gain, class) share one power.

    Args:
        plan: SubcarrierPlan, or a PowerAllocation / power vector together
            with ``mu4`` (and optionally ``nu_minus2``, ``channel_gains``).
        tol: Allowed relative spread within a block.
        exclude_pinned: For a SubcarrierPlan, ignore subcarriers held at
            their BER power floor.
    """
    if isinstance(plan, SubcarrierPlan):
        p = plan.power
        assign = plan.assignment
        keys = np.column_stack([plan.mu4[assign], plan.nu_minus2[assign], assign,
                                plan.channel_gains if plan.channel_gains is not None
                                else np.zeros(p.size)])
        if exclude_pinned:
            floor = plan.p_min[np.arange(p.size), assign]
            keep = ~np.isclose(p, floor, rtol=1e-9, atol=0)
            p, keys = p[keep], keys[keep]
    else:
        p = np.asarray(plan, dtype=float)
        if mu4 is None:
            raise ValueError("mu4 is required for a bare power vector")
        cols = [np.broadcast_to(np.asarray(v, dtype=float), p.shape)
                for v in (mu4, nu_minus2 if nu_minus2 is not None else 0.0,
                          channel_gains if channel_gains is not None else 0.0)]
        keys = np.column_stack(cols)
    if p.size == 0:
        return True
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    for b in np.unique(inv):
        blk = p[inv == b]
        if np.ptp(blk) > tol * max(float(np.max(np.abs(blk))), 1e-300):
            return False
    return True


def constellations_moments(classes: Sequence[ConstellationSpec]):
    """(mu4, nu_minus2, rate) arrays for a list of constellations."""
    mo = [moments(c) for c in classes]
    return (np.array([x.mu4 for x in mo]), np.array([x.nu_minus2 for x in mo]),
            np.array([x.rate_bits for x in mo], dtype=float))
