"""Experiment pipelines; each one composes library operations over a sweep grid."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..constellations import ConstellationSpec, ber, builtin
from ..delay_estimation import PencilConfig, rmse_benchmark
from ..ofdm import PowerAllocation
from ..optimizer import (ClassSpec, DualConfig, InfeasibleProblemError, bilevel_solve,
                         flat_fading_solve, mf_power_rule, rf_power_rule, support_size,
                         surrogate_sinr)
from ..sensing import (SensingLawInputs, as_seed_sequence, iterate_frames, mean_sidelobe_power,
                       moment_vectors, sidelobe_floor_ratio, sinr_mf, snr_rf)
from .scenario import Scenario


def db(x: float) -> float:
    if x <= 0:
        return -math.inf
    return 10.0 * math.log10(x)


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class PipelineResult:
    tables: dict[str, Table]
    infeasible: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def map_over_grid(fn: Callable, grid, threads: int = 1) -> list:
    """Evaluate ``fn(index, value)`` for every grid point, results in grid order."""
    items = list(enumerate(grid))
    if threads <= 1:
        return [fn(i, g) for i, g in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: fn(*a), items))


def mix_map(mix: dict[str, float], n: int, resolve=builtin) -> list[ConstellationSpec]:
    """Contiguous per-subcarrier alphabet map; counts are rounded largest-remainder."""
    names = list(mix)
    frac = np.array([mix[k] for k in names], dtype=float)
    raw = frac * n
    counts = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - counts), kind="stable")[: n - counts.sum()]:
        counts[i] += 1
    out = []
    for name, c in zip(names, counts):
        out.extend([resolve(name)] * int(c))
    return out


def _flat_classes(sc: Scenario) -> list[ClassSpec]:
    return [ClassSpec.for_channel(c, sc.flat_gain, sc.noise_psd_bw, sc.ber_th)
            for c in sc.classes]


def _gains(sc: Scenario) -> np.ndarray:
    g = sc.channel_gains
    if g == "flat":
        return np.full(sc.n, sc.flat_gain)
    if isinstance(g, dict):
        rng = np.random.default_rng(as_seed_sequence(sc.seed))
        return rng.exponential(g["rayleigh"]["mean"], sc.n)
    return np.asarray(g, dtype=float)


def mixture_sweep(sc: Scenario, threads: int = 1) -> PipelineResult:
    """Optimal flat-channel constellation proportions versus r_min."""
    cls = _flat_classes(sc)
    names = [c.name for c in cls]
    header = (["r_min", "chain", "feasible"] + [f"eta_{k}" for k in names]
              + [f"p_{k}" for k in names] + ["objective", "support_size", "sinr", "sinr_db"])
    m = sc.ofdm.n_symbols

    def point(i, r):
        rows, bad = [], []
        for chain in sc.chains:
            try:
                plan = flat_fading_solve(chain, cls, r, sc.ofdm.p_ave, n=sc.n, m=m,
                                         clutter_power=sc.clutter_power)
            except InfeasibleProblemError as exc:
                rows.append([r, chain, 0] + [math.nan] * (2 * len(cls) + 4))
                bad.append({"r_min": r, "chain": chain, "reason": str(exc)})
                continue
            s = surrogate_sinr(chain, plan, sc.scene, sc.n, m) if sc.scene.targets else math.nan
            rows.append([r, chain, 1] + plan.eta.tolist() + plan.p_per_class.tolist()
                        + [plan.objective, support_size(plan), s, db(s)])
        return rows, bad

    return _collect("mixture", header, map_over_grid(point, sc.grid, threads))


def subcarrier_plan(sc: Scenario, threads: int = 1) -> PipelineResult:
    """Per-subcarrier constellation and power on a (frequency-selective) channel."""
    gains = _gains(sc)
    header = ["r_min", "chain", "subcarrier", "gain", "gain_db", "constellation", "power",
              "power_db"]
    summary_header = ["r_min", "chain", "feasible", "objective", "mean_rate", "iterations",
                      "stop_reason", "sinr", "sinr_db"]
    m = sc.ofdm.n_symbols
    cfg = sc.options.get("dual", {})

    def point(i, r):
        rows, summ, bad = [], [], []
        for chain in sc.chains:
            try:
                plan = bilevel_solve(chain, gains, sc.classes, r, sc.ofdm.p_ave, sc.ber_th,
                                     DualConfig(**cfg), sc.noise_psd_bw, m, sc.clutter_power)
            except InfeasibleProblemError as exc:
                summ.append([r, chain, 0, math.nan, math.nan, 0, "infeasible", math.nan,
                             math.nan])
                bad.append({"r_min": r, "chain": chain, "reason": str(exc)})
                continue
            pw = plan.power
            for n, (g, a, p) in enumerate(zip(gains, plan.assignment, pw)):
                rows.append([r, chain, n, float(g), db(g), plan.class_names[a], float(p),
                             db(p)])
            s = surrogate_sinr(chain, plan, sc.scene, m=m) if sc.scene.targets else math.nan
            summ.append([r, chain, 1, plan.objective, plan.mean_rate, plan.iterations,
                         plan.stop_reason, s, db(s)])
        return (rows, summ), bad

    results = map_over_grid(point, sc.grid, threads)
    out = PipelineResult({"subcarriers": Table(header), "summary": Table(summary_header)})
    for (rows, summ), bad in results:
        out.tables["subcarriers"].rows.extend(rows)
        out.tables["summary"].rows.extend(summ)
        out.infeasible.extend(bad)
    return out


def rmse_vs_snr(sc: Scenario, threads: int = 1) -> PipelineResult:
    """Matrix Pencil range RMSE versus SNR per chain and mix.

    ``options.power_rule`` selects "optimal" (each chain's sensing-optimal
    rule, the default) or "equal" per-subcarrier power.
    """
    mixes = {k: mix_map(v, sc.n) for k, v in sc.mixes.items()}
    rule = sc.options.get("power_rule", "optimal")
    if rule not in ("optimal", "equal"):
        raise ValueError(f"options.power_rule must be 'optimal' or 'equal', got {rule!r}")
    m = sc.ofdm.n_symbols
    powers = {}
    for chain in sc.chains:
        for k, cmap in mixes.items():
            mu4, nu = moment_vectors(cmap)
            if rule == "equal":
                powers[chain, k] = np.full(sc.n, sc.ofdm.p_ave)
            elif chain == "MF":
                powers[chain, k] = np.asarray(mf_power_rule(mu4, m, sc.ofdm.p_ave))
            else:
                powers[chain, k] = np.asarray(rf_power_rule(nu, sc.ofdm.p_ave))
    cfg = PencilConfig(model_order=int(sc.options.get("model_order", len(sc.scene.targets))))
    seeds = as_seed_sequence(sc.seed).spawn(len(sc.grid))

    def point(i, snr):
        rows = []
        for chain in sc.chains:
            rows += rmse_benchmark(sc.scene, chain, mixes, None, [snr], sc.trials, seeds[i],
                                   m=m, cfg=cfg, sample_interval=sc.ofdm.sample_interval,
                                   powers={k: powers[chain, k] for k in mixes})
        return rows, []

    header = ["snr_db", "chain", "mix_id", "rmse_samples", "rmse_meters", "trials"]
    res = map_over_grid(point, sc.grid, threads)
    rows = [[r.snr_db, r.chain, r.mix_id, r.rmse_samples, r.rmse_meters, r.trials]
            for batch, _ in res for r in batch]
    return PipelineResult({"rmse": Table(header, rows)}, summary={"power_rule": rule})


def tradeoff_curve(sc: Scenario, threads: int = 1) -> PipelineResult:
    """Designed-plan sensing surrogate versus r_min (flat or selective channel)."""
    m = sc.ofdm.n_symbols
    flat = sc.channel_gains == "flat"
    cls = _flat_classes(sc) if flat else None
    gains = None if flat else _gains(sc)
    header = ["r_min", "chain", "feasible", "objective", "sinr", "sinr_db"]

    def point(i, r):
        rows, bad = [], []
        for chain in sc.chains:
            try:
                if flat:
                    plan = flat_fading_solve(chain, cls, r, sc.ofdm.p_ave, n=sc.n, m=m,
                                             clutter_power=sc.clutter_power)
                    s = surrogate_sinr(chain, plan, sc.scene, sc.n, m)
                else:
                    plan = bilevel_solve(chain, gains, sc.classes, r, sc.ofdm.p_ave,
                                         sc.ber_th, None, sc.noise_psd_bw, m, sc.clutter_power)
                    s = surrogate_sinr(chain, plan, sc.scene, m=m)
            except InfeasibleProblemError as exc:
                rows.append([r, chain, 0, math.nan, math.nan, math.nan])
                bad.append({"r_min": r, "chain": chain, "reason": str(exc)})
                continue
            rows.append([r, chain, 1, plan.objective, s, db(s)])
        return rows, bad

    return _collect("tradeoff", header, map_over_grid(point, sc.grid, threads))


def coherent_gain(sc: Scenario, threads: int = 1) -> PipelineResult:
    """MF sidelobe floor, relative to the peak, versus integrated symbols M."""
    p = np.full(sc.n, sc.ofdm.p_ave)
    guard = int(sc.options.get("guard", 0))
    peaks = [int(round(t.tau)) for t in sc.scene.targets]
    seeds = as_seed_sequence(sc.seed).spawn(len(sc.grid))
    header = ["m", "mix_id", "floor", "floor_db", "theory", "theory_db", "trials"]

    def point(i, m):
        m = int(m)
        rows = []
        for ss, (mix_id, mix) in zip(seeds[i].spawn(len(sc.mixes)), sc.mixes.items()):
            cmap = mix_map(mix, sc.n)
            side = peak = 0.0
            for fb in iterate_frames("MF", cmap, p, sc.scene, m, sc.trials, ss):
                side += float(np.sum(mean_sidelobe_power(fb.bins, peaks, guard)))
                peak += float(np.sum(np.abs(fb.desired[:, 0]) ** 2))
            floor = side / peak
            mu4, _ = moment_vectors(cmap)
            theory = sidelobe_floor_ratio(p, mu4, sc.scene, m)
            rows.append([m, mix_id, floor, db(floor), theory, db(theory), sc.trials])
        return rows, []

    return _collect("coherent_gain", header, map_over_grid(point, sc.grid, threads))


def qpsk_fraction_sweep(sc: Scenario, threads: int = 1) -> PipelineResult:
    """Sensing metric and uncoded throughput as QPSK replaces a higher-order class."""
    other = builtin(sc.options.get("other", "16QAM"))
    q = builtin("QPSK")
    p = np.full(sc.n, sc.ofdm.p_ave)
    gamma = sc.flat_gain * sc.ofdm.p_ave / sc.noise_psd_bw
    m = sc.ofdm.n_symbols
    header = ["qpsk_fraction", "r_com", "ber", "throughput", "sinr_mf", "sinr_mf_db",
              "snr_rf", "snr_rf_db"]

    def point(i, f):
        cmap = mix_map({"QPSK": f, other.id: 1.0 - f}, sc.n,
                       resolve=lambda k: q if k == "QPSK" else other)
        bits = np.array([c.bits_per_symbol for c in cmap], dtype=float)
        errs = np.array([float(ber(c, gamma)) for c in cmap])
        r_com = float(bits.mean())
        ber_avg = float(np.sum(bits * errs) / np.sum(bits))
        inp = SensingLawInputs.from_map(cmap, PowerAllocation(p), sc.scene, m)
        s_mf, s_rf = sinr_mf(inp), snr_rf(inp)
        return [[f, r_com, ber_avg, r_com * (1 - ber_avg), s_mf, db(s_mf), s_rf, db(s_rf)]], []

    return _collect("qpsk_fraction", header, map_over_grid(point, sc.grid, threads))


def _collect(name: str, header: list[str], results) -> PipelineResult:
    out = PipelineResult({name: Table(header)})
    for rows, bad in results:
        out.tables[name].rows.extend(rows)
        out.infeasible.extend(bad)
    return out


PIPELINE_FUNCS = {
    "mixture_sweep": mixture_sweep,
    "subcarrier_plan": subcarrier_plan,
    "rmse_vs_snr": rmse_vs_snr,
    "tradeoff_curve": tradeoff_curve,
    "coherent_gain": coherent_gain,
    "qpsk_fraction_sweep": qpsk_fraction_sweep,
}
