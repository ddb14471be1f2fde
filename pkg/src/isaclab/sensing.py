"""Matched and reciprocal filtering, coherent integration and the sensing laws.

Closed forms here are evaluated for arbitrary per-subcarrier power ``p`` and
per-subcarrier constellation moments ``mu4`` / ``nu_minus2``.  The Monte-Carlo
helpers draw symbols, run the same receive chains used for ranging, and
report estimates with standard errors so the closed forms can be checked.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .constellations import ConstellationSpec, moments
from .ofdm import SensingScene, dft, draw_alphas, draw_grid, idft

MF = "MF"
RF = "RF"
SINR_OVERFLOW = 1e12


@dataclass
class RangeProfile:
    bins: np.ndarray
    chain: str
    m_integrated: int = 1

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=complex)
        if self.bins.ndim != 1:
            raise ValueError("range profile bins must be one-dimensional")
        if self.chain not in (MF, RF):
            raise ValueError(f"unknown chain {self.chain!r}")
        if self.m_integrated < 1:
            raise ValueError("m_integrated must be >= 1")

    @property
    def n(self) -> int:
        return self.bins.size

    def magnitude_db(self) -> np.ndarray:
        mag = np.abs(self.bins)
        with np.errstate(divide="ignore"):
            return 20 * np.log10(mag)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "re", "im", "magnitude_db"])
            for i, (z, db) in enumerate(zip(self.bins, self.magnitude_db())):
                w.writerow([i, repr(float(z.real)), repr(float(z.imag)), repr(float(db))])


@dataclass
class SensingLawInputs:
    p: np.ndarray
    mu4: np.ndarray
    nu_minus2: np.ndarray
    scene: SensingScene
    m: int = 1

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.mu4 = np.broadcast_to(np.asarray(self.mu4, dtype=float), self.p.shape)
        self.nu_minus2 = np.broadcast_to(np.asarray(self.nu_minus2, dtype=float), self.p.shape)
        if np.any(self.mu4 < 1 - 1e-12) or np.any(self.nu_minus2 < 1 - 1e-12):
            raise ValueError("mu4 and nu_minus2 must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @classmethod
    def from_map(cls, constellation_map: Sequence[ConstellationSpec], p, scene, m=1):
        mu4, nu = moment_vectors(constellation_map)
        return cls(p, mu4, nu, scene, m)


def moment_vectors(constellation_map: Sequence[ConstellationSpec]):
    """Per-subcarrier (mu4, nu_minus2) arrays for an alphabet map."""
    cache = {}
    mu4 = np.empty(len(constellation_map))
    nu = np.empty(len(constellation_map))
    for i, c in enumerate(constellation_map):
        if id(c) not in cache:
            cache[id(c)] = moments(c)
        mu4[i] = cache[id(c)].mu4
        nu[i] = cache[id(c)].nu_minus2
    return mu4, nu


# -- receive chains ------------------------------------------------------------

def mf_bins(y_spec, x_spec) -> np.ndarray:
    """Matched-filter output over delay: unitary IDFT of sqrt(N) Y conj(X)."""
    y_spec = np.asarray(y_spec)
    x_spec = np.asarray(x_spec)
    if y_spec.shape != x_spec.shape:
        raise ValueError(f"shape mismatch {y_spec.shape} vs {x_spec.shape}")
    n = y_spec.shape[-1]
    return idft(math.sqrt(n) * y_spec * np.conj(x_spec))


def rf_spectrum(y_spec, x_spec, epsilon: float = 0.0) -> np.ndarray:
    """Per-bin reciprocal filter Y conj(X) / (|X|^2 + epsilon)."""
    y_spec = np.asarray(y_spec)
    x_spec = np.asarray(x_spec)
    if y_spec.shape != x_spec.shape:
        raise ValueError(f"shape mismatch {y_spec.shape} vs {x_spec.shape}")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    den = np.abs(x_spec) ** 2 + epsilon
    if np.any(den == 0):
        raise ZeroDivisionError("reciprocal filter hit |X[n]| = 0 with epsilon = 0")
    return y_spec * np.conj(x_spec) / den


def rf_bins(y_spec, x_spec, epsilon: float = 0.0) -> np.ndarray:
    return idft(rf_spectrum(y_spec, x_spec, epsilon))


def matched_filter(y_spec, x_spec) -> RangeProfile:
    return RangeProfile(mf_bins(y_spec, x_spec), MF)


def reciprocal_filter(y_spec, x_spec, epsilon: float = 0.0) -> RangeProfile:
    return RangeProfile(rf_bins(y_spec, x_spec, epsilon), RF)


def coherent_integrate(profiles: Sequence[RangeProfile]) -> RangeProfile:
    """Complex mean of per-symbol profiles."""
    if not profiles:
        raise ValueError("nothing to integrate")
    chains = {p.chain for p in profiles}
    if len(chains) != 1:
        raise ValueError(f"cannot integrate mixed chains {sorted(chains)}")
    sizes = {p.n for p in profiles}
    if len(sizes) != 1:
        raise ValueError("profiles differ in length")
    total = sum(p.m_integrated for p in profiles)
    bins = np.mean([p.bins for p in profiles], axis=0)
    return RangeProfile(bins, chains.pop(), total)


# -- autocorrelation -------------------------------------------------------------

def acf(p, s) -> np.ndarray:
    """Periodic ACF r_k = sum_n P_n |s_n|^2 exp(j 2 pi n k / N), over the last axis."""
    w = np.asarray(p) * np.abs(np.asarray(s)) ** 2
    return w.shape[-1] * np.fft.ifft(w, axis=-1)


@dataclass
class AcfPowerEstimate:
    """Monte-Carlo estimates of E|r_bar_k|^2 with standard errors."""

    mean: np.ndarray
    stderr: np.ndarray
    esl: float
    esl_stderr: float
    sidelobe_sum: float
    sidelobe_sum_stderr: float
    trials: int


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Fresh SeedSequence; copying an existing one keeps spawning reproducible."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


def _batch_plan(trials: int, per_trial: int, seed, budget: int = 1 << 21):
    """Fixed batch sizes with one child SeedSequence per batch (deterministic)."""
    size = max(1, min(trials, budget // max(per_trial, 1)))
    n_batches = -(-trials // size)
    for b, ss in enumerate(as_seed_sequence(seed).spawn(n_batches)):
        yield min(size, trials - b * size), ss


def _batches(trials: int, per_trial: int, seed, budget: int = 1 << 21):
    for b, ss in _batch_plan(trials, per_trial, seed, budget):
        yield b, np.random.default_rng(ss)


def empirical_acf_power(constellation_map: Sequence[ConstellationSpec], p, m: int,
                        trials: int, seed=None) -> AcfPowerEstimate:
    """Sample mean of |r_bar_k|^2 over ``trials`` independent M-symbol frames."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = np.asarray(p, dtype=float)
    n = p.size
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    side = []
    for b, rng in _batches(trials, m * n, seed):
        s = draw_grid(constellation_map, (b, m), rng)
        rbar = acf(p, s).mean(axis=1)
        pw = np.abs(rbar) ** 2
        s1 += pw.sum(axis=0)
        s2 += (pw**2).sum(axis=0)
        side.append(pw[:, 1:].sum(axis=1))
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean**2, 0.0)
    stderr = np.sqrt(var / max(trials - 1, 1))
    side = np.concatenate(side)
    ss = float(side.mean())
    ss_err = float(side.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return AcfPowerEstimate(mean, stderr, ss / (n - 1), ss_err / (n - 1), ss, ss_err, trials)


# -- closed-form sensing laws -------------------------------------------------------

def _pm(p, mu4):
    p = np.asarray(p, dtype=float)
    mu4 = np.broadcast_to(np.asarray(mu4, dtype=float), p.shape)
    return p, mu4


def expected_r0_sq(p, mu4, m: int = 1) -> float:
    """E|r_bar_0|^2 = (1/M) sum P^2 (mu4 - 1) + (sum P)^2."""
    p, mu4 = _pm(p, mu4)
    return float(np.sum(p**2 * (mu4 - 1)) / m + np.sum(p) ** 2)


def expected_acf_power(p, mu4, m: int = 1) -> np.ndarray:
    """Per-lag E|r_bar_k|^2 = (1/M) sum P^2 (mu4 - 1) + |sum P e^{j2pi nk/N}|^2."""
    p, mu4 = _pm(p, mu4)
    structural = np.abs(acf(p, np.ones_like(p))) ** 2
    return np.sum(p**2 * (mu4 - 1)) / m + structural


def sidelobe_power_sum(p, mu4, m: int = 1) -> float:
    """sum_{k>=1} E|r_bar_k|^2 = ((N-1)/M) sum P^2(mu4-1) + N sum P^2 - (sum P)^2."""
    p, mu4 = _pm(p, mu4)
    n = p.size
    return float((n - 1) / m * np.sum(p**2 * (mu4 - 1)) + n * np.sum(p**2) - np.sum(p) ** 2)


def closed_form_esl(p, mu4, m: int = 1) -> float:
    """Expected sidelobe level: mean of E|r_bar_k|^2 over the N-1 nonzero lags.

    For ``m == 1`` this is (sum[(N-1) mu4 + 1] P^2 - (sum P)^2) / (N - 1).
    """
    p, mu4 = _pm(p, mu4)
    n = p.size
    if n < 2:
        raise ValueError("ESL needs N >= 2")
    if m == 1:
        return float((np.sum(((n - 1) * mu4 + 1) * p**2) - np.sum(p) ** 2) / (n - 1))
    return sidelobe_power_sum(p, mu4, m) / (n - 1)


def sidelobe_floor_ratio(p, mu4, scene: SensingScene, m: int = 1, q: int = 0) -> float:
    """Expected single-target MF sidelobe-plus-noise power over the expected peak power.

    Off-peak bins see every nonzero lag once, so their mean echo power is the
    ESL; the filtered noise adds sigma_z^2 sum P / M per bin.
    """
    p, mu4 = _pm(p, mu4)
    sig = scene.targets[q].sigma_alpha_sq
    side = sig * closed_form_esl(p, mu4, m) + scene.noise_var / m * float(np.sum(p))
    return side / (sig * expected_r0_sq(p, mu4, m))


def _guard(x: float) -> float:
    return math.inf if x > SINR_OVERFLOW else x


def sinr_mf(inputs: SensingLawInputs, q: int = 0) -> float:
    """Coherent MF SINR of target ``q``; clutter uses the uniform-lag ESL."""
    scene = inputs.scene
    if not scene.targets:
        raise ValueError("scene has no targets")
    sig = scene.targets[q].sigma_alpha_sq * expected_r0_sq(inputs.p, inputs.mu4, inputs.m)
    n = inputs.p.size
    clutter = scene.clutter_power(q) / (n - 1) * sidelobe_power_sum(inputs.p, inputs.mu4, inputs.m)
    noise = scene.noise_var / inputs.m * float(np.sum(inputs.p))
    den = clutter + noise
    return math.inf if den <= 0 else _guard(sig / den)


def snr_rf(inputs: SensingLawInputs, q: int = 0) -> float:
    """RF SNR = sigma_alpha^2 M N^2 / (sigma_z^2 sum nu_n / P_n)."""
    p = inputs.p
    if np.any(p <= 0):
        raise ValueError("reciprocal filtering needs P_n > 0 on every subcarrier")
    n = p.size
    num = inputs.scene.targets[q].sigma_alpha_sq * inputs.m * n * n
    den = inputs.scene.noise_var * float(np.sum(inputs.nu_minus2 / p))
    return math.inf if den <= 0 else _guard(num / den)


def rf_noise_variance(p, nu_minus2, noise_var: float, m: int = 1) -> float:
    """Per-bin RF output noise variance (sigma_z^2 / (M N)) sum nu_n / P_n."""
    p = np.asarray(p, dtype=float)
    nu = np.broadcast_to(np.asarray(nu_minus2, dtype=float), p.shape)
    return float(noise_var / (m * p.size) * np.sum(nu / p))


# -- Monte-Carlo frames ----------------------------------------------------------------

@dataclass
class FrameBatch:
    """Coherently integrated outputs for a batch of simulated frames."""

    bins: np.ndarray        # (B, N) integrated range profiles
    spectrum: np.ndarray    # (B, N) integrated filter spectrum (MF: sqrt(N) Y X*; RF: Y/X)
    desired: np.ndarray     # (B, Q) noise- and clutter-free contribution of each target at its delay
    alphas: np.ndarray      # (B, Q)


def simulate_frames(chain: str, constellation_map: Sequence[ConstellationSpec], p,
                    scene: SensingScene, m: int, batch: int, rng,
                    epsilon: float = 0.0, alphas=None, alpha_rng=None,
                    noise_rng=None) -> FrameBatch:
    """Simulate ``batch`` independent frames of M symbols through one chain.

    The echo is synthesized in the frequency domain (Y = sum alpha X e^{-j2pi n tau/N} + Z),
    which equals the DFT of the time-domain cyclic channel.  ``alpha_rng`` and
    ``noise_rng`` default to ``rng``; separate streams keep target gains and
    noise identical across alphabet maps.
    """
    alpha_rng = rng if alpha_rng is None else alpha_rng
    noise_rng = rng if noise_rng is None else noise_rng
    p = np.asarray(p, dtype=float)
    n = p.size
    scene.validate(n)
    s = draw_grid(constellation_map, (batch, m), rng)
    x = np.sqrt(p) * s
    q = len(scene.targets)
    if alphas is None:
        alphas = (np.stack([draw_alphas(scene, alpha_rng) for _ in range(batch)]) if q
                  else np.zeros((batch, 0)))
    alphas = np.asarray(alphas, dtype=complex).reshape(batch, q)
    taus = np.array([t.tau for t in scene.targets])
    ramps = np.exp(-2j * np.pi * np.outer(taus, np.arange(n)) / n)  # (Q, N)
    h = alphas @ ramps if q else np.zeros((batch, n), dtype=complex)  # (B, N)
    y = x * h[:, None, :]
    if scene.noise_var > 0:
        y = y + math.sqrt(scene.noise_var / 2) * (
            noise_rng.standard_normal(y.shape) + 1j * noise_rng.standard_normal(y.shape))
    if chain == MF:
        spec = (math.sqrt(n) * y * np.conj(x)).mean(axis=1)
        r0 = (np.abs(x) ** 2).sum(axis=-1).mean(axis=1)  # r_bar_0 per frame
        desired = alphas * r0[:, None]
    elif chain == RF:
        spec = rf_spectrum(y, x, epsilon).mean(axis=1)
        if epsilon == 0:
            desired = alphas * math.sqrt(n) + 0j
        else:
            g = (np.abs(x) ** 2 / (np.abs(x) ** 2 + epsilon)).mean(axis=1).sum(axis=-1)
            desired = alphas * (g / math.sqrt(n))[:, None]
    else:
        raise ValueError(f"unknown chain {chain!r}")
    return FrameBatch(idft(spec), spec, desired, alphas)


def iterate_frames(chain, constellation_map, p, scene, m, trials, seed, epsilon=0.0):
    """Yield FrameBatch objects covering ``trials`` frames.

    Symbols, target gains and noise use separate child streams, so runs that
    share a seed see the same gains and noise whatever the alphabet map.
    """
    n = len(constellation_map)
    for b, ss in _batch_plan(trials, m * n, seed):
        sym, gain, noise = (np.random.default_rng(c) for c in ss.spawn(3))
        yield simulate_frames(chain, constellation_map, p, scene, m, b, sym, epsilon,
                              alpha_rng=gain, noise_rng=noise)


def measured_sinr(profiles, desired, scene: SensingScene, q: int = 0) -> float:
    """Monte-Carlo SINR at the true delay of target ``q``.

    Args:
        profiles: ``(T, N)`` integrated outputs, or a sequence of RangeProfile.
        desired: per-trial noise-free contribution of target ``q`` at its delay.

    Returns:
        mean |desired|^2 / mean |profile[tau_q] - desired|^2, with values above
        1e12 (including a zero residual) reported as ``inf``.
    """
    tau = scene.targets[q].tau
    if not float(tau).is_integer():
        raise ValueError("measured_sinr is defined for integer delays only")
    if not isinstance(profiles, np.ndarray):
        profiles = np.array([pr.bins for pr in profiles])
    at = profiles[:, int(tau)]
    d = np.asarray(desired).reshape(at.shape)
    sig = float(np.mean(np.abs(d) ** 2))
    res = float(np.mean(np.abs(at - d) ** 2))
    if res == 0:
        return math.inf
    return _guard(sig / res)


def monte_carlo_sinr(chain: str, constellation_map, p, scene: SensingScene, m: int,
                     trials: int, seed=None, q: int = 0, epsilon: float = 0.0) -> float:
    tau = int(scene.targets[q].tau)
    at, des = [], []
    for fb in iterate_frames(chain, constellation_map, p, scene, m, trials, seed, epsilon):
        at.append(fb.bins[:, tau])
        des.append(fb.desired[:, q])
    at = np.concatenate(at)
    des = np.concatenate(des)
    prof = np.zeros((at.size, len(constellation_map)), dtype=complex)
    prof[:, tau] = at
    return measured_sinr(prof, des, scene, q)


def mean_sidelobe_power(bins, peaks: Sequence[int] = (), guard: int = 0) -> np.ndarray:
    """Mean |bin|^2 over bins outside ``peaks`` (+/- ``guard``), per row."""
    bins = np.atleast_2d(bins)
    n = bins.shape[-1]
    mask = np.ones(n, dtype=bool)
    for t in peaks:
        for g in range(-guard, guard + 1):
            mask[(int(t) + g) % n] = False
    return np.mean(np.abs(bins[..., mask]) ** 2, axis=-1)


def save_law_results(path, **values) -> None:
    def enc(v):
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, np.ndarray):
            return v.tolist()
        if hasattr(v, "__dataclass_fields__"):
            return {k: enc(x) for k, x in asdict(v).items()}
        return v
    Path(path).write_text(json.dumps({k: enc(v) for k, v in values.items()}, indent=1))
