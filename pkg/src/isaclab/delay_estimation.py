"""Super-resolution delay estimation with the Matrix Pencil method.

The pencil operates on the filtered spectrum e[n] (MF: sqrt(N) Y X*, RF: Y/X),
whose target terms are complex exponentials exp(-j 2 pi n tau / N).
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constellations import ConstellationSpec
from .ofdm import SPEED_OF_LIGHT, SensingScene
from .sensing import RangeProfile, as_seed_sequence, iterate_frames

log = logging.getLogger(__name__)


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PencilConfig:
    """Pencil dimension K, model order Q and the relative SVD rank threshold.

    ``svd_rank_tol="auto"`` drops singular values at or below the median
    singular value of E1, a proxy for the noise floor.
    """

    model_order: int = 1
    pencil_dim: int | None = None
    svd_rank_tol: float | str = 1e-10

    def resolve(self, n: int) -> tuple[int, int]:
        k = self.pencil_dim if self.pencil_dim is not None else n // 2
        if not 1 <= k <= n - 1:
            raise ValueError(f"pencil_dim {k} outside [1, {n - 1}]")
        l = n - k
        if not 1 <= self.model_order < min(k, l):
            raise ValueError(
                f"model order {self.model_order} must satisfy 1 <= Q < min(K, L) = {min(k, l)}"
            )
        return k, l


@dataclass
class DelayEstimate:
    taus: np.ndarray
    eigvals: np.ndarray


def build_hankel_pair(e, k: int) -> tuple[np.ndarray, np.ndarray]:
    """E1[i, j] = e[i + j] and E2[i, j] = e[i + j + 1], both (N - K) x K."""
    e = np.asarray(e)
    n = e.size
    if not 1 <= k <= n - 1:
        raise ValueError(f"K = {k} outside [1, {n - 1}]")
    l = n - k
    idx = np.arange(l)[:, None] + np.arange(k)[None, :]
    return e[idx], e[idx + 1]


def eigs_to_delays(eigvals, n: int) -> np.ndarray:
    return np.mod(-n / (2 * np.pi) * np.angle(eigvals), n)


def matrix_pencil(e, cfg: PencilConfig = PencilConfig()) -> DelayEstimate:
    """Estimate Q delays from a spectrum-domain sequence, sorted ascending."""
    e = np.asarray(e, dtype=complex)
    n = e.size
    k, _ = cfg.resolve(n)
    e1, e2 = build_hankel_pair(e, k)
    u, sv, vh = np.linalg.svd(e1, full_matrices=False)
    q = cfg.model_order
    if sv[0] == 0:
        raise ValueError("pencil input is identically zero")
    if cfg.svd_rank_tol == "auto":
        keep = int(np.sum(sv > np.median(sv)))
    else:
        keep = int(np.sum(sv / sv[0] >= cfg.svd_rank_tol))
    if keep < q:
        warnings.warn(
            f"E1 has effective rank {keep} < model order {q}; reducing order",
            RankDeficiencyWarning, stacklevel=2,
        )
        q = max(keep, 1)
    u, sv, v = u[:, :q], sv[:q], vh[:q].conj().T
    a = (u.conj().T @ e2 @ v) / sv[:, None]
    lam = np.linalg.eigvals(a)
    taus = eigs_to_delays(lam, n)
    order = np.argsort(taus)
    return DelayEstimate(taus[order], lam[order])


def peak_pick(profile: RangeProfile | np.ndarray, q_count: int) -> np.ndarray:
    """Indices of the ``q_count`` largest bins, no two circularly adjacent."""
    bins = profile.bins if isinstance(profile, RangeProfile) else np.asarray(profile)
    n = bins.size
    if q_count > n:
        raise ValueError(f"cannot pick {q_count} peaks from {n} bins")
    mag = np.abs(bins)
    blocked = np.zeros(n, dtype=bool)
    picks = []
    for i in np.argsort(-mag, kind="stable"):
        if len(picks) == q_count:
            break
        if blocked[i]:
            continue
        picks.append(int(i))
        blocked[[(i - 1) % n, i, (i + 1) % n]] = True
    return np.sort(np.array(picks, dtype=int))


def circular_error(est, true, n: int) -> np.ndarray:
    d = np.mod(np.asarray(est) - np.asarray(true) + n / 2, n) - n / 2
    return d


def pair_delays(est, true, n: int) -> np.ndarray:
    """Per-true-target errors after minimum-cost circular assignment.

    Missing estimates (fewer than targets) count as a worst-case N/2 error.
    """
    est = np.asarray(est, dtype=float)
    true = np.asarray(true, dtype=float)
    cost = np.abs(circular_error(est[None, :], true[:, None], n))
    rows, cols = linear_sum_assignment(cost)
    err = np.full(true.size, n / 2)
    err[rows] = cost[rows, cols]
    return err


@dataclass
class RmseRow:
    snr_db: float
    chain: str
    mix_id: str
    rmse_samples: float
    rmse_meters: float
    trials: int


def rmse_benchmark(scene: SensingScene, chains: Sequence[str] | str,
                   mixes: dict[str, Sequence[ConstellationSpec]], p, snr_grid,
                   trials: int, seed=None, m: int = 1,
                   cfg: PencilConfig | None = None,
                   sample_interval: float | None = None,
                   c_light: float = SPEED_OF_LIGHT,
                   powers: dict[str, np.ndarray] | None = None) -> list[RmseRow]:
    """Monte-Carlo range RMSE of the pencil estimate versus SNR.

    SNR is the per-sample echo SNR of the first target,
    sigma_alpha^2 * mean(P) / sigma_z^2.  ``powers`` optionally overrides
    ``p`` per mix id.  The same seed is reused for every (chain, mix) cell at
    a given SNR so that cells differ only in processing.
    """
    if isinstance(chains, str):
        chains = [chains]
    q = len(scene.targets)
    cfg = cfg or PencilConfig(model_order=q)
    true = np.array([t.tau for t in scene.targets])
    ref = scene.targets[0].sigma_alpha_sq
    rows = []
    seeds = as_seed_sequence(seed).spawn(len(snr_grid))
    for snr_db, ss in zip(snr_grid, seeds):
        for mix_id, cmap in mixes.items():
            pm = np.asarray(powers[mix_id] if powers and mix_id in powers else p, dtype=float)
            noise = ref * float(np.mean(pm)) / 10 ** (snr_db / 10)
            sc = SensingScene(scene.targets, noise)
            for chain in chains:
                errs = []
                for fb in iterate_frames(chain, cmap, pm, sc, m, trials, ss):
                    for spec in fb.spectrum:
                        est = matrix_pencil(spec, cfg).taus
                        errs.append(pair_delays(est, true, pm.size))
                errs = np.concatenate(errs)
                rmse = float(np.sqrt(np.mean(errs**2)))
                meters = rmse * c_light * sample_interval / 2 if sample_interval else math.nan
                rows.append(RmseRow(float(snr_db), chain, mix_id, rmse, meters, trials))
    return rows


def write_rmse_csv(path, rows: Sequence[RmseRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "chain", "mix_id", "rmse_samples", "rmse_meters", "trials"])
        for r in rows:
            w.writerow([repr(r.snr_db), r.chain, r.mix_id, repr(r.rmse_samples),
                        repr(r.rmse_meters), r.trials])
