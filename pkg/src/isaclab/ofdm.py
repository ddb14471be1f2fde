"""OFDM symbol construction and the cyclic multi-target echo channel.

Delay convention: a target at delay ``tau`` delays the transmit signal,
``y[t] = x[(t - tau) mod N]``, i.e. ``Y[n] = X[n] exp(-j 2 pi n tau / N)``.
With this convention both receive filters peak at profile index ``tau``.
The cyclic prefix is not materialized; the channel is modelled directly as
a cyclic convolution, which is what remains after CP removal.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .constellations import ConstellationSpec

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int
    n_symbols: int = 1
    subcarrier_spacing: float = 312.5e3
    sample_interval: float = 50e-9
    carrier: float = 2.45e9
    p_ave: float = 1.0

    def __post_init__(self):
        if self.n_subcarriers < 2:
            raise ValueError("n_subcarriers must be >= 2")
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if not (self.subcarrier_spacing > 0 and self.sample_interval > 0):
            raise ValueError("subcarrier_spacing and sample_interval must be positive")


@dataclass(frozen=True)
class Target:
    sigma_alpha_sq: float
    tau: float

    def __post_init__(self):
        if not self.sigma_alpha_sq > 0:
            raise ValueError("target reflection variance must be positive")


@dataclass(frozen=True)
class SensingScene:
    targets: tuple[Target, ...] = ()
    noise_var: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(
            t if isinstance(t, Target) else Target(*t) for t in self.targets))
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")

    def validate(self, n: int) -> None:
        for t in self.targets:
            if not 0 <= t.tau < n:
                raise ValueError(f"target delay {t.tau} outside [0, {n})")

    def clutter_power(self, q: int) -> float:
        """Total reflection variance of every target except ``q``."""
        return sum(t.sigma_alpha_sq for i, t in enumerate(self.targets) if i != q)


class PowerAllocation(np.ndarray):
    """Per-subcarrier power vector, checked against the mean-power budget."""

    def __new__(cls, p, p_ave: float | None = None, rtol: float = 1e-9):
        arr = np.asarray(p, dtype=float).copy().view(cls)
        if arr.ndim != 1:
            raise ValueError("power allocation must be one-dimensional")
        if np.any(arr < 0):
            raise ValueError("powers must be nonnegative")
        if p_ave is not None and abs(arr.mean() - p_ave) > rtol * abs(p_ave):
            raise ValueError(f"mean power {arr.mean():.12g} != budget {p_ave:.12g}")
        return arr

    @classmethod
    def equal(cls, n: int, p_ave: float = 1.0) -> "PowerAllocation":
        return cls(np.full(n, float(p_ave)), p_ave)


@dataclass
class SymbolGrid:
    """M x N data symbols with the per-subcarrier alphabet map."""

    s: np.ndarray
    constellation_map: list[ConstellationSpec] = field(default_factory=list)

    @classmethod
    def draw(cls, constellation_map: Sequence[ConstellationSpec], m: int,
             rng) -> "SymbolGrid":
        rng = np.random.default_rng(rng)
        s = draw_grid(constellation_map, m, rng)
        return cls(s, list(constellation_map))

    def validate(self) -> None:
        for n, c in enumerate(self.constellation_map):
            col = self.s[:, n]
            if not np.all(np.min(np.abs(col[:, None] - c.points[None, :]), axis=1) < 1e-12):
                raise ValueError(f"subcarrier {n} carries symbols outside {c.id}")


def draw_grid(constellation_map: Sequence[ConstellationSpec], m, rng) -> np.ndarray:
    """Draw i.i.d. symbols, shape ``(*m, N)``, for a per-subcarrier alphabet map.

    Subcarriers sharing an alphabet are drawn together.
    """
    rng = np.random.default_rng(rng)
    shape = (m,) if np.ndim(m) == 0 else tuple(m)
    n = len(constellation_map)
    out = np.empty(shape + (n,), dtype=complex)
    groups: dict[int, tuple[ConstellationSpec, list[int]]] = {}
    for i, c in enumerate(constellation_map):
        groups.setdefault(id(c), (c, []))[1].append(i)
    for c, cols in groups.values():
        idx = rng.integers(0, c.size, size=shape + (len(cols),))
        out[..., cols] = c.points[idx]
    return out


def dft(signal, axis: int = -1) -> np.ndarray:
    """Unitary N-point DFT."""
    return np.fft.fft(signal, axis=axis, norm="ortho")


def idft(spectrum, axis: int = -1) -> np.ndarray:
    """Unitary N-point inverse DFT."""
    return np.fft.ifft(spectrum, axis=axis, norm="ortho")


def modulate(symbols, p) -> np.ndarray:
    """Time-domain OFDM symbol(s): unitary IDFT of sqrt(P_n) s_n.

    ``symbols`` may be a length-N vector or an ``(M, N)`` grid.
    """
    s = np.asarray(symbols)
    p = np.asarray(p, dtype=float)
    if s.shape[-1] != p.shape[-1]:
        raise ValueError(f"symbol length {s.shape[-1]} != power length {p.shape[-1]}")
    return idft(np.sqrt(p) * s)


def cyclic_shift_matrix(k: int, n: int) -> np.ndarray:
    """The N x N matrix [[0, I_{N-k}], [I_k, 0]], which advances by k samples.

    A delay by ``tau`` is ``cyclic_shift_matrix(tau, n).T``.
    """
    k %= n
    j = np.zeros((n, n))
    j[np.arange(n - k), np.arange(k, n)] = 1.0
    j[np.arange(n - k, n), np.arange(k)] = 1.0
    return j


def delay_signal(x, tau: float) -> np.ndarray:
    """Cyclically delay along the last axis; fractional delays use a phase ramp."""
    x = np.asarray(x)
    n = x.shape[-1]
    if float(tau).is_integer():
        return np.roll(x, int(tau), axis=-1)
    ramp = np.exp(-2j * np.pi * np.arange(n) * tau / n)
    return idft(dft(x) * ramp)


def draw_alphas(scene: SensingScene, rng) -> np.ndarray:
    """One CN(0, sigma_alpha^2) reflection coefficient per target."""
    rng = np.random.default_rng(rng)
    q = len(scene.targets)
    var = np.array([t.sigma_alpha_sq for t in scene.targets])
    return np.sqrt(var / 2) * (rng.standard_normal(q) + 1j * rng.standard_normal(q))


def complex_noise(shape, var: float, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    if var == 0:
        return np.zeros(shape, dtype=complex)
    return math.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(x, scene: SensingScene, seed=None, alphas=None) -> np.ndarray:
    """Multi-target cyclic-delay channel plus AWGN.

    Reflection coefficients are drawn once and held across all M symbols
    of ``x`` (shape ``(N,)`` or ``(M, N)``) unless ``alphas`` is given.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    scene.validate(n)
    rng = np.random.default_rng(seed)
    if alphas is None:
        alphas = draw_alphas(scene, rng)
    y = np.zeros_like(x)
    for a, t in zip(alphas, scene.targets):
        y += a * delay_signal(x, t.tau)
    return y + complex_noise(x.shape, scene.noise_var, rng)


def delay_from_range(d: float, c_light: float = SPEED_OF_LIGHT,
                     sample_interval: float = 50e-9) -> int:
    """Round-trip delay in whole samples, floor(2 d / (c T_s))."""
    if d < 0:
        raise ValueError("range must be nonnegative")
    return int(math.floor(2.0 * d / (c_light * sample_interval)))


# -- file interfaces -----------------------------------------------------------

def scene_from_dict(blob: dict) -> SensingScene:
    targets = tuple(Target(float(t["sigma_alpha_sq"]), float(t["tau"]))
                    for t in blob.get("targets", []))
    return SensingScene(targets, float(blob.get("noise_var", 0.0)))


def scene_to_dict(scene: SensingScene) -> dict:
    return {"targets": [asdict(t) for t in scene.targets], "noise_var": scene.noise_var}


def config_from_dict(blob: dict) -> OfdmConfig:
    return OfdmConfig(**blob)


def load_scene(path) -> SensingScene:
    return scene_from_dict(json.loads(Path(path).read_text()))


def load_config(path) -> OfdmConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


def export_signal(path, signal, sample_interval: float) -> Path:
    """Write little-endian interleaved complex64 samples plus a JSON sidecar.

    The sidecar ``<path>.json`` records N, M and T_s.
    """
    sig = np.atleast_2d(np.asarray(signal))
    path = Path(path)
    sig.astype("<c8").tofile(path)
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps({
        "N": int(sig.shape[-1]),
        "M": int(sig.shape[0]),
        "T_s": float(sample_interval),
        "dtype": "complex64-le-interleaved",
    }, indent=1))
    return sidecar


def import_signal(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    data = np.fromfile(path, dtype="<c8").reshape(meta["M"], meta["N"])
    return data, meta
