"""Finite constellation alphabets, their moment statistics and BER models.

Every alphabet is stored normalized (zero mean, unit average power) and is
assumed to be used with equiprobable symbols.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import erfc

__all__ = [
    "BerModel",
    "ConstellationError",
    "ConstellationSpec",
    "InfeasibleSubcarrierError",
    "Moments",
    "apsk32",
    "ber",
    "builtin",
    "draw_symbols",
    "load_constellation",
    "min_power",
    "min_snr_for_ber",
    "moments",
    "normalize",
    "q_function",
    "qpsk",
    "square_qam",
]


class ConstellationError(ValueError):
    """Raised for degenerate or unsupported constellation inputs."""


class InfeasibleSubcarrierError(ValueError):
    """Raised when a subcarrier cannot meet its BER target at any power."""


@dataclass(frozen=True)
class BerModel:
    """How BER(gamma) is evaluated for one alphabet.

    ``kind`` is one of ``closed_form_qpsk``, ``closed_form_square_qam`` or
    ``table``.  For ``table`` the samples are (linear SNR, BER) pairs with
    strictly increasing SNR and strictly decreasing BER.
    """

    kind: str
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("closed_form_qpsk", "closed_form_square_qam", "table"):
            raise ConstellationError(f"unknown BER model kind {self.kind!r}")
        if self.kind == "table":
            if not self.table or len(self.table) < 2:
                raise ConstellationError("table BER model needs at least two samples")
            g = np.array([t[0] for t in self.table], dtype=float)
            b = np.array([t[1] for t in self.table], dtype=float)
            if np.any(np.diff(g) <= 0) or np.any(np.diff(b) >= 0):
                raise ConstellationError(
                    "BER table must have increasing SNR and strictly decreasing BER"
                )
            if np.any(b <= 0) or np.any(b > 0.5):
                raise ConstellationError("BER table values must lie in (0, 0.5]")


@dataclass(frozen=True, eq=False)
class ConstellationSpec:
    id: str
    points: np.ndarray
    ber_model: BerModel | None = None
    _interp: object = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.points.size)))

    def __eq__(self, other):
        if not isinstance(other, ConstellationSpec):
            return NotImplemented
        return (
            self.id == other.id
            and self.points.shape == other.points.shape
            and bool(np.all(self.points == other.points))
        )

    def __hash__(self):
        return hash((self.id, self.points.size))


@dataclass(frozen=True)
class Moments:
    mu4: float
    nu_minus2: float
    rate_bits: int


def normalize(points: Sequence[complex], id: str = "custom",
              ber_model: BerModel | None = None) -> ConstellationSpec:
    """Shift to zero mean and scale to unit average power.

    Raises:
        ConstellationError: fewer than four distinct points, a size that is
            not a power of two, or a normalized point at the origin.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size < 4 or np.unique(pts).size < 4:
        raise ConstellationError(
            f"constellation {id!r} needs at least 4 distinct points, got "
            f"{np.unique(pts).size}"
        )
    if pts.size & (pts.size - 1):
        raise ConstellationError(
            f"constellation {id!r} size {pts.size} is not a power of two"
        )
    centered = pts - pts.mean()
    energy = np.mean(centered.real**2 + centered.imag**2)
    if not energy > 0:
        raise ConstellationError(f"constellation {id!r} has zero energy")
    out = centered / math.sqrt(energy)
    mod2 = out.real**2 + out.imag**2
    if np.any(mod2 < 1e-24):
        raise ConstellationError(
            f"constellation {id!r} has a point at the origin after normalization; "
            "the inverse second moment would be infinite"
        )
    out.setflags(write=False)
    return _with_model(ConstellationSpec(id=id, points=out), ber_model)


def _with_model(spec: ConstellationSpec, ber_model: BerModel | None) -> ConstellationSpec:
    interp = None
    if ber_model is not None and ber_model.kind == "table":
        g = np.array([t[0] for t in ber_model.table])
        logb = np.log(np.array([t[1] for t in ber_model.table]))
        interp = PchipInterpolator(g, logb, extrapolate=False)
    return ConstellationSpec(spec.id, spec.points, ber_model, interp)


def _mod2_terms(c: ConstellationSpec) -> list[float]:
    return [float(z.real * z.real + z.imag * z.imag) for z in c.points]


def moments(c: ConstellationSpec) -> Moments:
    """Kurtosis and inverse second moment over the equiprobable alphabet.

    Both are computed in their scale-free form, E|s|^4 / (E|s|^2)^2 and
    E[1/|s|^2] * E|s|^2, so constant-modulus alphabets give exactly 1.
    """
    m2 = _mod2_terms(c)
    n = len(m2)
    e2 = math.fsum(m2) / n
    e4 = math.fsum(v * v for v in m2) / n
    einv = math.fsum(1.0 / v for v in m2) / n
    mu4 = e4 / (e2 * e2)
    nu = einv * e2
    # guard against one-ulp undershoot for constant-modulus alphabets
    if len(set(m2)) == 1:
        mu4 = nu = 1.0
    return Moments(mu4=mu4, nu_minus2=nu, rate_bits=c.bits_per_symbol)


# -- built-in alphabets -----------------------------------------------------

def qpsk() -> ConstellationSpec:
    raw = [complex(a, b) for a in (1, -1) for b in (1, -1)]
    return normalize(raw, "QPSK", BerModel("closed_form_qpsk"))


def square_qam(order: int) -> ConstellationSpec:
    side = math.isqrt(order)
    if side * side != order or order < 4:
        raise ConstellationError(
            f"{order}-QAM is not a square constellation; use a table BER model"
        )
    levels = np.arange(-(side - 1), side, 2)
    raw = (levels[:, None] + 1j * levels[None, :]).ravel()
    name = "QPSK" if order == 4 else f"QAM{order}"
    return normalize(raw, name, BerModel("closed_form_square_qam"))


# DVB-S2 32APSK ring layout (4 + 12 + 16), rate-3/4 radius ratios.
APSK32_GAMMA1 = 2.84
APSK32_GAMMA2 = 5.27


def apsk32(gamma1: float = APSK32_GAMMA1, gamma2: float = APSK32_GAMMA2,
           ber_table: Sequence[tuple[float, float]] | None = None) -> ConstellationSpec:
    rings = [
        (1.0, 4, math.pi / 4),
        (gamma1, 12, math.pi / 12),
        (gamma2, 16, 0.0),
    ]
    raw = []
    for radius, count, offset in rings:
        for k in range(count):
            raw.append(radius * complex(math.cos(offset + 2 * math.pi * k / count),
                                        math.sin(offset + 2 * math.pi * k / count)))
    if ber_table is None and gamma1 == APSK32_GAMMA1 and gamma2 == APSK32_GAMMA2:
        ber_table = _packaged_table("apsk32_ber.json")
    model = BerModel("table", tuple(map(tuple, ber_table))) if ber_table else None
    return normalize(raw, "APSK32", model)


def _packaged_table(name: str) -> list[tuple[float, float]]:
    text = resources.files("isaclab.data").joinpath(name).read_text()
    blob = json.loads(text)
    return [(float(g), float(b)) for g, b in blob["table"]]


def builtin(name: str) -> ConstellationSpec:
    """Look up a built-in alphabet by id (QPSK, QAM16, QAM64, APSK32)."""
    key = name.upper().replace("-", "").replace("_", "")
    table = {
        "QPSK": qpsk,
        "4QAM": qpsk,
        "QAM16": lambda: square_qam(16),
        "16QAM": lambda: square_qam(16),
        "QAM64": lambda: square_qam(64),
        "64QAM": lambda: square_qam(64),
        "APSK32": apsk32,
        "32APSK": apsk32,
    }
    if key not in table:
        raise ConstellationError(f"unknown built-in constellation {name!r}")
    return table[key]()


def load_constellation(path: str | Path | dict) -> ConstellationSpec:
    """Load ``{"id": ..., "points": [[re, im], ...]}`` and normalize it.

    An optional ``"ber_table": [[gamma, ber], ...]`` attaches a table model;
    ``"ber_model": "closed_form_square_qam"`` selects the closed form.
    """
    blob = path if isinstance(path, dict) else json.loads(Path(path).read_text())
    try:
        pts = [complex(float(re), float(im)) for re, im in blob["points"]]
        cid = str(blob["id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConstellationError(f"malformed constellation definition: {exc}") from exc
    model = None
    if "ber_table" in blob:
        model = BerModel("table", tuple((float(g), float(b)) for g, b in blob["ber_table"]))
    elif "ber_model" in blob:
        model = BerModel(blob["ber_model"])
        if model.kind == "closed_form_square_qam" and math.isqrt(len(pts)) ** 2 != len(pts):
            raise ConstellationError(
                f"{cid}: {len(pts)}-point alphabet is not square QAM; use ber_table"
            )
    return normalize(pts, cid, model)


# -- BER ---------------------------------------------------------------------

def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt 2).

    erfc keeps the relative error near machine precision across the whole
    tail; values underflow to 0 only beyond x of about 38.
    """
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def ber(c: ConstellationSpec, gamma):
    """Uncoded BER at linear symbol SNR ``gamma`` under Gray mapping."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    model = c.ber_model
    if model is None:
        raise ConstellationError(f"constellation {c.id!r} has no BER model")
    if model.kind == "closed_form_qpsk":
        out = q_function(np.sqrt(g))
    elif model.kind == "closed_form_square_qam":
        m = c.size
        if math.isqrt(m) ** 2 != m:
            raise ConstellationError(
                f"{c.id}: closed-form square-QAM BER needs a square order, got {m}; "
                "use a table BER model"
            )
        k = math.log2(m)
        out = (4.0 / k) * (1.0 - 1.0 / math.sqrt(m)) * q_function(np.sqrt(3.0 * g / (m - 1)))
    else:
        gmax = model.table[-1][0]
        if np.any(g > gmax):
            raise ConstellationError(
                f"{c.id}: gamma beyond the BER table range (max {gmax:g})"
            )
        out = np.exp(c._interp(np.maximum(g, model.table[0][0])))
    return float(out) if np.ndim(out) == 0 else out


def min_snr_for_ber(c: ConstellationSpec, ber_th: float, rtol: float = 1e-10) -> float:
    """Smallest linear SNR with ber(c, gamma) <= ber_th, by bisection."""
    b0 = ber(c, 0.0)
    if not 0 < ber_th < b0:
        raise ValueError(f"ber_th must lie in (0, {b0:g}) for {c.id}, got {ber_th:g}")
    if c.ber_model.kind == "table":
        hi = c.ber_model.table[-1][0]
        if ber(c, hi) > ber_th:
            raise ConstellationError(
                f"{c.id}: BER target {ber_th:g} is below the table range "
                f"(min {ber(c, hi):g})"
            )
    else:
        hi = 1.0
        while ber(c, hi) > ber_th:
            hi *= 2.0
    lo = 0.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if ber(c, mid) > ber_th:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return hi


def min_power(c: ConstellationSpec, channel_gain_sq: float, noise_psd_bw: float,
              ber_th: float) -> float:
    """Minimum transmit power meeting ``ber_th`` on a subcarrier.

    P_min = gamma_min * N0*df / |H|^2.
    """
    if not channel_gain_sq > 0:
        raise InfeasibleSubcarrierError(
            "zero channel gain: subcarrier cannot meet any BER target"
        )
    return min_snr_for_ber(c, ber_th) * noise_psd_bw / channel_gain_sq


def draw_symbols(c: ConstellationSpec, count, seed=None) -> np.ndarray:
    """I.i.d. equiprobable symbols; ``count`` may be an int or a shape."""
    rng = np.random.default_rng(seed)
    return c.points[rng.integers(0, c.size, size=count)]
