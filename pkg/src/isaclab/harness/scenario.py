"""Scenario files: JSON schema, validation diagnostics and the typed Scenario."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from ..constellations import ConstellationSpec, builtin, load_constellation
from ..ofdm import OfdmConfig, SensingScene, config_from_dict, scene_from_dict

PIPELINES = ("mixture_sweep", "subcarrier_plan", "rmse_vs_snr", "tradeoff_curve",
             "coherent_gain", "qpsk_fraction_sweep")
SWEEP_VARIABLES = ("r_min", "snr", "qpsk_fraction", "m_symbols")

_CLASS = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "required": ["constellation"],
         "properties": {"constellation": {"type": "string"}}},
        {"type": "object", "required": ["id", "points"],
         "properties": {"id": {"type": "string"},
                        "points": {"type": "array", "minItems": 4,
                                   "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                             "items": {"type": "number"}}}}},
    ]
}

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["pipeline", "ofdm", "sweep"],
    "additionalProperties": False,
    "properties": {
        "pipeline": {"enum": list(PIPELINES)},
        "description": {"type": "string"},
        "ofdm": {
            "type": "object",
            "required": ["n_subcarriers"],
            "additionalProperties": False,
            "properties": {
                "n_subcarriers": {"type": "integer", "minimum": 2},
                "n_symbols": {"type": "integer", "minimum": 1},
                "subcarrier_spacing": {"type": "number", "exclusiveMinimum": 0},
                "sample_interval": {"type": "number", "exclusiveMinimum": 0},
                "carrier": {"type": "number", "exclusiveMinimum": 0},
                "p_ave": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "targets": {"type": "array", "items": {
                    "type": "object", "required": ["sigma_alpha_sq", "tau"],
                    "additionalProperties": False,
                    "properties": {"sigma_alpha_sq": {"type": "number", "exclusiveMinimum": 0},
                                   "tau": {"type": "number", "minimum": 0}}}},
                "noise_var": {"type": "number", "minimum": 0},
            },
        },
        "classes": {"type": "array", "minItems": 1, "items": _CLASS},
        "mixes": {"type": "object", "minProperties": 1, "additionalProperties": {
            "type": "object", "minProperties": 1,
            "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}}},
        "chains": {"type": "array", "minItems": 1, "items": {"enum": ["MF", "RF"]}},
        "channel_gains": {"oneOf": [
            {"const": "flat"},
            {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
            {"type": "object", "required": ["rayleigh"], "additionalProperties": False,
             "properties": {"rayleigh": {"type": "object", "required": ["mean"],
                                         "properties": {"mean": {"type": "number",
                                                                 "exclusiveMinimum": 0}}}}},
        ]},
        "flat_gain": {"type": "number", "exclusiveMinimum": 0},
        "noise_psd_bw": {"type": "number", "exclusiveMinimum": 0},
        "ber_th": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "clutter_power": {"type": "number", "exclusiveMinimum": 0},
        "r_min": {"type": "number", "minimum": 0},
        "sweep": {
            "type": "object", "required": ["variable", "grid"], "additionalProperties": False,
            "properties": {"variable": {"enum": list(SWEEP_VARIABLES)},
                           "grid": {"type": "array", "minItems": 1, "items": {"type": "number"}}},
        },
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "options": {"type": "object"},
    },
}

# which sweep variable each pipeline expects
PIPELINE_SWEEP = {
    "mixture_sweep": "r_min",
    "subcarrier_plan": "r_min",
    "rmse_vs_snr": "snr",
    "tradeoff_curve": "r_min",
    "coherent_gain": "m_symbols",
    "qpsk_fraction_sweep": "qpsk_fraction",
}


class ScenarioError(ValueError):
    """Invalid scenario; ``diagnostics`` lists one message per problem."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def _where(err: jsonschema.ValidationError) -> str:
    path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return path.lstrip(".") or "<root>"


def validate_blob(blob: Any) -> list[str]:
    """Schema plus cross-field checks; returns diagnostics (empty when valid)."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    diags = [f"{_where(e)}: {e.message}"
             for e in sorted(validator.iter_errors(blob), key=lambda e: list(e.absolute_path))]
    if diags:
        return diags
    want = PIPELINE_SWEEP[blob["pipeline"]]
    if blob["sweep"]["variable"] != want:
        diags.append(f"sweep.variable: pipeline {blob['pipeline']} sweeps {want!r}, "
                     f"got {blob['sweep']['variable']!r}")
    n = blob["ofdm"]["n_subcarriers"]
    for i, t in enumerate(blob.get("scene", {}).get("targets", [])):
        if t["tau"] >= n:
            diags.append(f"scene.targets[{i}].tau: {t['tau']} outside [0, {n})")
    gains = blob.get("channel_gains")
    if isinstance(gains, list) and len(gains) != n:
        diags.append(f"channel_gains: length {len(gains)} != n_subcarriers {n}")
    for name, mix in blob.get("mixes", {}).items():
        if abs(sum(mix.values()) - 1.0) > 1e-9:
            diags.append(f"mixes.{name}: fractions sum to {sum(mix.values())}, expected 1")
    needs_scene = blob["pipeline"] in ("rmse_vs_snr", "coherent_gain", "tradeoff_curve",
                                       "qpsk_fraction_sweep")
    if needs_scene and not blob.get("scene", {}).get("targets"):
        diags.append(f"scene.targets: pipeline {blob['pipeline']} needs at least one target")
    if blob["pipeline"] in ("rmse_vs_snr", "coherent_gain") and "mixes" not in blob:
        diags.append(f"mixes: pipeline {blob['pipeline']} needs at least one mix")
    rule = blob.get("options", {}).get("power_rule")
    if rule is not None and rule not in ("optimal", "equal"):
        diags.append(f"options.power_rule: expected 'optimal' or 'equal', got {rule!r}")
    if blob["pipeline"] in ("mixture_sweep", "subcarrier_plan", "tradeoff_curve") \
            and "classes" not in blob:
        diags.append(f"classes: pipeline {blob['pipeline']} needs candidate classes")
    return diags


def load_blob(path) -> dict:
    """Parse JSON, turning syntax errors into line/column diagnostics."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None


def resolve_class(entry, base: Path | None = None) -> ConstellationSpec:
    if isinstance(entry, str):
        return builtin(entry)
    if "constellation" in entry:
        name = entry["constellation"]
        path = Path(name) if base is None else base / name
        if name.endswith(".json") and path.exists():
            return load_constellation(path)
        return builtin(name)
    return load_constellation(entry)


@dataclass
class Scenario:
    pipeline: str
    ofdm: OfdmConfig
    scene: SensingScene
    sweep_variable: str
    grid: list[float]
    classes: list[ConstellationSpec] = field(default_factory=list)
    mixes: dict[str, dict[str, float]] = field(default_factory=dict)
    chains: list[str] = field(default_factory=lambda: ["MF", "RF"])
    channel_gains: Any = "flat"
    flat_gain: float = 1.0
    noise_psd_bw: float = 1.0
    ber_th: float = 1e-4
    clutter_power: float = 1.0
    r_min: float = 0.0
    trials: int = 100
    seed: int = 0
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.grid:
            raise ScenarioError(["sweep.grid: must be non-empty"])
        if self.trials < 1:
            raise ScenarioError(["trials: must be >= 1"])

    @property
    def n(self) -> int:
        return self.ofdm.n_subcarriers

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def scenario_from_blob(blob: dict, base: Path | None = None, seed: int | None = None,
                       trials: int | None = None) -> Scenario:
    diags = validate_blob(blob)
    if diags:
        raise ScenarioError(diags)
    blob = json.loads(json.dumps(blob))
    if seed is not None:
        blob["seed"] = int(seed)
    if trials is not None:
        blob["trials"] = int(trials)
    try:
        classes = [resolve_class(c, base) for c in blob.get("classes", [])]
    except (ValueError, OSError) as exc:
        raise ScenarioError([f"classes: {exc}"]) from None
    return Scenario(
        pipeline=blob["pipeline"],
        ofdm=config_from_dict(blob["ofdm"]),
        scene=scene_from_dict(blob.get("scene", {})),
        sweep_variable=blob["sweep"]["variable"],
        grid=[float(g) for g in blob["sweep"]["grid"]],
        classes=classes,
        mixes=blob.get("mixes", {}),
        chains=blob.get("chains", ["MF", "RF"]),
        channel_gains=blob.get("channel_gains", "flat"),
        flat_gain=float(blob.get("flat_gain", 1.0)),
        noise_psd_bw=float(blob.get("noise_psd_bw", 1.0)),
        ber_th=float(blob.get("ber_th", 1e-4)),
        clutter_power=float(blob.get("clutter_power", 1.0)),
        r_min=float(blob.get("r_min", 0.0)),
        trials=int(blob.get("trials", 100)),
        seed=int(blob.get("seed", 0)),
        options=blob.get("options", {}),
        raw=blob,
    )


def load_scenario(path, seed: int | None = None, trials: int | None = None) -> Scenario:
    path = Path(path)
    return scenario_from_blob(load_blob(path), path.parent, seed, trials)
