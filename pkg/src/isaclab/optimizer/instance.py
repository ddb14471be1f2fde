"""JSON problem instances and solution records for the subcarrier optimizer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from ..constellations import ConstellationSpec, builtin, load_constellation
from .bilevel import SubcarrierPlan

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["chain", "classes", "channel_gains", "r_min", "p_ave"],
    "properties": {
        "chain": {"enum": ["MF", "RF"]},
        "classes": {"type": "array", "minItems": 1, "items": {"oneOf": [
            {"type": "string"},
            {"type": "object", "required": ["constellation"]},
            {"type": "object", "required": ["id", "points"]},
        ]}},
        "channel_gains": {"type": "array", "minItems": 1,
                          "items": {"type": "number", "minimum": 0}},
        "r_min": {"type": "number", "minimum": 0},
        "p_ave": {"type": "number", "exclusiveMinimum": 0},
        "ber_th": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "clutter_power": {"type": "number", "exclusiveMinimum": 0},
        "sigma_z": {"type": "number", "exclusiveMinimum": 0},
        "m": {"type": "integer", "minimum": 1},
        "p_max": {"type": "number", "exclusiveMinimum": 0},
    },
}


@dataclass
class ProblemInstance:
    """One subcarrier-design problem.

    ``sigma_z`` is the communication noise power per subcarrier (N0 times the
    subcarrier spacing) used for the BER power floors.
    """

    chain: str
    classes: list[ConstellationSpec]
    channel_gains: np.ndarray
    r_min: float
    p_ave: float
    ber_th: float = 1e-4
    clutter_power: float = 1.0
    sigma_z: float = 1.0
    m: int = 1
    p_max: float | None = None

    def kwargs(self) -> dict:
        return dict(ber_th=self.ber_th, noise_psd_bw=self.sigma_z, m=self.m,
                    clutter_power=self.clutter_power, p_max=self.p_max)

    def to_dict(self) -> dict:
        out = {"chain": self.chain, "classes": [c.id for c in self.classes],
               "channel_gains": self.channel_gains.tolist(), "r_min": self.r_min,
               "p_ave": self.p_ave, "ber_th": self.ber_th,
               "clutter_power": self.clutter_power, "sigma_z": self.sigma_z, "m": self.m}
        if self.p_max is not None:
            out["p_max"] = self.p_max
        return out


def _class(entry, base: Path | None):
    if isinstance(entry, str):
        return builtin(entry)
    if "constellation" in entry:
        name = entry["constellation"]
        if name.endswith(".json"):
            return load_constellation(Path(name) if base is None else base / name)
        return builtin(name)
    return load_constellation(entry)


def instance_from_dict(blob: dict, base: Path | None = None) -> ProblemInstance:
    jsonschema.validate(blob, INSTANCE_SCHEMA)
    return ProblemInstance(
        chain=blob["chain"],
        classes=[_class(c, base) for c in blob["classes"]],
        channel_gains=np.asarray(blob["channel_gains"], dtype=float),
        r_min=float(blob["r_min"]),
        p_ave=float(blob["p_ave"]),
        ber_th=float(blob.get("ber_th", 1e-4)),
        clutter_power=float(blob.get("clutter_power", 1.0)),
        sigma_z=float(blob.get("sigma_z", 1.0)),
        m=int(blob.get("m", 1)),
        p_max=blob.get("p_max"),
    )


def load_instance(path) -> ProblemInstance:
    path = Path(path)
    return instance_from_dict(json.loads(path.read_text()), path.parent)


def plan_to_dict(plan: SubcarrierPlan) -> dict:
    d = plan.to_dict()
    d["kappa"] = plan.kappa.tolist()
    d["p_min"] = [[x if math.isfinite(x) else None for x in row] for row in plan.p_min.tolist()]
    d["p_max"] = plan.p_max
    d["r_min"] = plan.r_min
    d["p_ave"] = plan.p_ave
    return d


def save_instances(path, instances: Sequence[ProblemInstance], solutions=None) -> None:
    recs = []
    for i, inst in enumerate(instances):
        rec = {"instance": inst.to_dict()}
        if solutions is not None:
            rec["solution"] = solutions[i]
        recs.append(rec)
    Path(path).write_text(json.dumps(recs, indent=1) + "\n")
