"""JSON forms of instances, curves and mechanisms as read and written by the CLI."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from . import config
from .curves import MonotoneCurve
from .mechanisms import (AffineMin, AffineParams, AntiMonotone, Bundling, Constant, CoupledAffine,
                         PerPair, PerTaskLinear, RelaxedAffineMin, TaskIndependent)
from .valuations import Bundle, Instance, PairwiseValuation, RestrictedInstance, TwoTaskValuation

MECHANISM_TYPES = ("affine_min", "relaxed_affine_min", "bundling", "task_independent", "constant",
                   "per_task_linear", "anti_monotone", "coupled_affine")


def extended_real(x: Any) -> float:
    """Accept numbers and the strings "inf"/"-inf"."""
    if isinstance(x, str):
        return float(x.strip().replace("∞", "inf"))
    return float(x)


def dump_real(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def load_json(source: str | Path) -> Any:
    """Parse inline JSON text, or read it from a file path."""
    text = str(source).strip()
    if text.startswith(("{", "[")):
        return json.loads(text)
    return json.loads(Path(source).read_text())


# -- instances


def instance_from_json(data: dict) -> Instance:
    pairs, bids = [], []
    for p in data["pairs"]:
        pairs.append(TwoTaskValuation(float(p["t1"]), float(p["t1p"]), float(p["t12"])))
        bids.append((float(p["s1"]), float(p["s1p"])))
    n = int(data["n"])
    if len(pairs) != n - 1:
        raise ValueError(f"an instance with n={n} needs exactly {n - 1} pair entries, got {len(pairs)}")
    theta = float(data["theta"]) if "theta" in data else config.default_theta(n)
    return Instance(n, theta, PairwiseValuation(tuple(pairs)), tuple(bids))


def instance_to_json(inst: Instance | RestrictedInstance) -> dict:
    if isinstance(inst, RestrictedInstance):
        inst = inst.to_instance()
    return {"n": inst.n, "theta": inst.theta,
            "pairs": [{"t1": t.t1, "t1p": t.t2, "t12": t.t12, "s1": a, "s1p": b}
                      for t, (a, b) in zip(inst.t.pairs, inst.s_bids)]}


# -- curves


def curve_from_json(data: Any) -> MonotoneCurve:
    if isinstance(data, dict):
        if "breakpoints" in data:
            return MonotoneCurve.from_points(data["breakpoints"])
        if "slope" in data:
            return MonotoneCurve.linear(float(data["slope"]), float(data.get("intercept", 0.0)),
                                        float(data.get("lo", 0.0)), float(data.get("hi", 1e6)))
    if isinstance(data, list):
        return MonotoneCurve.from_points(data)
    raise ValueError(f"cannot read a curve from {data!r}")


def curve_to_json(curve: MonotoneCurve) -> dict:
    return {"breakpoints": curve.points}


# -- mechanisms


def _params(data: dict) -> AffineParams:
    return AffineParams(
        mu_t=extended_real(data.get("mu_t", 1.0)), mu_s=extended_real(data.get("mu_s", 1.0)),
        gamma12=extended_real(data.get("gamma12", 0.0)), gamma1=extended_real(data.get("gamma1", 0.0)),
        gamma2=extended_real(data.get("gamma2", 0.0)), gamma_empty=extended_real(data.get("gamma_empty", 0.0)))


def _params_json(p: AffineParams) -> dict:
    return {"mu_t": p.mu_t, "mu_s": p.mu_s, "gamma12": dump_real(p.gamma12), "gamma1": dump_real(p.gamma1),
            "gamma2": dump_real(p.gamma2), "gamma_empty": dump_real(p.gamma_empty)}


def mechanism_from_json(data: dict):
    kind = data.get("type")
    if kind == "affine_min":
        return AffineMin(_params(data))
    if kind == "relaxed_affine_min":
        return RelaxedAffineMin(_params(data), curve_from_json(data["xi"]))
    if kind == "bundling":
        return Bundling(curve_from_json(data["xi"]))
    if kind == "task_independent":
        return TaskIndependent(curve_from_json(data["phi"]), curve_from_json(data["eta"]))
    if kind == "constant":
        return Constant(Bundle.parse(data.get("allocation", "empty")))
    if kind == "per_task_linear":
        return PerTaskLinear(data.get("lambda", 1.0), data.get("gamma", 0.0))
    if kind == "anti_monotone":
        return AntiMonotone(float(data.get("kappa", 1.0)))
    if kind == "coupled_affine":
        pair_a, pair_b = data.get("pairs", (1, 2))
        return CoupledAffine(_params(data), int(pair_a), int(pair_b), tuple(data.get("coupling", (0, 0, 0, 0))))
    raise ValueError(f"unknown mechanism type {kind!r}; expected one of {', '.join(MECHANISM_TYPES)}")


def mechanism_to_json(mech) -> dict:
    if isinstance(mech, PerPair):
        return mechanism_to_json(mech.oracle)
    if isinstance(mech, AffineMin):
        return {"type": "affine_min", **_params_json(mech.params)}
    if isinstance(mech, RelaxedAffineMin):
        return {"type": "relaxed_affine_min", **_params_json(mech.params), "xi": curve_to_json(mech.xi)}
    if isinstance(mech, Bundling):
        return {"type": "bundling", "xi": curve_to_json(mech.xi)}
    if isinstance(mech, TaskIndependent):
        return {"type": "task_independent", "phi": curve_to_json(mech.phi), "eta": curve_to_json(mech.eta)}
    if isinstance(mech, Constant):
        return {"type": "constant", "allocation": mech.allocation.label}
    if isinstance(mech, PerTaskLinear):
        return {"type": "per_task_linear", "lambda": list(mech.lambdas), "gamma": list(mech.gammas)}
    if isinstance(mech, AntiMonotone):
        return {"type": "anti_monotone", "kappa": mech.kappa}
    if isinstance(mech, CoupledAffine):
        return {"type": "coupled_affine", **_params_json(mech.base), "pairs": [mech.pair_a, mech.pair_b],
                "coupling": list(mech.coupling)}
    raise ValueError(f"cannot serialize {type(mech).__name__}")
