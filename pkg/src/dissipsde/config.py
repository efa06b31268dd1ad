"""Declarative model and experiment specifications.

A specification is a JSON document (or an equivalent dict) with the shape

    {
      "experiment": "simulate|couple|harnack|gradient|invariant|ultrabound|yosida-table",
      "model":  { ... },          # see build_model
      "params": { ... },          # experiment parameters
      "seed":   12345,
      "allow_coarse_dt": false    # loud override of the dt <= alpha/4 rule
    }

Specifications round-trip losslessly through normalize/to_dict, and a
manifest written by the runner ({"config": {...}, ...}) can be loaded in
place of a config file.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import BoundedRational, ExpLinear, IndicatorBall
from .errors import ConfigError
from .spectral import SpectralModel, build_diagonal_model, build_dirichlet_model
from .ultrabound import PowerPhi, TablePhi, UltraboundSpec

EXPERIMENTS = ("simulate", "couple", "harnack", "gradient", "invariant",
               "ultrabound", "yosida-table")
STATISTICAL_EXPERIMENTS = ("couple", "harnack", "gradient")


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    model: dict
    params: dict
    seed: int
    allow_coarse_dt: bool = False

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": copy.deepcopy(self.model),
            "params": copy.deepcopy(self.params),
            "seed": self.seed,
            "allow_coarse_dt": self.allow_coarse_dt,
        }


def bundled_config_names() -> list:
    root = resources.files("dissipsde").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config(arg) -> dict:
    """Load a config by bundled name, file path, or pass a dict through."""
    if isinstance(arg, dict):
        return copy.deepcopy(arg)
    path = Path(str(arg))
    if path.exists():
        obj = json.loads(path.read_text())
    else:
        res = resources.files("dissipsde").joinpath(f"configs/{arg}.json")
        if not res.is_file():
            raise ConfigError("config", f"no file {arg!r} and no bundled config "
                                        f"of that name (have {bundled_config_names()})")
        obj = json.loads(res.read_text())
    if "config" in obj and "experiment" not in obj:
        obj = obj["config"]  # manifest written by a previous run
    return obj


def load_spec(obj, experiment: Optional[str] = None) -> ExperimentSpec:
    obj = resolve_config(obj)
    exp = experiment or obj.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"{exp!r} is not one of {EXPERIMENTS}")
    if "model" not in obj and exp not in ("ultrabound", "yosida-table"):
        raise ConfigError("model", "missing model section")
    spec = ExperimentSpec(
        experiment=exp,
        model=copy.deepcopy(obj.get("model", {})),
        params=copy.deepcopy(obj.get("params", {})),
        seed=int(obj.get("seed", 0)),
        allow_coarse_dt=bool(obj.get("allow_coarse_dt", False)),
    )
    validate_spec(spec)
    return spec


def apply_override(spec_dict: dict, dotted_key: str, value) -> dict:
    """Set a dotted key (e.g. model.drift.alpha) in a copied spec dict."""
    out = copy.deepcopy(spec_dict)
    node = out
    parts = dotted_key.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# model construction

def build_model(model_spec: dict) -> SpectralModel:
    kind = model_spec.get("kind")
    if kind == "dirichlet":
        n = int(model_spec.get("dimension", 0))
        if n < 1:
            raise ConfigError("model.dimension", "must be a positive integer")
        drift = model_spec.get("drift", {"kind": "zero"})
        dkind = drift.get("kind", "zero")
        kwargs = dict(
            sigma_spec=_sigma_spec(model_spec.get("sigma", 1.0)),
            oversampling=int(model_spec.get("oversampling", 8)),
            q_coeffs=model_spec.get("q_coeffs"),
            sigma_inv_norm=model_spec.get("sigma_inv_norm"),
            name=model_spec.get("name", "dirichlet"),
        )
        if dkind == "zero":
            return build_dirichlet_model(n, None, **kwargs)
        if dkind == "nemytskii":
            smoothing = drift.get("smoothing")
            return build_dirichlet_model(
                n, drift["map"],
                regularization=drift.get("regularization", "yosida"),
                alpha=float(drift.get("alpha", 1e-2)),
                smoothing_beta=smoothing.get("beta") if smoothing else None,
                smoothing_nodes=int(smoothing.get("node_count", 32)) if smoothing else 32,
                smoothing_seed=int(smoothing.get("node_seed", 0)) if smoothing else 0,
                **kwargs)
        raise ConfigError("model.drift.kind",
                          f"{dkind!r} not supported on a dirichlet model")
    if kind == "diagonal":
        a = model_spec.get("a_eigs")
        if not a:
            raise ConfigError("model.a_eigs", "diagonal model needs a_eigs")
        drift = model_spec.get("drift", {"kind": "zero"})
        dkind = drift.get("kind", "zero")
        from .spectral import LinearDrift, ZeroDrift
        if dkind == "zero":
            dobj = ZeroDrift()
        elif dkind == "linear":
            coeff = drift.get("coeff", -1.0)
            if np.max(np.asarray(coeff)) > 0:
                raise ConfigError("model.drift.coeff",
                                  "linear drift coefficient must be <= 0")
            dobj = LinearDrift(coeff)
        else:
            raise ConfigError("model.drift.kind",
                              f"{dkind!r} not supported on a diagonal model")
        return build_diagonal_model(
            a, _sigma_spec(model_spec.get("sigma", 1.0)),
            omega=model_spec.get("omega"),
            drift=dobj,
            sigma_inv_norm=model_spec.get("sigma_inv_norm"),
            q_coeffs=model_spec.get("q_coeffs"),
            name=model_spec.get("name", "diagonal"))
    raise ConfigError("model.kind", f"{kind!r} is not 'dirichlet' or 'diagonal'")


def _sigma_spec(raw):
    if isinstance(raw, list):
        return np.asarray(raw, dtype=float)
    return raw


def build_test_function(f_spec: dict):
    kind = f_spec.get("kind")
    if kind == "exp_linear":
        return ExpLinear(f_spec["h"], float(f_spec["lam"]))
    if kind == "bounded_rational":
        return BoundedRational(f_spec["center"])
    if kind == "indicator_ball":
        return IndicatorBall(f_spec["center"], float(f_spec["radius"]),
                             ramp_width=f_spec.get("ramp_width"))
    raise ConfigError("params.f.kind", f"unknown test function {kind!r}")


def build_ultrabound_spec(params: dict) -> UltraboundSpec:
    phi_spec = params.get("phi", {"kind": "power", "m": 2})
    if phi_spec.get("kind") == "power":
        phi = PowerPhi(float(phi_spec["m"]))
    elif phi_spec.get("kind") == "table":
        phi = TablePhi(phi_spec["xs"], phi_spec["ys"])
    else:
        raise ConfigError("params.phi.kind", "must be 'power' or 'table'")
    return UltraboundSpec(phi=phi, c=float(params.get("c", 0.0)),
                          a=params.get("a"))


# ---------------------------------------------------------------------------
# validation

def _require(params: dict, keys, experiment: str):
    for key in keys:
        if key not in params:
            raise ConfigError(f"params.{key}",
                              f"required for the {experiment!r} experiment")


def validate_spec(spec: ExperimentSpec) -> None:
    exp, params = spec.experiment, spec.params

    if exp == "simulate":
        _require(params, ("t_end", "dt"), exp)
    elif exp == "couple":
        _require(params, ("T", "dt", "N", "x0", "y0"), exp)
        for p in params.get("p_values", [2.0]):
            if p <= 1:
                raise ConfigError("params.p_values", f"p = {p} violates p > 1")
    elif exp == "harnack":
        _require(params, ("t", "dt", "N", "x0", "y0", "p", "f"), exp)
        if params["p"] <= 1:
            raise ConfigError("params.p", f"p = {params['p']} violates p > 1")
    elif exp == "gradient":
        _require(params, ("t", "dt", "N", "x0", "y0", "f"), exp)
    elif exp == "invariant":
        _require(params, ("burn_in", "horizon", "dt"), exp)
        if params["horizon"] <= params["burn_in"]:
            raise ConfigError("params.horizon", "must exceed burn_in")
    elif exp == "ultrabound":
        _require(params, ("phi",), exp)
    elif exp == "yosida-table":
        _require(params, ("map", "alpha_grid", "r_grid"), exp)
        if not params["alpha_grid"] or not params["r_grid"]:
            raise ConfigError("params.alpha_grid", "grids must be nonempty")

    if exp in STATISTICAL_EXPERIMENTS:
        n = int(params.get("N", 0))
        if n < 100:
            raise ConfigError("params.N",
                              f"N = {n} < 100: statistical experiments need N >= 100")

    dt = params.get("dt")
    alpha = _spec_alpha(spec.model)
    if (dt is not None and alpha is not None and dt > alpha / 4.0 + 1e-15
            and not spec.allow_coarse_dt):
        raise ConfigError(
            "params.dt",
            f"dt = {dt} exceeds alpha/4 = {alpha/4} for the Yosida-regularized "
            "drift; set allow_coarse_dt to override")


def _spec_alpha(model_spec: dict) -> Optional[float]:
    drift = model_spec.get("drift") or {}
    if drift.get("kind") == "nemytskii" and drift.get("regularization", "yosida") == "yosida":
        return float(drift.get("alpha", 1e-2))
    return None
