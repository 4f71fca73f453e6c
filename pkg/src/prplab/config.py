"""YAML scenario configuration: schema, validation, construction.

A config file describes one batch run: the survival model, the horizon,
the payoff, the formula list, tolerances and output location.  All
validation happens before any simulation and error messages name the
offending field.  Seed derivation is fixed (master_seed, path_index via
numpy SeedSequence), so identical configs produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from . import representations as rep
from .models import ModelSpec
from .random_time import CdfSpec
from .solvers import StateFunction, TimeFunction

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Raised for any invalid or missing configuration field."""


@dataclass
class ScenarioConfig:
    model: ModelSpec
    horizon: float
    n_paths: int
    master_seed: int
    h: object
    formulas: tuple
    tol_pathwise: float = 1e-9
    tol_recursion: float = 1e-12
    out_dir: str = "out"
    paths_sample: int = 3
    mc_paths: int = 0


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing field '{where}{key}'")
    return mapping[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{where}' must be a number")
    return float(value)


def _positive_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"field '{where}' must be a positive integer")
    return value


def _build_cdf(raw: dict) -> CdfSpec:
    if not isinstance(raw, dict):
        raise ConfigError("field 'model.cdf' must be a mapping")
    bg = _require(raw, "background", "model.cdf.")
    if not isinstance(bg, dict) or "type" not in bg:
        raise ConfigError("field 'model.cdf.background' must set 'type'")
    if bg["type"] == "exponential":
        rate = _number(_require(bg, "rate", "model.cdf.background."), "model.cdf.background.rate")
        if rate <= 0:
            raise ConfigError("field 'model.cdf.background.rate' must be > 0")
        background = ("exponential", rate)
    elif bg["type"] == "pwlinear":
        ts = tuple(float(t) for t in _require(bg, "times", "model.cdf.background."))
        ms = tuple(float(m) for m in _require(bg, "masses", "model.cdf.background."))
        background = ("pwlinear", ts, ms)
    else:
        raise ConfigError("field 'model.cdf.background.type' must be 'exponential' or 'pwlinear'")
    atoms = []
    for j, atom in enumerate(raw.get("atoms", [])):
        if not isinstance(atom, dict) or "t" not in atom or "p" not in atom:
            raise ConfigError(f"field 'model.cdf.atoms[{j}]' must set 't' and 'p'")
        atoms.append((_number(atom["t"], f"model.cdf.atoms[{j}].t"),
                      _number(atom["p"], f"model.cdf.atoms[{j}].p")))
    try:
        return CdfSpec(background=background, atoms=tuple(atoms))
    except ValueError as exc:
        raise ConfigError(f"field 'model.cdf' invalid: {exc}") from exc


def _build_model(raw: dict, lam: float) -> ModelSpec:
    kind = _require(raw, "kind", "model.")
    if kind == "cox_poisson":
        return ModelSpec.cox_poisson(lam)
    if kind == "cox_intensity":
        a = _require(raw, "intensities", "model.")
        if not isinstance(a, list) or not a:
            raise ConfigError("field 'model.intensities' must be a non-empty list")
        vals = tuple(_number(v, "model.intensities") for v in a)
        if any(v <= 0 for v in vals):
            raise ConfigError("field 'model.intensities' entries must be > 0")
        return ModelSpec.cox_intensity(vals, lam)
    if kind == "independent":
        return ModelSpec.independent(_build_cdf(_require(raw, "cdf", "model.")), lam)
    raise ConfigError(
        "field 'model.kind' must be one of cox_poisson, cox_intensity, independent"
    )


def _build_h(raw: dict):
    if not isinstance(raw, dict) or "type" not in raw:
        raise ConfigError("field 'h' must be a mapping with a 'type'")
    kind = raw["type"]
    if kind == "indicator":
        k = raw.get("k", 0)
        if isinstance(k, bool) or not isinstance(k, int) or k < 0:
            raise ConfigError("field 'h.k' must be a non-negative integer")
        return StateFunction.indicator(k)
    if kind == "constant":
        return StateFunction.constant(_number(raw.get("c", 1.0), "h.c"))
    if kind == "exponential":
        beta = _number(raw.get("beta", 1.0), "h.beta")
        if beta < 0:
            raise ConfigError("field 'h.beta' must be >= 0")
        return StateFunction.exponential(beta)
    if kind == "time_indicator":
        cut = _number(raw.get("cut", 1.0), "h.cut")
        if cut <= 0:
            raise ConfigError("field 'h.cut' must be > 0")
        return TimeFunction.indicator_until(cut)
    if kind == "time_constant":
        return TimeFunction.constant(_number(raw.get("c", 1.0), "h.c"))
    raise ConfigError(
        "field 'h.type' must be one of indicator, constant, exponential, "
        "time_indicator, time_constant"
    )


def _build_formulas(raw, model: ModelSpec, h) -> tuple:
    if raw in (None, "all"):
        chosen = [
            f for f in rep.FORMULAS
            if f != rep.NAIVE and rep.applicable(f, model, h)
        ]
        return tuple(chosen)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("field 'formulas' must be 'all' or a non-empty list")
    out = []
    for name in raw:
        if name not in rep.FORMULAS:
            raise ConfigError(f"field 'formulas' has unknown entry '{name}'")
        reason = rep.applicability_reason(name, model, h)
        if reason is not None:
            raise ConfigError(f"field 'formulas': {name} not applicable ({reason})")
        out.append(name)
    return tuple(out)


def parse_config(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    lam = _number(_require(raw, "lambda", ""), "lambda")
    if lam < 0:
        raise ConfigError("lambda must be ≥ 0")
    if lam == 0:
        raise ConfigError("lambda must be > 0 for a non-degenerate path law")
    horizon = _number(_require(raw, "horizon", ""), "horizon")
    if horizon <= 0:
        raise ConfigError("field 'horizon' must be > 0")
    model = _build_model(_require(raw, "model", ""), lam)
    n_paths = _positive_int(_require(raw, "n_paths", ""), "n_paths")
    master_seed = _require(raw, "master_seed", "")
    if isinstance(master_seed, bool) or not isinstance(master_seed, int) or master_seed < 0:
        raise ConfigError("field 'master_seed' must be a non-negative integer")
    h = _build_h(_require(raw, "h", ""))
    if not model.admissible_h(h):
        raise ConfigError("field 'h': payoff type not admissible for this model kind")
    formulas = _build_formulas(raw.get("formulas", "all"), model, h)
    tols = raw.get("tolerances", {}) or {}
    tol_pathwise = _number(tols.get("pathwise_abs", 1e-9), "tolerances.pathwise_abs")
    tol_recursion = _number(tols.get("recursion_abs", 1e-12), "tolerances.recursion_abs")
    if tol_pathwise <= 0 or tol_recursion <= 0:
        raise ConfigError("field 'tolerances' entries must be > 0")
    paths_sample = raw.get("paths_sample", 3)
    if isinstance(paths_sample, bool) or not isinstance(paths_sample, int) or paths_sample < 0:
        raise ConfigError("field 'paths_sample' must be a non-negative integer")
    mc_paths = raw.get("mc_paths", 0)
    if isinstance(mc_paths, bool) or not isinstance(mc_paths, int) or mc_paths < 0:
        raise ConfigError("field 'mc_paths' must be a non-negative integer")
    out_dir = raw.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("field 'output_dir' must be a non-empty string")
    return ScenarioConfig(
        model=model,
        horizon=horizon,
        n_paths=n_paths,
        master_seed=master_seed,
        h=h,
        formulas=formulas,
        tol_pathwise=tol_pathwise,
        tol_recursion=tol_recursion,
        out_dir=out_dir,
        paths_sample=paths_sample,
        mc_paths=mc_paths,
    )


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    return parse_config(raw)
