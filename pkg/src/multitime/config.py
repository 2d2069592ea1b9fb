"""JSON run configuration: strict key checking, defaults and aggregated validation."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .quantum import DEFAULT_CAP, LatticeSpec
from .solver import Endpoints, SolveConfig
from .trajectory import SystemParams

__all__ = ["RunConfig", "parse_config", "load_config", "apply_overrides", "dumps"]

log = logging.getLogger(__name__)

REQUIRED = ("m1", "m2", "coupling", "T1", "n1", "sigma", "endpoints")
TOP_KEYS = {
    "m1", "m2", "coupling", "T1", "T2", "n1", "n2", "sigma", "dim",
    "endpoints", "hbar_tilde", "solver", "lattice", "seed",
}
NESTED_KEYS = {
    "endpoints": {"q1_0", "q1_T", "q2_0", "q2_T"},
    "solver": {"tol", "max_iter", "continuation_steps", "damping"},
    "lattice": {"nt", "nq", "q_min", "q_max", "dim_cap"},
}
SOLVER_DEFAULTS = {"tol": 1e-8, "max_iter": 30, "continuation_steps": 4, "damping": 1.0}
LATTICE_DEFAULTS = {"nt": 2, "nq": 16, "q_min": -2.0, "q_max": 2.0, "dim_cap": DEFAULT_CAP}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    n1: int
    n2: int
    endpoints: Endpoints
    solver: SolveConfig
    hbar_tilde: float
    lattice: dict
    seed: int
    defaults_applied: tuple = ()
    raw: dict = field(default_factory=dict, compare=False)

    def lattice_spec(self) -> LatticeSpec:
        """Lattice settings combined with the (one-dimensional) endpoints."""
        if self.endpoints.dim != 1:
            raise ConfigError([f"quantum lattice needs dim = 1, config has dim = {self.endpoints.dim}"])
        e = self.endpoints
        return LatticeSpec(
            nt=int(self.lattice["nt"]),
            nq=int(self.lattice["nq"]),
            q_min=float(self.lattice["q_min"]),
            q_max=float(self.lattice["q_max"]),
            hbar_tilde=self.hbar_tilde,
            q1_0=float(e.q1_0[0]),
            q1_T=float(e.q1_T[0]),
            q2_0=float(e.q2_0[0]),
            q2_T=float(e.q2_T[0]),
            dim_cap=int(self.lattice["dim_cap"]),
        )


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"], usage=True)
    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"], usage=True) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"], usage=True)
    return data


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``key=value`` (or ``section.key=value``) strings; values are read as JSON."""
    out = json.loads(json.dumps(raw))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not of the form key=value"], usage=True)
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {key!r} descends into a non-object"], usage=True)
        node[parts[-1]] = _parse_value(value.strip())
    return out


def _unknown_keys(raw: dict) -> list[str]:
    bad = [f"unknown key {k!r}" for k in raw if k not in TOP_KEYS]
    for section, allowed in NESTED_KEYS.items():
        sub = raw.get(section)
        if isinstance(sub, dict):
            bad += [f"unknown key {section}.{k!r}" for k in sub if k not in allowed]
    return bad


def _number(errors, name, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{name} must be a number, got {value!r}")
        return None
    if kind is int:
        if float(value) != int(value):
            errors.append(f"{name} must be an integer, got {value!r}")
            return None
        return int(value)
    return float(value)


def _vector(errors, name, value):
    arr = value if isinstance(value, list) else [value]
    if not arr or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in arr):
        errors.append(f"endpoints.{name} must be a number or a list of numbers, got {value!r}")
        return None
    return np.array(arr, dtype=float)


def parse_config(source, overrides=()) -> RunConfig:
    """Build a validated :class:`RunConfig` from a JSON file path or a dict.

    Unknown keys and malformed input raise ``ConfigError(usage=True)``. Every
    physics invariant violation is collected before raising a single
    ``ConfigError`` whose codes name the violated invariants.
    """
    raw = load_config(source) if not isinstance(source, dict) else source
    raw = apply_overrides(raw, overrides)

    problems = _unknown_keys(raw)
    problems += [f"missing required key {k!r}" for k in REQUIRED if k not in raw]
    for section in NESTED_KEYS:
        if section in raw and not isinstance(raw[section], dict):
            problems.append(f"{section} must be an object")
    if problems:
        raise ConfigError(problems, usage=True)

    defaults = []

    def pick(key, default):
        if key in raw:
            return raw[key]
        defaults.append(f"{key}={default}")
        return default

    errs: list[str] = []
    m1 = _number(errs, "m1", raw["m1"])
    m2 = _number(errs, "m2", raw["m2"])
    coupling = _number(errs, "coupling", raw["coupling"])
    T1 = _number(errs, "T1", raw["T1"])
    T2 = _number(errs, "T2", pick("T2", raw["T1"]))
    n1 = _number(errs, "n1", raw["n1"], int)
    n2 = _number(errs, "n2", pick("n2", raw["n1"]), int)
    sigma = _number(errs, "sigma", raw["sigma"])
    hbar = _number(errs, "hbar_tilde", pick("hbar_tilde", 1.0))
    seed = _number(errs, "seed", pick("seed", 0), int)
    if errs:
        raise ConfigError(errs, usage=True)

    ends = {}
    for k in sorted(NESTED_KEYS["endpoints"]):
        if k not in raw["endpoints"]:
            errs.append(f"missing required key endpoints.{k!r}")
        else:
            ends[k] = _vector(errs, k, raw["endpoints"][k])
    if errs:
        raise ConfigError(errs, usage=True)
    dims = {v.size for v in ends.values()}
    if len(dims) != 1:
        raise ConfigError([f"dimension-mismatch: endpoint vectors have sizes {sorted(dims)}"])
    dim = _number(errs, "dim", pick("dim", dims.pop()), int)
    if errs:
        raise ConfigError(errs, usage=True)

    solver_raw = {**SOLVER_DEFAULTS, **raw.get("solver", {})}
    defaults += [f"solver.{k}={v}" for k, v in SOLVER_DEFAULTS.items() if k not in raw.get("solver", {})]
    lattice = {**LATTICE_DEFAULTS, **raw.get("lattice", {})}
    defaults += [f"lattice.{k}={v}" for k, v in LATTICE_DEFAULTS.items() if k not in raw.get("lattice", {})]
    for k, v in solver_raw.items():
        _number(errs, f"solver.{k}", v, int if k in ("max_iter", "continuation_steps") else float)
    for k, v in lattice.items():
        _number(errs, f"lattice.{k}", v, int if k in ("nt", "nq", "dim_cap") else float)
    if errs:
        raise ConfigError(errs, usage=True)

    # Invariant checks: everything is collected before raising.
    for name, value in (("m1", m1), ("m2", m2)):
        if not (math.isfinite(value) and value > 0):
            errs.append(f"invalid-mass: {name} must be positive, got {value}")
    for name, value in (("T1", T1), ("T2", T2)):
        if not (math.isfinite(value) and value > 0):
            errs.append(f"invalid-horizon: {name} must be positive, got {value}")
    if not (math.isfinite(sigma) and sigma > 0):
        errs.append(f"invalid-regularization: sigma must be positive, got {sigma}")
    if not math.isfinite(coupling):
        errs.append(f"invalid-coupling: coupling must be finite, got {coupling}")
    for name, value in (("n1", n1), ("n2", n2)):
        if value < 2:
            errs.append(f"invalid-grid: {name} must be >= 2, got {value}")
    if not (math.isfinite(hbar) and hbar > 0):
        errs.append(f"invalid-hbar-tilde: hbar_tilde must be positive, got {hbar}")
    if dim not in (1, 2, 3):
        errs.append(f"invalid-dimension: dim must be 1, 2 or 3, got {dim}")
    elif dim != ends["q1_0"].size:
        errs.append(f"dimension-mismatch: dim = {dim} but endpoints have {ends['q1_0'].size} components")
    for a, T in ((1, T1), (2, T2)):
        q0, qT = ends[f"q{a}_0"], ends[f"q{a}_T"]
        if T > 0 and float(np.linalg.norm(qT - q0)) >= T:
            errs.append(f"no-timelike-path: particle {a} endpoints are {np.linalg.norm(qT - q0):.17g} apart in time {T}")
    solver = None
    try:
        solver = SolveConfig(
            tol=float(solver_raw["tol"]),
            max_iter=int(solver_raw["max_iter"]),
            continuation_steps=int(solver_raw["continuation_steps"]),
            damping=float(solver_raw["damping"]),
        )
    except ValueError as exc:
        errs.append(f"invalid-solver: {exc}")
    if lattice["nt"] < 2 or lattice["nq"] < 2 or not lattice["q_max"] > lattice["q_min"]:
        errs.append("invalid-lattice: need nt >= 2, nq >= 2 and q_max > q_min")
    if lattice["dim_cap"] < 1:
        errs.append(f"invalid-lattice: dim_cap must be positive, got {lattice['dim_cap']}")
    if errs:
        raise ConfigError(errs)

    for item in defaults:
        log.info("default applied: %s", item)
    return RunConfig(
        params=SystemParams(m1, m2, coupling, T1, T2, sigma, dim),
        n1=n1,
        n2=n2,
        endpoints=Endpoints(ends["q1_0"], ends["q1_T"], ends["q2_0"], ends["q2_T"]),
        solver=solver,
        hbar_tilde=hbar,
        lattice=lattice,
        seed=seed,
        defaults_applied=tuple(defaults),
        raw=raw,
    )


def with_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    return cfg if seed is None else replace(cfg, seed=int(seed))


# -- deterministic JSON ------------------------------------------------------


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in obj):
            return "[" + ", ".join(_encode(x, indent, level + 1) for x in obj) + "]"
        items = [pad + _encode(x, indent, level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits; NaN and inf become null."""
    return _encode(obj, indent, 0) + "\n"
