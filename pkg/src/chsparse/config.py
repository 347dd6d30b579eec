"""Experiment configuration: YAML schema, defaults and validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .control import Control
from .grid import GridSpec, build_grid
from .io import read_field
from .model import CostParams, ModelParams
from .optimizer import OptimizerConfig
from .state import InitialData, SolverOptions, TimeGrid


class ConfigError(ValueError):
    """Schema or value error; the message starts with the dotted key path."""


DEFAULTS: dict = {
    "seed": 0,
    "model": {"alpha": 1.0, "beta": 1.0, "chi": 0.1, "k": 1.2, "p_kind": "logistic-smooth",
              "p_coeffs": {"p0": 0.5, "scale": 1.0}, "sep_eps": 1e-6},
    "cost": {"b1": 1.0, "b2": 1.0, "b3": 0.05, "kappa": 0.005, "bounds": [-1.0, 1.0, -1.0, 1.0],
             "target_q": {"type": "cosine-bump", "amplitude": -0.3},
             "target_omega": {"type": "cosine-bump", "amplitude": -0.3},
             "h": 1.0},
    "init": {"mu0": 0.0, "phi0": {"type": "cosine-bump", "amplitude": 0.5}, "sigma0": 1.0},
    "control": {"u1": 0.0, "u2": 0.0},
    "solver": {"newton_tol": 1e-10, "max_iters": 50, "clamp_budget": 10000, "guess": "previous"},
    "optimizer": {"step_init": None, "backtrack_factor": 0.5, "max_outer_iters": 500,
                  "stat_tol": 1e-8, "min_step": 1e-12},
    "certification": {"enabled": True, "n_directions": 50, "growth_probes": 100, "growth_eps": 1e-2,
                      "band_tol": 1e-4, "act_tol": None, "vi_samples": 100, "vi_tol": 1e-6,
                      "projection_tol": 1e-6},
    "diagnostics": {"control": {"u1": 0.1, "u2": 0.05}, "gradient_dirs": 5,
                    "eps_list": [1e-2, 1e-3, 1e-4, 1e-5], "hessian_dirs": 3, "hessian_eps": 1e-3,
                    "continuity_deltas": [1e-1, 1e-2, 1e-3], "mms_levels": 4},
    "output": {"dir": "out", "formats": ["binary"]},
}

SECTIONS = set(DEFAULTS) | {"grid", "time"}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base and path:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base.get(key), dict) and key != "p_coeffs" and not _is_field_spec(base[key]):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _is_field_spec(v) -> bool:
    return isinstance(v, dict) and "type" in v


@dataclass(eq=False)
class ExperimentConfig:
    raw: dict
    source: Path | None
    grid: GridSpec
    time_grid: TimeGrid
    params: ModelParams
    cost: CostParams
    init: InitialData
    control: Control
    solver: SolverOptions
    optimizer: OptimizerConfig
    certification: dict
    diagnostics: dict
    seed: int
    out_dir: Path
    formats: list

    def with_overrides(self, seed: int | None = None, out_dir: str | Path | None = None) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = int(seed)
        if out_dir is not None:
            raw["output"]["dir"] = str(out_dir)
        return build_config(raw, self.source)


def _number(d: dict, key: str, path: str, *, positive=False, nonneg=False, integer=False):
    where = f"{path}.{key}" if path else key
    val = _coerce(d.get(key))
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where} must be a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(f"{where} must be an integer")
    if not np.isfinite(val):
        raise ConfigError(f"{where} must be finite")
    if positive and not val > 0:
        raise ConfigError(f"{where} must be > 0")
    if nonneg and val < 0:
        raise ConfigError(f"{where} must be >= 0")
    return int(val) if integer else float(val)


def _coerce(val):
    # YAML 1.1 reads exponent literals such as 1e-3 as strings
    if isinstance(val, str):
        try:
            return float(val)
        except ValueError:
            return val
    return val


def field_values(spec, grid: GridSpec, path: str, base_dir: Path | None) -> np.ndarray:
    """Evaluate a spatial field spec: number, ``constant``, ``cosine-bump`` or ``file``."""
    spec = _coerce(spec)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.full(grid.n_nodes, float(spec))
    if not _is_field_spec(spec):
        raise ConfigError(f"{path} must be a number or a mapping with a 'type'")
    kind = spec["type"]
    if kind == "constant":
        return np.full(grid.n_nodes, _number(spec, "value", path))
    if kind == "cosine-bump":
        amp = float(spec.get("amplitude", 1.0))
        offset = float(spec.get("offset", 0.0))
        modes = spec.get("modes", [1] * grid.dim)
        if len(modes) != grid.dim:
            raise ConfigError(f"{path}.modes needs one entry per axis")
        vals = np.ones(grid.n_nodes)
        for x, m, e in zip(grid.coordinates(), modes, grid.extents):
            vals = vals * np.cos(np.pi * m * x / e)
        return offset + amp * vals
    if kind == "file":
        fp = Path(spec.get("path", ""))
        if base_dir is not None and not fp.is_absolute():
            fp = base_dir / fp
        if not fp.is_file():
            raise ConfigError(f"{path}.path: file {fp} does not exist")
        if fp.suffix == ".chsf":
            data, _ = read_field(fp)
            vals = np.asarray(data)[-1]
        else:
            vals = np.loadtxt(fp, delimiter="," if fp.suffix == ".csv" else None).reshape(-1)
        if vals.size != grid.n_nodes:
            raise ConfigError(f"{path}: file has {vals.size} values, grid has {grid.n_nodes} nodes")
        return vals.astype(float)
    raise ConfigError(f"{path}.type must be constant, cosine-bump or file, got {kind!r}")


def _grid(raw) -> GridSpec:
    g = raw.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("grid: required mapping with dim, extents, counts")
    dim = _number(g, "dim", "grid", integer=True)
    extents, counts = g.get("extents"), g.get("counts")
    if not isinstance(extents, list) or not isinstance(counts, list):
        raise ConfigError("grid.extents and grid.counts must be lists")
    if dim not in (1, 2) or len(extents) != dim or len(counts) != dim:
        raise ConfigError("grid.dim must be 1 or 2 with one extent and count per axis")
    if any(not isinstance(c, int) or c < 3 for c in counts):
        raise ConfigError("grid.counts must be integers >= 3")
    if any(not isinstance(e, (int, float)) or not e > 0 for e in extents):
        raise ConfigError("grid.extents must be > 0")
    return build_grid(dim, extents, counts)


def build_config(raw_in: dict, source: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw_in, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw_in) - SECTIONS
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
    raw = _merge(DEFAULTS, {k: v for k, v in raw_in.items() if k not in ("grid", "time")})
    raw["grid"], raw["time"] = copy.deepcopy(raw_in.get("grid")), copy.deepcopy(raw_in.get("time"))
    base_dir = source.parent if source is not None else None

    grid = _grid(raw)
    t = raw.get("time")
    if not isinstance(t, dict):
        raise ConfigError("time: required mapping with T and steps")
    tg = TimeGrid(_number(t, "T", "time", positive=True), _number(t, "steps", "time", positive=True, integer=True))

    m = raw["model"]
    for key in ("alpha", "beta", "chi"):
        _number(m, key, "model", positive=True)
    sep = _number(m, "sep_eps", "model", positive=True)
    if not sep < 0.1:
        raise ConfigError("model.sep_eps must lie in (0, 0.1)")
    try:
        params = ModelParams(alpha=m["alpha"], beta=m["beta"], chi=m["chi"], f2_k=_number(m, "k", "model"),
                             p_kind=m["p_kind"], p_coeffs=dict(m["p_coeffs"]), sep_eps=sep)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc

    c = raw["cost"]
    b1 = _number(c, "b1", "cost", nonneg=True)
    b2 = _number(c, "b2", "cost", nonneg=True)
    b3 = _number(c, "b3", "cost", positive=True)
    kappa = _number(c, "kappa", "cost", positive=True)
    bounds = c["bounds"]
    if not isinstance(bounds, list) or len(bounds) != 4:
        raise ConfigError("cost.bounds must be [lo1, hi1, lo2, hi2]")
    try:
        lo1, hi1, lo2, hi2 = (float(b) for b in bounds)
    except (TypeError, ValueError) as exc:
        raise ConfigError("cost.bounds entries must be numbers") from exc
    if not (lo1 < hi1 and lo2 < hi2):
        raise ConfigError("cost.bounds: need lower < upper for both components")
    cert = raw["certification"]
    if cert["enabled"]:
        for i, (lo, hi) in enumerate(((lo1, hi1), (lo2, hi2)), start=1):
            if not lo < 0 < hi:
                raise ConfigError(f"cost.bounds: component {i} must satisfy lower < 0 < upper "
                                  "when certification is enabled")
    tq = field_values(c["target_q"], grid, "cost.target_q", base_dir)
    to = field_values(c["target_omega"], grid, "cost.target_omega", base_dir)
    hf = field_values(c["h"], grid, "cost.h", base_dir)
    if np.any(hf < 0):
        raise ConfigError("cost.h must be >= 0 everywhere")
    cost = CostParams(b1, b2, b3, kappa, np.broadcast_to(tq, (tg.steps + 1, grid.n_nodes)).copy(), to,
                      (lo1, hi1, lo2, hi2), np.broadcast_to(hf, (tg.steps, grid.n_nodes)).copy())

    ini = raw["init"]
    phi0 = field_values(ini["phi0"], grid, "init.phi0", base_dir)
    if np.max(np.abs(phi0)) >= 1:
        raise ConfigError("init.phi0 must satisfy max|phi0| < 1")
    init = InitialData(grid, field_values(ini["mu0"], grid, "init.mu0", base_dir), phi0,
                       field_values(ini["sigma0"], grid, "init.sigma0", base_dir))

    def control_from(spec, path):
        u1 = field_values(spec["u1"], grid, f"{path}.u1", base_dir)
        u2 = field_values(spec["u2"], grid, f"{path}.u2", base_dir)
        shape = (tg.steps, grid.n_nodes)
        return Control(np.broadcast_to(u1, shape).copy(), np.broadcast_to(u2, shape).copy())

    control = control_from(raw["control"], "control")

    s = raw["solver"]
    if s["guess"] not in ("previous", "extrapolated"):
        raise ConfigError("solver.guess must be 'previous' or 'extrapolated'")
    solver = SolverOptions(newton_tol=_number(s, "newton_tol", "solver", positive=True),
                           max_iters=_number(s, "max_iters", "solver", positive=True, integer=True),
                           clamp_budget=_number(s, "clamp_budget", "solver", nonneg=True, integer=True),
                           guess=s["guess"])

    o = raw["optimizer"]
    step_init = None if o["step_init"] is None else _number(o, "step_init", "optimizer", positive=True)
    bf = _number(o, "backtrack_factor", "optimizer", positive=True)
    if not bf < 1:
        raise ConfigError("optimizer.backtrack_factor must be < 1")
    opt = OptimizerConfig(step_init=step_init, backtrack_factor=bf,
                          max_outer_iters=_number(o, "max_outer_iters", "optimizer", nonneg=True, integer=True),
                          stat_tol=_number(o, "stat_tol", "optimizer", positive=True),
                          min_step=_number(o, "min_step", "optimizer", positive=True))

    for key in ("n_directions", "growth_probes", "vi_samples"):
        _number(cert, key, "certification", positive=True, integer=True)
    for key in ("growth_eps", "band_tol", "vi_tol", "projection_tol"):
        _number(cert, key, "certification", positive=True)
    if cert["act_tol"] is not None:
        _number(cert, "act_tol", "certification", positive=True)

    diag = dict(raw["diagnostics"])
    try:
        diag["eps_list"] = [float(e) for e in diag["eps_list"]]
        diag["continuity_deltas"] = [float(e) for e in diag["continuity_deltas"]]
    except (TypeError, ValueError) as exc:
        raise ConfigError("diagnostics.eps_list and continuity_deltas must be lists of numbers") from exc
    for key in ("gradient_dirs", "hessian_dirs"):
        _number(diag, key, "diagnostics", positive=True, integer=True)
    _number(diag, "hessian_eps", "diagnostics", positive=True)
    diag["control"] = control_from(raw["diagnostics"]["control"], "diagnostics.control")
    _number(diag, "mms_levels", "diagnostics", positive=True, integer=True)
    if diag["mms_levels"] < 2:
        raise ConfigError("diagnostics.mms_levels must be >= 2")

    seed = _number(raw, "seed", "", nonneg=True, integer=True) if "seed" in raw else 0
    out = raw["output"]
    formats = list(out.get("formats", ["binary"]))
    if any(f not in ("binary", "csv") for f in formats):
        raise ConfigError("output.formats entries must be 'binary' or 'csv'")
    return ExperimentConfig(raw, source, grid, tg, params, cost, init, control, solver, opt,
                            dict(cert), diag, seed, Path(out["dir"]), formats)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path}: invalid YAML ({exc})") from exc
    return build_config(raw or {}, path)


def shipped_config(name: str) -> Path:
    """Path of a config bundled with the package, e.g. ``shipped_config("baseline")``."""
    path = Path(__file__).parent / "configs" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"no shipped config named {name!r}")
    return path


def shipped_config_names() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "configs").glob("*.yaml"))
