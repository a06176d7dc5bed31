"""Run configuration: a JSON document with fixed sections.

Example::

    {
      "params": {"p": 2, "s": 0.75, "m": 0, "vartheta": 2.5},
      "grid": {"dim": 1, "cells": 32},
      "stationary": {"lambda": 0.1, "g0": 1.0, "b": {"expr": "1 + x"}},
      "evolution": {"T": 1, "n0": 100, "source": {"expr": "1 + exp(-t)*sin(pi*x)"},
                    "u0": {"stationary": 1.0}},
      "minimizer": {"grad_tol": 1e-11},
      "seed": 0
    }

A source is a number, ``{"constant": c}``, ``{"expr": "..."}``,
``{"csv": "path"}`` (``node_index`` plus one value column) or
``{"table": [[...], ...]}`` (one row per time step, or a single row). The
initial state may also be ``{"stationary": <source>}``: the solution of the
limit problem with that source. Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .expr import Expression, ExpressionError
from .grid import Grid, build_grid
from .io import CSVFormatError, read_node_csv
from .minimize import MinimizeOptions
from .params import ModelParams, ParamsError, require_valid


class ConfigError(ValueError):
    pass


SECTIONS = {
    "params": {f.name for f in fields(ModelParams)},
    "grid": {"dim", "cells", "box_lengths"},
    "stationary": {"lambda", "g0", "b", "g_lower"},
    "evolution": {"T", "n0", "source", "u0"},
    "minimizer": {f.name for f in fields(MinimizeOptions)},
    "verify": {"lam", "g_lower", "T", "n0", "n_nodes"},
}
TOP_LEVEL = set(SECTIONS) | {"seed", "threads", "output_dir"}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _number(v, where, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where} must be a finite number")
    if integer and int(v) != v:
        raise ConfigError(f"{where} must be an integer")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class SourceSpec:
    """Unevaluated source description; see the module docstring."""

    kind: str
    value: Any
    base_dir: Path = Path(".")

    @classmethod
    def parse(cls, raw, where, base_dir=Path("."), allow_stationary=False) -> "SourceSpec":
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return cls("constant", _number(raw, where), base_dir)
        if not isinstance(raw, dict) or len(raw) != 1:
            raise ConfigError(f"{where} must be a number or a single-key object")
        (kind, val), = raw.items()
        kinds = {"constant", "expr", "csv", "table"} | ({"stationary"} if allow_stationary else set())
        if kind not in kinds:
            raise ConfigError(f"unknown source kind {kind!r} in {where}")
        if kind == "constant":
            return cls(kind, _number(val, where), base_dir)
        if kind == "expr":
            try:
                return cls(kind, Expression(val), base_dir)
            except ExpressionError as exc:
                raise ConfigError(f"{where}: {exc}") from None
        if kind == "csv":
            if not isinstance(val, str):
                raise ConfigError(f"{where}: csv path must be a string")
            return cls(kind, val, base_dir)
        if kind == "table":
            try:
                arr = np.array(val, dtype=float)
            except (TypeError, ValueError):
                raise ConfigError(f"{where}: table must be numeric") from None
            if arr.ndim not in (1, 2) or not np.all(np.isfinite(arr)):
                raise ConfigError(f"{where}: table must be a finite 1D or 2D array")
            return cls(kind, arr, base_dir)
        return cls(kind, cls.parse(val, f"{where}.stationary", base_dir), base_dir)

    @property
    def time_dependent(self) -> bool:
        if self.kind == "expr":
            return "t" in self.value.variables
        return self.kind == "table" and self.value.ndim == 2

    def nodal(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        """Values on the nodes at time ``t`` (tables: their first row)."""
        n = grid.n_nodes
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "expr":
            try:
                return self.value(t, grid.nodes, grid.bdist)
            except ExpressionError as exc:
                raise ConfigError(str(exc)) from None
        if self.kind == "csv":
            path = Path(self.value)
            if not path.is_absolute():
                path = self.base_dir / path
            return read_node_csv(path, n)
        arr = self.value if self.value.ndim == 1 else self.value[0]
        if arr.shape != (n,):
            raise ConfigError(f"table rows must have {n} entries, got {arr.shape[0]}")
        return np.array(arr)

    def evolution_source(self, grid: Grid, n0: int):
        """Argument for :class:`~mixloc.evolution.EvolutionProblem`."""
        if self.kind == "expr":
            expr = self.value

            def sampler(t, X):
                return expr(t, X, grid.bdist)

            return sampler
        if self.kind == "table" and self.value.ndim == 2:
            if self.value.shape != (n0, grid.n_nodes):
                raise ConfigError(f"source table must have shape ({n0}, {grid.n_nodes}), got {self.value.shape}")
            return np.array(self.value)
        return self.nodal(grid)


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=lambda: ModelParams(p=2.0, s=0.75, vartheta=2.5))
    dim: int = 1
    cells: int = 32
    box_lengths: Optional[tuple] = None
    lam: float = 0.1
    g0: SourceSpec = SourceSpec("constant", 1.0)
    b: SourceSpec = SourceSpec("constant", 1.0)
    g_lower: Optional[float] = None
    T: float = 1.0
    n0: int = 100
    source: SourceSpec = SourceSpec("constant", 1.0)
    u0: SourceSpec = SourceSpec("stationary", SourceSpec("constant", 1.0))
    minimizer: MinimizeOptions = field(default_factory=MinimizeOptions)
    verify: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    output_dir: str = "mixloc_out"

    def grid(self) -> Grid:
        try:
            return build_grid(self.dim, self.cells, self.box_lengths)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None


def parse_config(raw: dict, base_dir=Path(".")) -> RunConfig:
    _check_keys(raw, TOP_LEVEL, "config")
    base_dir = Path(base_dir)
    kw = {}

    pr = raw.get("params", {})
    _check_keys(pr, SECTIONS["params"], "params")
    pkw = {}
    for k, v in pr.items():
        pkw[k] = None if v is None and k in ("vartheta", "d_bold") else _number(v, f"params.{k}")
    defaults = {"p": 2.0, "s": 0.75, "vartheta": 2.5}
    params = ModelParams(**{**defaults, **pkw})
    kw["params"] = params

    gr = raw.get("grid", {})
    _check_keys(gr, SECTIONS["grid"], "grid")
    if "dim" in gr:
        kw["dim"] = _number(gr["dim"], "grid.dim", integer=True)
    if "cells" in gr:
        kw["cells"] = _number(gr["cells"], "grid.cells", integer=True)
    if gr.get("box_lengths") is not None:
        bl = gr["box_lengths"]
        if not isinstance(bl, list):
            raise ConfigError("grid.box_lengths must be a list")
        kw["box_lengths"] = tuple(_number(v, "grid.box_lengths") for v in bl)

    st = raw.get("stationary", {})
    _check_keys(st, SECTIONS["stationary"], "stationary")
    if "lambda" in st:
        kw["lam"] = _number(st["lambda"], "stationary.lambda")
    for key in ("g0", "b"):
        if key in st:
            kw[key] = SourceSpec.parse(st[key], f"stationary.{key}", base_dir)
    if st.get("g_lower") is not None:
        kw["g_lower"] = _number(st["g_lower"], "stationary.g_lower")

    ev = raw.get("evolution", {})
    _check_keys(ev, SECTIONS["evolution"], "evolution")
    if "T" in ev:
        kw["T"] = _number(ev["T"], "evolution.T")
    if "n0" in ev:
        kw["n0"] = _number(ev["n0"], "evolution.n0", integer=True)
    if "source" in ev:
        kw["source"] = SourceSpec.parse(ev["source"], "evolution.source", base_dir)
    if "u0" in ev:
        kw["u0"] = SourceSpec.parse(ev["u0"], "evolution.u0", base_dir, allow_stationary=True)

    mn = raw.get("minimizer", {})
    _check_keys(mn, SECTIONS["minimizer"], "minimizer")
    try:
        mkw = {k: _number(v, f"minimizer.{k}", integer=k in ("max_iters", "history")) for k, v in mn.items()}
        kw["minimizer"] = MinimizeOptions(**mkw)
    except ValueError as exc:
        raise ConfigError(f"minimizer: {exc}") from None

    vf = raw.get("verify", {})
    _check_keys(vf, SECTIONS["verify"], "verify")
    kw["verify"] = {
        k: _number(v, f"verify.{k}", integer=k in ("n0", "n_nodes")) for k, v in vf.items()
    }

    if "seed" in raw:
        kw["seed"] = _number(raw["seed"], "seed", integer=True)
    if "threads" in raw:
        kw["threads"] = _number(raw["threads"], "threads", integer=True)
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str):
            raise ConfigError("output_dir must be a string")
        kw["output_dir"] = raw["output_dir"]

    cfg = RunConfig(**kw)
    if cfg.T <= 0 or cfg.n0 < 1:
        raise ConfigError("evolution needs T > 0 and n0 >= 1")
    if cfg.lam <= 0:
        raise ConfigError("stationary.lambda must be positive")
    require_valid(cfg.params, cfg.dim)
    return cfg


def load_config(path=None) -> RunConfig:
    """Read and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return parse_config({})
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw, path.parent)


__all__ = ["ConfigError", "CSVFormatError", "ParamsError", "RunConfig", "SourceSpec", "load_config", "parse_config"]
