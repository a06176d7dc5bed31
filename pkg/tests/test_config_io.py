import json

import numpy as np
import pytest

from mixloc.config import ConfigError, SourceSpec, load_config, parse_config
from mixloc.grid import build_grid
from mixloc.io import CSVFormatError, csv_text, json_text, read_node_csv, write_csv, write_json
from mixloc.params import ParamsError


def test_defaults():
    cfg = load_config(None)
    assert cfg.params.p == 2.0 and cfg.cells == 32 and cfg.seed == 0


def test_full_config(tmp_path):
    raw = {
        "params": {"p": 2.5, "s": 0.75, "m": 0.4, "delta": 0.2, "gamma": 0.1, "vartheta": 2.2},
        "grid": {"dim": 1, "cells": 16},
        "stationary": {"lambda": 0.2, "g0": {"expr": "1 + x"}, "b": 2, "g_lower": 1},
        "evolution": {"T": 2, "n0": 10, "source": {"constant": 1.5}, "u0": {"stationary": {"expr": "1"}}},
        "minimizer": {"grad_tol": 1e-10, "history": 5},
        "verify": {"lam": 0.1, "n0": 50},
        "seed": 3,
        "threads": 2,
        "output_dir": "x",
    }
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    cfg = load_config(p)
    g = cfg.grid()
    np.testing.assert_allclose(cfg.g0.nodal(g), 1 + g.nodes[:, 0])
    assert cfg.u0.kind == "stationary" and cfg.minimizer.history == 5
    assert cfg.verify == {"lam": 0.1, "n0": 50}


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": 1},
        {"params": {"q": 1}},
        {"grid": {"cells": 1}},
        {"grid": {"cells": 2.5}},
        {"stationary": {"g0": {"weird": 1}}},
        {"stationary": {"g0": {"expr": "1 +"}}},
        {"stationary": {"lambda": 0}},
        {"evolution": {"n0": 0}},
        {"minimizer": {"ls_shrink": 2}},
        {"params": {"p": "two"}},
        {"seed": True},
    ],
)
def test_rejected_configs(raw):
    with pytest.raises((ConfigError, ParamsError)):
        cfg = parse_config(raw)
        cfg.grid()


def test_hard_parameter_violation():
    with pytest.raises(ParamsError, match="m<p-1"):
        parse_config({"params": {"p": 2, "m": 1}})


def test_unreadable_and_invalid_json(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_table_and_csv_sources(tmp_path):
    g = build_grid(1, 3)
    (tmp_path / "u.csv").write_text("node_index,u\n2,3\n0,1\n1,2\n")
    spec = SourceSpec.parse({"csv": "u.csv"}, "u0", tmp_path)
    np.testing.assert_array_equal(spec.nodal(g), [1, 2, 3])
    tab = SourceSpec.parse({"table": [[1, 2, 3], [4, 5, 6]]}, "g", tmp_path)
    assert tab.time_dependent
    np.testing.assert_array_equal(tab.evolution_source(g, 2), [[1, 2, 3], [4, 5, 6]])
    with pytest.raises(ConfigError):
        tab.evolution_source(g, 3)


@pytest.mark.parametrize(
    "text",
    ["x,u\n0,1\n", "node_index,u\n0,1\n", "node_index,u\n0,1\n0,2\n1,1\n", "node_index,u\n0,1\n1,x\n", "node_index,u\n0,1\n5,1\n", "node_index,u\n0,1\n1,nan\n"],
)
def test_malformed_node_csv(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(CSVFormatError):
        read_node_csv(p, 2)


def test_csv_and_json_formatting(tmp_path):
    assert csv_text(["a", "b"], [[1, 0.1]]) == "a,b\n1,0.10000000000000001\n"
    txt = json_text({"b": np.float64(1.5), "a": [np.int64(2), float("inf"), float("nan")]})
    assert txt == '{\n  "a": [\n    2,\n    "inf",\n    "nan"\n  ],\n  "b": 1.5\n}\n'
    write_csv(tmp_path / "d" / "x.csv", ["a"], [[1]])
    write_json(tmp_path / "d" / "x.json", {"k": 1})
    assert sorted(p.name for p in (tmp_path / "d").iterdir()) == ["x.csv", "x.json"]
