"""Command-line entry point.

Every command reads an optional JSON config, applies command-line overrides,
validates the result and echoes the fully resolved config into each JSON it
writes (and into ``config.json`` next to CSV outputs).

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ingest
from .errors import NumericalError
from .fit import FitConfig, SolverSettings, WeightSpec
from .graph import Graph, build_knn_graph, default_sigma, graph_spectrum, knn_graph_from_distances
from .imputation import jwss_baseline, nme
from .pipeline import (
    Candidate,
    PipelineConfig,
    SyntheticProcess,
    make_basis,
    run_pipeline,
    station_graph,
    sweep_orders,
    sweep_weights,
    tune_hyperparams,
)
from .simulate import MaskedRealizations
from .spectral import ArmaParams, JointBasis, ModelOrders
from .theory import ERROR_KINDS, rate_study

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    pass


# -- configuration -----------------------------------------------------------------

_GRAPH = {"source": "synthetic", "N": 10, "k": 5, "lambda_max": 1.5, "seed": 0, "path": None, "sigma": None}
_PROCESS = {
    "orders": [1, 1, 1, 0],
    "a": [-0.5, 0.5],
    "b": [0.5, 0.5],
    "T": 16,
    "generator": "spectral",
    "burn_in": None,
    "snr_db": None,
    "missing_ratio": 0.0,
}
_FIT = {
    "orders": None,
    "mu_A": None,
    "mu_B": None,
    "relative_weight": 1e-3,
    "weights": {"kind": "uniform", "sigma_lambda": 1.0, "sigma_omega": 1.0},
    "solver": {"max_iters": 20000, "abs_tol": 1e-10, "rel_tol": 1e-9, "rho": None, "alpha": 1.6},
}
_DATA = {"data": None, "smoothing_window": None, "normalization": "none", "subtract_mean": False}

DEFAULTS = {
    "simulate": {"seed": 0, "graph": _GRAPH, "process": _PROCESS, "L": 8},
    "fit": {"seed": 0, "graph": _GRAPH, "fit": _FIT, **_DATA},
    "impute": {
        "seed": 0,
        "graph": _GRAPH,
        "fit": _FIT,
        **_DATA,
        "truth": None,
        "ridge": None,
        "baseline": False,
        "tune": None,
    },
    "sweep-weights": {
        "seed": 0,
        "graph": _GRAPH,
        "process": _PROCESS,
        "fit": _FIT,
        "L": 8,
        "mu_A_grid": [0.0, 0.01, 1.0, 100.0],
        "mu_B_grid": [0.0, 0.01, 1.0, 100.0],
        "missing_ratios": [0.3],
        "repetitions": 3,
    },
    "sweep-orders": {
        "seed": 0,
        "graph": _GRAPH,
        "process": _PROCESS,
        "fit": _FIT,
        "processes": [
            {"orders": [1, 1, 1, 0], "a": [-0.5, 0.5], "b": [0.5, 0.5]},
        ],
        "L_grid": [8, 16, 32, 64, 128],
        "trials": 5,
        "threshold": 0.1,
    },
    "rates": {
        "seed": 0,
        "graph": _GRAPH,
        "process": _PROCESS,
        "fit": {**_FIT, "relative_weight": 1e-5},
        "L_grid": [32, 64, 128, 256, 512, 1024],
        "trials": 10,
        "errors": ["jpsd", "params", "imputation"],
        "delta": 0.1,
    },
    "ingest-check": {**_DATA, "graph": {**_GRAPH, "source": None}},
}

# schema of the optional tuning block for `impute`
_TUNE = {"orders": [[1, 1, 1, 0]], "mu_A": [None], "mu_B": [None], "split_fraction": 0.5}


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        path = f"{where}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val, path + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            if k in node and node[k] is None and k == "tune":
                node[k] = copy.deepcopy(_TUNE)
            else:
                raise ConfigError(f"unknown config key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def resolve_config(command: str, config_path=None, overrides=()) -> dict:
    """Defaults, then the JSON file, then ``key.path=value`` overrides; validated."""
    cfg = copy.deepcopy(DEFAULTS[command])
    if config_path is not None:
        p = Path(config_path)
        if not p.is_file():
            raise ConfigError(f"config file {config_path} does not exist")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        if "command" in user:
            if user.pop("command") != command:
                raise ConfigError(f"config is for another command, not {command!r}")
        if command == "impute" and isinstance(user.get("tune"), dict):
            user["tune"] = _merge(_TUNE, user["tune"], "tune.")
            cfg["tune"] = user.pop("tune")
        cfg = _merge(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        key, text = item.split("=", 1)
        _set_path(cfg, key.strip(), _parse_value(text))
    validate_config(command, cfg)
    return cfg


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _check_orders(o, what):
    _require(isinstance(o, list) and len(o) == 4 and all(isinstance(v, int) for v in o), f"{what} must be [P, K, Q, M]")
    _require(o[0] >= 1 and min(o) >= 0, f"{what}: need P >= 1 and K, Q, M >= 0")


def _check_grid(g, what, positive_int=False):
    _require(isinstance(g, list) and len(g) > 0, f"{what} must be a non-empty list")
    if positive_int:
        _require(all(isinstance(v, int) and v >= 1 for v in g), f"{what} entries must be positive integers")


def _check_path(p, what):
    _require(p is not None, f"{what} is required")
    _require(Path(p).is_file(), f"{what} {p} does not exist")


def validate_config(command: str, cfg: dict) -> None:
    g = cfg.get("graph")
    if g is not None and g.get("source") is not None:
        _require(g["source"] in ("synthetic", "coordinates", "distances"), "graph.source must be synthetic, coordinates or distances")
        _require(isinstance(g["k"], int) and g["k"] >= 1, "graph.k must be a positive integer")
        if g["source"] == "synthetic":
            _require(isinstance(g["N"], int) and g["N"] > g["k"], "graph.N must be an integer larger than graph.k")
            _require(g["lambda_max"] > 0, "graph.lambda_max must be positive")
        else:
            _check_path(g["path"], "graph.path")
        _require(g["sigma"] is None or g["sigma"] > 0, "graph.sigma must be positive")
    if "process" in cfg:
        pr = cfg["process"]
        _check_orders(pr["orders"], "process.orders")
        _require(isinstance(pr["T"], int) and pr["T"] >= 2, "process.T must be an integer >= 2")
        _require(0.0 <= pr["missing_ratio"] < 1.0, "process.missing_ratio must lie in [0, 1)")
        _require(pr["generator"] in ("spectral", "recursion"), "process.generator must be spectral or recursion")
    if "fit" in cfg:
        f = cfg["fit"]
        if f["orders"] is not None:
            _check_orders(f["orders"], "fit.orders")
        try:
            _fit_config(f)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"fit: {exc}") from None
    if "data" in cfg and command != "simulate":
        _check_path(cfg["data"], "data")
        w = cfg["smoothing_window"]
        _require(w is None or (isinstance(w, int) and w >= 1), "smoothing_window must be a positive integer")
        _require(cfg["normalization"] in ("none", "zscore", "maxabs"), "normalization must be none, zscore or maxabs")
    if command in ("fit", "impute"):
        _require(cfg["graph"]["source"] in ("coordinates", "distances"), "fit/impute need graph.source coordinates or distances")
        _require(cfg["fit"]["orders"] is not None or (command == "impute" and cfg["tune"]), "fit.orders is required")
    if command == "impute":
        if cfg["truth"] is not None:
            _check_path(cfg["truth"], "truth")
        t = cfg["tune"]
        if t is not None:
            for key in ("orders", "mu_A", "mu_B"):
                _check_grid(t[key], f"tune.{key}")
            for o in t["orders"]:
                _check_orders(o, "tune.orders entry")
            _require(0.0 < t["split_fraction"] < 1.0, "tune.split_fraction must lie in (0, 1)")
    if command in ("simulate", "sweep-weights"):
        _require(isinstance(cfg["L"], int) and cfg["L"] >= 1, "L must be a positive integer")
    if command == "sweep-weights":
        _check_grid(cfg["mu_A_grid"], "mu_A_grid")
        _check_grid(cfg["mu_B_grid"], "mu_B_grid")
        _check_grid(cfg["missing_ratios"], "missing_ratios")
        _require(all(0.0 <= r < 1.0 for r in cfg["missing_ratios"]), "missing ratios must lie in [0, 1)")
        _require(all(v is None or v >= 0 for v in cfg["mu_A_grid"] + cfg["mu_B_grid"]), "trace weights must be nonnegative")
        _require(isinstance(cfg["repetitions"], int) and cfg["repetitions"] >= 1, "repetitions must be >= 1")
    if command in ("sweep-orders", "rates"):
        _check_grid(cfg["L_grid"], "L_grid", positive_int=True)
        _require(cfg["L_grid"] == sorted(set(cfg["L_grid"])), "L_grid must be strictly increasing")
        _require(isinstance(cfg["trials"], int) and cfg["trials"] >= 1, "trials must be >= 1")
    if command == "sweep-orders":
        _check_grid(cfg["processes"], "processes")
        for p in cfg["processes"]:
            _check_orders(p.get("orders"), "processes[].orders")
    if command == "rates":
        _check_grid(cfg["errors"], "errors")
        bad = [e for e in cfg["errors"] if e not in ERROR_KINDS]
        _require(not bad, f"unknown error kind(s) {bad}; choose from {list(ERROR_KINDS)}")
        _require(0.0 < cfg["delta"] < 1.0, "delta must lie in (0, 1)")
    if command == "ingest-check":
        gs = cfg["graph"]["source"]
        _require(gs in (None, "coordinates", "distances"), "ingest-check graph.source must be coordinates, distances or null")


# -- builders ------------------------------------------------------------------------


def _fit_config(f: dict) -> FitConfig:
    return FitConfig(
        mu_A=f["mu_A"],
        mu_B=f["mu_B"],
        relative_weight=f["relative_weight"],
        weights=WeightSpec(**f["weights"]),
        solver=SolverSettings(**f["solver"]),
    )


def _orders(o) -> ModelOrders:
    return ModelOrders(*o)


def _zeta(p: dict) -> ArmaParams:
    try:
        return ArmaParams(_orders(p["orders"]), p["a"], p["b"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"process coefficients: {exc}") from None


def build_graph(g: dict) -> tuple[Graph, dict]:
    """Graph from the config plus a record of how it was built."""
    if g["source"] == "synthetic":
        graph, pts, sigma = station_graph(g["N"], g["k"], seed=g["seed"], lambda_max=g["lambda_max"])
        return graph, {"sigma": sigma, "coordinates": pts}
    if g["source"] == "coordinates":
        pts = ingest.read_coordinates(g["path"])
        _require(g["k"] < pts.shape[0], f"graph.k={g['k']} must be smaller than the {pts.shape[0]} nodes")
        from scipy.spatial.distance import cdist

        D = cdist(pts, pts)
    else:
        D = ingest.read_distance_matrix(g["path"])
        _require(g["k"] < D.shape[0], f"graph.k={g['k']} must be smaller than the {D.shape[0]} nodes")
        pts = None
    sigma = g["sigma"] if g["sigma"] is not None else default_sigma(D, g["k"])
    graph = build_knn_graph(pts, g["k"], sigma) if pts is not None else knn_graph_from_distances(D, g["k"], sigma)
    return graph, {"sigma": sigma, "coordinates": pts}


def _process(cfg: dict, basis: JointBasis) -> SyntheticProcess:
    pr = cfg["process"]
    snr = math.inf if pr["snr_db"] is None else float(pr["snr_db"])
    orders = _orders(cfg["fit"]["orders"]) if cfg.get("fit", {}).get("orders") else None
    return SyntheticProcess(
        _zeta(pr),
        basis,
        generator=pr["generator"],
        burn_in=pr["burn_in"],
        snr_db=snr,
        missing_ratio=pr["missing_ratio"],
        fit=_fit_config(cfg["fit"]) if "fit" in cfg else FitConfig(),
        orders=orders,
    )


def _load_data(cfg: dict):
    obs = ingest.read_realizations(cfg["data"])
    if cfg["smoothing_window"]:
        obs = ingest.moving_average(obs, cfg["smoothing_window"])
    norm = ingest.fit_normalization(obs, cfg["normalization"])
    return norm.apply(obs), norm


def _graph_info(graph: Graph, info: dict) -> dict:
    ev = graph_spectrum(graph).eigenvalues
    return {"n_nodes": graph.n_nodes, "sigma": info["sigma"], "lambda_max": float(ev[-1]), "n_edges": int((graph.weights > 0).sum() // 2)}


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(out: Path, name: str, payload: dict, cfg: dict, command: str) -> None:
    ingest.write_json(out / name, {"command": command, "config": cfg, **payload})


# -- commands --------------------------------------------------------------------------


def cmd_simulate(cfg: dict, out: Path) -> dict:
    graph, info = build_graph(cfg["graph"])
    basis = make_basis(graph, cfg["process"]["T"])
    proc = _process(cfg, basis)
    ss = np.random.SeedSequence(cfg["seed"])
    s_real, s_obs = ss.spawn(2)
    X = proc.realizations(cfg["L"], s_real)
    obs = proc.observe(X, s_obs)
    ingest.write_realizations(out / "realizations.csv", obs.data, obs.masks)
    ingest.write_realizations(out / "truth.csv", X)
    if info["coordinates"] is not None:
        ingest.write_coordinates(out / "coordinates.csv", info["coordinates"])
    summary = {"L": obs.L, "N": obs.N, "T": obs.T, "missing": obs.missing_count, "graph": _graph_info(graph, info)}
    _emit(out, "simulate.json", summary, cfg, "simulate")
    return summary


def _fit_and_impute(cfg: dict, obs: MaskedRealizations, basis: JointBasis, truth=None):
    pcfg = PipelineConfig(fit=_fit_config(cfg["fit"]), subtract_mean=cfg["subtract_mean"], ridge=cfg.get("ridge"))
    tuning = None
    if cfg.get("tune"):
        t = cfg["tune"]
        grid = [
            Candidate(_orders(o), mA, mB, pcfg.fit.weights)
            for o in t["orders"]
            for mA in t["mu_A"]
            for mB in t["mu_B"]
        ]
        tr = tune_hyperparams(obs, basis, grid, t["split_fraction"], seed=cfg["seed"], base=pcfg)
        res = tr.final
        tuning = {"chosen": tr.chosen.to_dict(), "candidates": [c.to_dict() for c in grid], "validation_nme": tr.scores}
    else:
        res = run_pipeline(obs, basis, _orders(cfg["fit"]["orders"]), pcfg, truth=truth)
    return res, tuning


def cmd_fit(cfg: dict, out: Path) -> dict:
    graph, info = build_graph(cfg["graph"])
    obs, norm = _load_data(cfg)
    _require(obs.N == graph.n_nodes, f"data has {obs.N} nodes but the graph has {graph.n_nodes}")
    basis = make_basis(graph, obs.T)
    res, _ = _fit_and_impute(cfg, obs, basis)
    payload = {
        "fit": res.fit.to_dict(),
        "estimation": res.h_initial.diagnostics,
        "graph": _graph_info(graph, info),
        "normalization": norm.to_dict(),
    }
    _emit(out, "fit.json", payload, cfg, "fit")
    ingest.write_table(
        out / "jpsd.csv",
        [
            {"node_freq": n, "time_freq": t, "initial": float(res.h_initial.as_matrix()[n, t]), "model": float(res.h_model.as_matrix()[n, t])}
            for t in range(obs.T)
            for n in range(obs.N)
        ],
        ["node_freq", "time_freq", "initial", "model"],
    )
    return payload


def cmd_impute(cfg: dict, out: Path) -> dict:
    graph, info = build_graph(cfg["graph"])
    obs, norm = _load_data(cfg)
    _require(obs.N == graph.n_nodes, f"data has {obs.N} nodes but the graph has {graph.n_nodes}")
    truth = None
    if cfg["truth"] is not None:
        tobs = ingest.read_realizations(cfg["truth"])
        _require(tobs.data.shape == obs.data.shape, "truth and data shapes differ")
        _require(bool(tobs.masks.all()), "truth file must be fully observed")
        truth = (tobs.data - norm.offset) / norm.scale
    basis = make_basis(graph, obs.T)
    res, tuning = _fit_and_impute(cfg, obs, basis, truth=truth)
    filled = norm.invert(res.imputation.filled)
    ingest.write_realizations(out / "filled.csv", filled, obs.masks, imputed=~obs.masks)
    payload = {
        "fit": res.fit.to_dict(),
        "estimation": res.h_initial.diagnostics,
        "graph": _graph_info(graph, info),
        "normalization": norm.to_dict(),
        "ridges": res.imputation.ridges,
        "tuning": tuning,
    }
    if truth is not None and obs.missing_count:
        payload["nme"] = nme(truth, res.imputation.filled, obs.masks)
    if cfg["baseline"]:
        bl = jwss_baseline(obs, basis, subtract_mean=cfg["subtract_mean"], ridge=cfg["ridge"])
        ingest.write_realizations(out / "filled_baseline.csv", norm.invert(bl.filled), obs.masks, imputed=~obs.masks)
        if truth is not None and obs.missing_count:
            payload["nme_baseline"] = nme(truth, bl.filled, obs.masks)
    _emit(out, "impute.json", payload, cfg, "impute")
    return payload


def cmd_sweep_weights(cfg: dict, out: Path) -> dict:
    graph, _ = build_graph(cfg["graph"])
    proc = _process(cfg, make_basis(graph, cfg["process"]["T"]))
    sw = sweep_weights(
        proc, cfg["L"], cfg["mu_A_grid"], cfg["mu_B_grid"], cfg["missing_ratios"], cfg["repetitions"], seed=cfg["seed"]
    )
    ingest.write_weight_sweep(out / "weights.csv", sw)
    mA, mB, best = sw.best()
    payload = {
        "table": sw.to_rows(),
        "best": {"mu_A": mA, "mu_B": mB, "nme": best},
        "failures": [{"mu_A": sw.mu_A[i], "mu_B": sw.mu_B[j], "reason": r} for (i, j), r in sorted(sw.failures.items())],
    }
    _emit(out, "sweep_weights.json", payload, cfg, "sweep-weights")
    return payload


def cmd_sweep_orders(cfg: dict, out: Path) -> dict:
    graph, _ = build_graph(cfg["graph"])
    basis = make_basis(graph, cfg["process"]["T"])
    base = _process(cfg, basis)
    procs = [replace(base, zeta=_zeta(p), orders=_orders(p["orders"])) for p in cfg["processes"]]
    rows = sweep_orders(procs, cfg["L_grid"], trials=cfg["trials"], threshold=cfg["threshold"], seed=cfg["seed"])
    ingest.write_order_sweep(out / "orders.csv", rows)
    payload = {"rows": [{"orders": list(r.orders.as_tuple()), "d": r.d, "L_required": r.L_required, "mean_jpsd_rel": r.mean_jpsd_rel} for r in rows]}
    _emit(out, "sweep_orders.json", payload, cfg, "sweep-orders")
    ingest.write_json(out / "config.json", cfg)
    return payload


def cmd_rates(cfg: dict, out: Path) -> dict:
    graph, _ = build_graph(cfg["graph"])
    proc = _process(cfg, make_basis(graph, cfg["process"]["T"]))
    studies = rate_study(cfg["errors"], proc, cfg["L_grid"], trials=cfg["trials"], delta=cfg["delta"], seed=cfg["seed"])
    for name, st in studies.items():
        ingest.write_rate_study(out / f"rates_{name}.csv", out / f"rates_{name}.json", st, {"command": "rates", "config": cfg})
    payload = {"slopes": {k: v.slope for k, v in studies.items()}}
    _emit(out, "rates.json", payload, cfg, "rates")
    return payload


def cmd_ingest_check(cfg: dict, out: Path | None) -> dict:
    obs, norm = _load_data(cfg)
    report = {
        "L": obs.L,
        "N": obs.N,
        "T": obs.T,
        "observed": int(obs.masks.sum()),
        "missing": obs.missing_count,
        "missing_fraction": obs.missing_count / obs.masks.size,
        "normalization": norm.to_dict(),
    }
    if cfg["graph"]["source"] is not None:
        graph, info = build_graph(cfg["graph"])
        _require(obs.N == graph.n_nodes, f"data has {obs.N} nodes but the graph has {graph.n_nodes}")
        report["graph"] = _graph_info(graph, info)
    if out is not None:
        _emit(out, "ingest_check.json", report, cfg, "ingest-check")
    return report


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "impute": cmd_impute,
    "sweep-weights": cmd_sweep_weights,
    "sweep-orders": cmd_sweep_orders,
    "rates": cmd_rates,
    "ingest-check": cmd_ingest_check,
}

# convenience flags -> config keys
_FLAGS = {
    "seed": "seed",
    "data": "data",
    "truth": "truth",
    "L": "L",
    "T": "process.T",
    "trials": "trials",
    "missing_ratio": "process.missing_ratio",
    "graph_path": "graph.path",
    "graph_source": "graph.source",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvarma", description="Joint time-vertex ARMA modelling and imputation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory" + (" (optional)" if name == "ingest-check" else ""))
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. fit.mu_A=0.1 (value parsed as JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--data")
        p.add_argument("--truth")
        p.add_argument("--L", type=int)
        p.add_argument("--T", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--missing-ratio", dest="missing_ratio", type=float)
        p.add_argument("--graph-path", dest="graph_path")
        p.add_argument("--graph-source", dest="graph_source")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    overrides = list(args.overrides)
    for flag, key in _FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            overrides.append(f"{key}={json.dumps(val)}")
    try:
        cfg = resolve_config(args.command, args.config, overrides)
        if args.out is None and args.command != "ingest-check":
            raise ConfigError("--out is required")
        out = _out_dir(args.out) if args.out is not None else None
        result = COMMANDS[args.command](cfg, out)
    except (ConfigError, ingest.IngestError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command == "ingest-check":
        print(ingest.dumps(result), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
