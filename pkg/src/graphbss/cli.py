"""Command-line entry point: ``graphbss <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import experiments as ex
from .crb import NonIdentifiable
from .graphs import GraphError, load_edge_list, save_edge_list
from .separators import GraphSet, ml_two_sources
from .sources import ModelError, load_signals_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

EXPERIMENTS = ("fig1", "fig2", "fig3", "crb-sweep")


def _read_yaml(path) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ex.ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ex.ConfigError("config file must hold a mapping")
    return data


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ex.ConfigError(f"parameter {item!r} is not key=value")
        out[key] = yaml.safe_load(val)
    return out


def gen_graph(kind: str, params: dict, seed: int, out) -> Path:
    """Draw one graph and save it as an edge list at `out`."""
    if "n" not in params:
        raise ex.ConfigError("graph parameters need n")
    n = int(params["n"])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    w = ex.make_graph({"kind": kind, **params}, n, rng)
    out = Path(out)
    if out.suffix == "":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{kind}_n{n}_seed{seed}.txt"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    save_edge_list(w, out)
    return out


def separate(data_file, estimator: dict, graph_files, out) -> Path:
    """Estimate the unmixing matrix of a (P, N) signal CSV; write it as CSV."""
    x = load_signals_csv(data_file)
    graphs = [load_edge_list(g, x.shape[1]) for g in graph_files or []]
    name = estimator.get("name")
    if name in ("ml", "ml_oracle"):
        if len(graphs) not in (1, 2):
            raise ex.ConfigError("ml needs one or two graphs")
        w1 = graphs[0]
        w2 = graphs[1] if len(graphs) == 2 else w1
        res = ml_two_sources(x, w1, w2,
                             loglik_det_factor=float(estimator.get("det_factor", 0.5)))
    else:
        if name not in ex.KNOWN_ESTIMATORS["fig3"]:
            raise ex.ConfigError(f"unknown estimator {name!r}")
        if name not in ("jade", "fastica_sq") and not graphs:
            raise ex.ConfigError(f"{name} needs at least one graph")
        k = int(estimator.get("k", 1))
        gs = GraphSet([(w, k) for w in graphs]) if graphs else None
        res = ex.make_estimator(estimator)(x, gs)
    out = Path(out)
    if out.suffix == "":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "gamma_hat.csv"
    np.savetxt(out, res.gamma_hat, delimiter=",", fmt="%.17g")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphbss",
                                 description="Blind source separation of graph signals.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("gen-graph", "separate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--out", help="output directory (or file)")
        if name in EXPERIMENTS:
            sp.add_argument("--jobs", type=int, help="worker processes")
        if name == "gen-graph":
            sp.add_argument("--kind", choices=["er", "sbm", "geometric"])
            sp.add_argument("--param", action="append", metavar="KEY=VALUE")
        if name == "separate":
            sp.add_argument("--data", help="signal CSV, one row per signal")
            sp.add_argument("--estimator")
            sp.add_argument("--graph", action="append", help="edge-list file")
            sp.add_argument("--param", action="append", metavar="KEY=VALUE")
    return ap


def _dispatch(args) -> str:
    if args.command in EXPERIMENTS:
        data = _read_yaml(args.config)
        data.pop("experiment", None)
        cfg = ex.make_config(args.command, data, seed=args.seed, reps=args.reps,
                             out=args.out, jobs=args.jobs)
        if cfg.out is None:
            raise ex.ConfigError("no output directory (--out or 'out' in config)")
        return str(ex.run_experiment(cfg))
    data = _read_yaml(args.config)
    seed = args.seed if args.seed is not None else data.get("seed")
    out = args.out or data.get("out")
    if out is None:
        raise ex.ConfigError("no output location (--out or 'out' in config)")
    if args.command == "gen-graph":
        if seed is None:
            raise ex.ConfigError("gen-graph needs a seed")
        params = {**data.get("params", {}), **_parse_params(args.param)}
        kind = args.kind or data.get("kind")
        return str(gen_graph(kind, params, int(seed), out))
    estimator = dict(data.get("estimator", {}))
    if args.estimator:
        estimator["name"] = args.estimator
    estimator.update(_parse_params(args.param))
    base = Path(args.config).parent if args.config else Path(".")

    def from_config(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    data_file = args.data or (data.get("data") and from_config(data["data"]))
    if not data_file:
        raise ex.ConfigError("separate needs a data file")
    graph_files = args.graph or [from_config(g) for g in data.get("graphs", [])]
    return str(separate(data_file, estimator, graph_files, out))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        print(_dispatch(args))
    except (ex.ConfigError, GraphError, ModelError, OSError, KeyError,
            TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, NonIdentifiable, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
