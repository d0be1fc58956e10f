"""Command-line pipeline: human corpus, mining, falsification, training, bounds.

Every command that writes to ``--out-dir`` also writes ``manifest.json``
recording the command, the seed, a hash of the effective configuration and
digests of its inputs and outputs.  Nothing time-dependent is recorded, so a
seeded run repeated in a fresh directory yields byte-identical manifests.
"""

import argparse
import copy
import hashlib
import json
import logging
import os
import sys

from driverbound import __version__
from driverbound.bounds import (
    BoundQuery, evaluate_conservativeness, plot_rows_csv, query_bound,
)
from driverbound.classifier import (
    ARCHS, Network, TrainConfig, TrainingError, balance, evaluate, history_window,
    split_windows, train, violation_window_end, window_extract,
)
from driverbound.corpus import (
    MANIFEST, dump_json, load_corpus, read_manifest, save_corpus,
)
from driverbound.falsify import (
    FalsificationProblem, falsify, generate_counterexamples, human_x0_grid,
)
from driverbound.human import (
    CorpusGenerationError, ProfileDistribution, corpus_metadata, generate_corpus,
)
from driverbound.mining import (
    MiningError, ParetoFrontier, builtin_templates, find_frontier, search_1d,
)
from driverbound.optim import BudgetError
from driverbound.sim import SimConfig, initial_state
from driverbound.stl import EmptyWindowError, STLSyntaxError, parse, robustness
from driverbound.trace import TraceError, load_trace

log = logging.getLogger("driverbound")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CONFIG = 4
EXIT_BAD_DATA = 5
EXIT_MINING = 6
EXIT_FALSIFY = 7
EXIT_TRAINING = 8

EXIT_CODES_HELP = """exit codes:
  0  success
  1  unexpected internal error
  2  command-line usage error
  3  missing input file or directory
  4  configuration error (unknown key, bad value)
  5  invalid input data (trace CSV, formula syntax, model file)
  6  mining failure (no feasible or non-monotone parameter)
  7  falsification failure (budget or initial-state grid)
  8  training failure (class imbalance, divergence)

On failure a JSON object {"error", "message", "exit_code"} is written to stderr."""

DEFAULTS = {
    "sim": SimConfig().to_dict(),
    "human": {"n": 200, "horizon": 40.0},
    "mining": {"eps": 0.01, "templates": ["green", "red"], "cells": 10},
    "falsify": {"solver": "cmaes", "budget": 300, "min_distance": 1.0, "accept_band": None,
                "points_per_formula": 5, "x0": "human", "x0_per_point": 10,
                "segments": 6, "segment_duration": 0.5, "horizon": 3.0},
    "train": {"archs": ["MLP-28", "RNN-36"], "epochs": 40, "lr": 1e-3, "batch_size": 64,
              "test_fraction": 0.2, "lights": ["G", "R"]},
    "bound": {"step": 0.1, "refine": False},
}


class ConfigError(ValueError):
    pass


def _merge(base, override, where="config"):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in out:
            raise ConfigError(f"unknown key {where}.{k}")
        if isinstance(out[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}.{k} must be an object")
            out[k] = _merge(out[k], v, f"{where}.{k}")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the JSON file, then flag overrides (flags win)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"config file {path} not found")
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            cfg[section][key] = value
    try:
        SimConfig.from_dict(cfg["sim"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim: {exc}") from None
    if cfg["falsify"]["solver"] not in ("cmaes", "neldermead"):
        raise ConfigError("falsify.solver must be cmaes or neldermead")
    if cfg["falsify"]["x0"] not in ("human", "grid"):
        raise ConfigError("falsify.x0 must be human or grid")
    for arch in cfg["train"]["archs"]:
        if arch not in ARCHS:
            raise ConfigError(f"unknown architecture {arch!r}")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def digest(path):
    """SHA-256 of a file, or of every file under a directory in sorted order."""
    h = hashlib.sha256()
    if os.path.isfile(path):
        with open(path, "rb") as fh:
            h.update(fh.read())
        return h.hexdigest()
    if not os.path.isdir(path):
        raise FileNotFoundError(f"{path} not found")
    for root, dirs, files in os.walk(path):
        dirs.sort()
        for name in sorted(files):
            full = os.path.join(root, name)
            h.update(os.path.relpath(full, path).encode())
            with open(full, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def _require(path, kind="path"):
    if path is None or not os.path.exists(path):
        raise FileNotFoundError(f"{kind} {path} not found")
    return path


def _write_manifest(out_dir, command, cfg, seed, inputs, extra=None):
    """Manifest with inputs and every output file digested (paths stay relative)."""
    outputs = {}
    for root, dirs, files in os.walk(out_dir):
        dirs.sort()
        for name in sorted(files):
            full = os.path.join(root, name)
            rel = os.path.relpath(full, out_dir)
            if rel != MANIFEST:
                outputs[rel] = digest(full)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "inputs": {k: digest(v) for k, v in sorted(inputs.items())},
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    dump_json(manifest, os.path.join(out_dir, MANIFEST))
    return manifest


def _stamp(obj, cfg, seed):
    return {**obj, "config_hash": config_hash(cfg), "seed": seed}


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_human(args, cfg):
    sim = SimConfig.from_dict(cfg["sim"])
    h = cfg["human"]
    dist = ProfileDistribution()
    traces = generate_corpus(int(h["n"]), dist, float(h["horizon"]), args.seed, sim)
    meta = _stamp(corpus_metadata(int(h["n"]), dist, float(h["horizon"]), args.seed, sim), cfg, args.seed)
    save_corpus(traces, args.out_dir, meta)
    _write_manifest(args.out_dir, "gen-human", cfg, args.seed, {})
    _print_json({"traces": len(traces), "out_dir": args.out_dir})


def _bindings(pairs):
    out = {}
    for item in pairs or []:
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"bad binding {item!r}; expected name=value") from None
    return out


def cmd_monitor(args, cfg):
    phi = parse(args.formula)
    tr = load_trace(_require(args.trace, "trace"), limits=SimConfig.from_dict(cfg["sim"]).limits())
    rho = robustness(phi, tr, args.time, _bindings(args.bind))
    if args.json:
        _print_json(_stamp({"robustness": rho, "formula": args.formula}, cfg, args.seed))
    else:
        print(f"{rho:.9g}")


def _mine_one(template, traces, cfg, seed):
    eps = float(cfg["mining"]["eps"])
    if len(template.parameters) == 1:
        p = template.parameters[0]
        res = search_1d(template, p, {}, traces, eps)
        return ParetoFrontier(template.id, p, eps, [{p: res.value}],
                              {"cells": 1, "infeasible_cells": 0, "bisection_sweeps": res.sweeps,
                               "at_bound": res.at_bound})
    grid = template.default_grid(int(cfg["mining"]["cells"]))
    return find_frontier(template, traces, grid, eps, seed=seed)


def cmd_mine(args, cfg):
    corpus = _require(args.corpus, "corpus")
    traces = load_corpus(corpus)
    templates = builtin_templates()
    ids = args.template or cfg["mining"]["templates"]
    for tid in ids:
        if tid not in templates:
            raise ConfigError(f"unknown template {tid!r}; choose from {sorted(templates)}")
    results = {}
    for tid in ids:
        fr = _mine_one(templates[tid], traces, cfg, args.seed)
        results[tid] = _stamp(fr.to_dict(), cfg, args.seed)
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            dump_json(results[tid], os.path.join(args.out_dir, f"frontier_{tid}.json"))
            with open(os.path.join(args.out_dir, f"frontier_{tid}.csv"), "w") as fh:
                fh.write(fr.to_csv())
    if args.out_dir:
        _write_manifest(args.out_dir, "mine", cfg, args.seed, {"corpus": corpus})
    _print_json(results[ids[0]] if len(ids) == 1 else results)


def _problem_kw(cfg):
    f = cfg["falsify"]
    return {"segments": int(f["segments"]), "segment_duration": float(f["segment_duration"]),
            "horizon": float(f["horizon"])}


def _save_counterexamples(cexs, out_dir, cfg, seed, manifest, inputs, joined):
    traces = [c.joined() if joined else c.trace for c in cexs]
    save_corpus(traces, out_dir, _stamp({"kind": "counterexamples", "joined_history": joined}, cfg, seed),
                manifest=None)
    return _write_manifest(out_dir, "gen-negatives" if joined else "falsify", cfg, seed, inputs,
                           extra={"falsification": manifest})


def cmd_falsify(args, cfg):
    sim = SimConfig.from_dict(cfg["sim"])
    f = cfg["falsify"]
    if args.formula:
        phi = parse(args.formula).bind(_bindings(args.bind))
        fid, params = "custom", _bindings(args.bind)
    else:
        tmpl = builtin_templates().get(args.template)
        if tmpl is None:
            raise ConfigError("give --formula or a known --template")
        params = _bindings(args.bind)
        phi, fid = tmpl.instantiate(params), tmpl.id
    try:
        d, v, light, t_el = args.x0.split(",")
        x0 = initial_state(float(d), float(v), light.strip(), float(t_el), sim)
    except ValueError as exc:
        raise ConfigError(f"--x0 must be d,v,light,t_el ({exc})") from None
    problem = FalsificationProblem(
        phi, x0, u_range=sim.u_falsify, solver=f["solver"], budget=int(f["budget"]),
        min_distance=float(f["min_distance"]), accept_band=f["accept_band"], seed=args.seed,
        config=sim, formula_id=fid, params=params, **_problem_kw(cfg))
    found = falsify(problem)
    manifest = {"counts": {fid: len(found)}, "traces": [c.manifest_entry() for c in found]}
    if args.out_dir:
        _save_counterexamples(found, args.out_dir, cfg, args.seed, manifest, {}, joined=False)
    _print_json(_stamp({"counterexamples": len(found),
                        "min_robustness": min((c.robustness for c in found), default=None)},
                       cfg, args.seed))


def _load_frontiers(paths, templates):
    out = {}
    for path in paths:
        with open(_require(path, "frontier")) as fh:
            d = json.load(fh)
        if d.get("template") not in templates:
            raise ConfigError(f"{path}: unknown template {d.get('template')!r}")
        out[d["template"]] = d["points"]
    return out


def cmd_gen_negatives(args, cfg):
    corpus = _require(args.corpus, "corpus")
    human = load_corpus(corpus)
    sim = SimConfig.from_dict(cfg["sim"])
    f = cfg["falsify"]
    templates = builtin_templates()
    inputs = {"corpus": corpus}
    if args.frontier:
        frontiers = _load_frontiers(args.frontier, templates)
        inputs.update({f"frontier_{i}": p for i, p in enumerate(args.frontier)})
    else:
        frontiers = {tid: _mine_one(templates[tid], human, cfg, args.seed).points
                     for tid in cfg["mining"]["templates"]}
    if f["x0"] == "human":
        n = int(f["x0_per_point"])
        grid = lambda tid, p: human_x0_grid(human, tid, p, n=n, seed=args.seed)  # noqa: E731
    else:
        grid = None
    res = generate_counterexamples(
        templates, frontiers, grid, solver=f["solver"], budget=int(f["budget"]),
        min_distance=float(f["min_distance"]), accept_band=f["accept_band"],
        points_per_formula=int(f["points_per_formula"]), seed=args.seed, config=sim,
        **_problem_kw(cfg))
    _save_counterexamples(res.counterexamples, args.out_dir, cfg, args.seed, res.manifest,
                          inputs, joined=True)
    _print_json(_stamp({"counts": res.counts, "failures": len(res.failures)}, cfg, args.seed))


def _negative_windows(path, light):
    traces = load_corpus(path)
    entries = read_manifest(path)["falsification"]["traces"]
    if len(entries) != len(traces):
        raise TraceError(f"{path}: manifest lists {len(entries)} traces, corpus has {len(traces)}")
    out = []
    for i, (tr, e) in enumerate(zip(traces, entries)):
        first = violation_window_end(int(e["history_samples"]), int(e["violation_index"]))
        try:
            out.extend(window_extract(tr, light, source=i, first_end=first))
        except ValueError:
            continue
    return out


def cmd_train(args, cfg):
    human_path = _require(args.human, "human corpus")
    neg_path = _require(args.negatives, "negative corpus")
    human = load_corpus(human_path)
    t = cfg["train"]
    os.makedirs(args.out_dir, exist_ok=True)
    summary = {}
    for light in t["lights"]:
        pos = []
        for i, tr in enumerate(human):
            try:
                pos.extend(window_extract(tr, light, source=i))
            except ValueError:
                continue
        neg = _negative_windows(neg_path, light)
        if not pos or not neg:
            raise TrainingError(f"light {light}: {len(pos)} human and {len(neg)} non-human windows")
        train_set, test_set = split_windows(balance(pos + neg, seed=args.seed),
                                            float(t["test_fraction"]), seed=args.seed)
        for arch in t["archs"]:
            tc = TrainConfig(lr=float(t["lr"]), epochs=int(t["epochs"]),
                             batch_size=t["batch_size"], seed=args.seed)
            net = train(train_set, arch, tc, light)
            metrics = _stamp(evaluate(net, test_set), cfg, args.seed)
            metrics.update({"light": light, "arch": arch, "human_windows": len(pos),
                            "non_human_windows": len(neg)})
            net.save(os.path.join(args.out_dir, f"model_{light}_{arch}.json"))
            dump_json(metrics, os.path.join(args.out_dir, f"metrics_{light}_{arch}.json"))
            summary[f"{light}/{arch}"] = metrics["accuracy"]
    _write_manifest(args.out_dir, "train", cfg, args.seed,
                    {"human": human_path, "negatives": neg_path})
    _print_json(_stamp({"accuracy": summary}, cfg, args.seed))


def _load_model(path):
    try:
        return Network.load(_require(path, "model"))
    except (KeyError, json.JSONDecodeError) as exc:
        raise TraceError(f"{path}: malformed model file ({exc})") from None


def cmd_query_bound(args, cfg):
    net = _load_model(args.model)
    tr = load_trace(_require(args.trace, "trace"))
    light = net.light_state
    step = float(cfg["bound"]["step"])
    refine = bool(cfg["bound"]["refine"])
    if args.end is not None:
        windows = [history_window(tr, args.end, light)]
    else:
        windows = window_extract(tr, light, require_label=False)
    out = []
    for w in windows:
        res = query_bound(BoundQuery(w, net, step=step), refine=refine)
        out.append({"end_index": w.end_index, **res.to_dict()})
    _print_json(_stamp({"queries": out}, cfg, args.seed))


def _models_arg(items):
    models = {}
    for item in items:
        light, _, path = item.partition("=")
        if light not in ("G", "R") or not path:
            raise ConfigError(f"--model expects LIGHT=path with LIGHT in G/R, got {item!r}")
        models[light] = path
    return models


def cmd_eval(args, cfg):
    paths = _models_arg(args.model or [])
    if args.models_dir:
        for light in cfg["train"]["lights"]:
            paths.setdefault(light, os.path.join(args.models_dir, f"model_{light}_{args.arch}.json"))
    if not paths:
        raise ConfigError("give --model LIGHT=path or --models-dir")
    nets = {light: _load_model(p) for light, p in paths.items()}
    corpus = _require(args.corpus, "held-out corpus")
    traces = load_corpus(corpus)
    report, rows = evaluate_conservativeness(nets, traces, float(cfg["bound"]["step"]))
    report = _stamp(report, cfg, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    dump_json(report, os.path.join(args.out_dir, "conservativeness.json"))
    with open(os.path.join(args.out_dir, "bounds_plot.csv"), "w") as fh:
        fh.write(plot_rows_csv(rows))
    _write_manifest(args.out_dir, "eval", cfg, args.seed,
                    {"corpus": corpus, **{f"model_{k}": v for k, v in paths.items()}})
    _print_json(report)


def cmd_report(args, cfg):
    steps = []
    for d in args.inputs:
        path = os.path.join(_require(d, "directory"), MANIFEST)
        if not os.path.isfile(path):
            raise FileNotFoundError(f"{path} not found")
        m = read_manifest(d)
        steps.append({"command": m.get("command"), "seed": m.get("seed"),
                      "config_hash": m.get("config_hash"), "manifest_sha256": digest(path),
                      "outputs": len(m.get("outputs", {}))})
    report = {"steps": steps, "seeds": sorted({s["seed"] for s in steps}),
              "config_hashes": sorted({s["config_hash"] for s in steps})}
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        dump_json(report, os.path.join(args.out_dir, "report.json"))
    _print_json(report)


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="driverbound", description=__doc__.split("\n")[0],
        epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    def add(name, func, help_, out_required=False):
        sp = sub.add_parser(name, parents=[common], help=help_, epilog=EXIT_CODES_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--out-dir", required=out_required)
        sp.set_defaults(func=func, overrides={})
        return sp

    sp = add("gen-human", cmd_gen_human, "generate a synthetic human corpus", True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--horizon", type=float)
    sp.set_defaults(override_map={"n": ("human", "n"), "horizon": ("human", "horizon")})

    sp = add("monitor", cmd_monitor, "print the robustness of a formula on a trace")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--time", type=int, default=0, help="sample index")
    sp.add_argument("--bind", action="append", help="parameter binding name=value")
    sp.add_argument("--json", action="store_true")

    sp = add("mine", cmd_mine, "mine tight template parameters from a corpus")
    sp.add_argument("--template", action="append")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--cells", type=int)
    sp.set_defaults(override_map={"eps": ("mining", "eps"), "cells": ("mining", "cells")})

    falsify_flags = {"solver": ("falsify", "solver"), "budget": ("falsify", "budget"),
                     "min_distance": ("falsify", "min_distance"),
                     "accept_band": ("falsify", "accept_band")}

    def solver_flags(sp):
        sp.add_argument("--solver", choices=("cmaes", "neldermead"))
        sp.add_argument("--budget", type=int)
        sp.add_argument("--min-distance", type=float)
        sp.add_argument("--accept-band", type=float)
        sp.set_defaults(override_map=falsify_flags)

    sp = add("falsify", cmd_falsify, "falsify one formula from one initial state")
    sp.add_argument("--formula")
    sp.add_argument("--template")
    sp.add_argument("--bind", action="append")
    sp.add_argument("--x0", required=True, help="d_x,v_x,light,t_el")
    solver_flags(sp)

    sp = add("gen-negatives", cmd_gen_negatives, "generate the non-human corpus", True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--frontier", action="append", help="frontier JSON from `mine`")
    solver_flags(sp)

    sp = add("train", cmd_train, "train light-specific classifiers", True)
    sp.add_argument("--human", required=True)
    sp.add_argument("--negatives", required=True)
    sp.add_argument("--epochs", type=int)
    sp.set_defaults(override_map={"epochs": ("train", "epochs")})

    sp = add("query-bound", cmd_query_bound, "accepted next inputs for a trace history")
    sp.add_argument("--model", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--end", type=int, help="window end sample; default all windows")
    sp.add_argument("--step", type=float)
    sp.add_argument("--refine", action="store_true", default=None)
    sp.set_defaults(override_map={"step": ("bound", "step"), "refine": ("bound", "refine")})

    sp = add("eval", cmd_eval, "conservativeness of bounds on held-out traces", True)
    sp.add_argument("--model", action="append", help="LIGHT=path")
    sp.add_argument("--models-dir")
    sp.add_argument("--arch", default="MLP-28", choices=sorted(ARCHS))
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--step", type=float)
    sp.set_defaults(override_map={"step": ("bound", "step")})

    sp = add("report", cmd_report, "aggregate manifests into one summary")
    sp.add_argument("inputs", nargs="+", help="output directories of earlier commands")
    return p


_ERRORS = [
    (FileNotFoundError, EXIT_MISSING_INPUT),
    (ConfigError, EXIT_CONFIG),
    (MiningError, EXIT_MINING),
    (BudgetError, EXIT_FALSIFY),
    (TrainingError, EXIT_TRAINING),
    (CorpusGenerationError, EXIT_BAD_DATA),
    (TraceError, EXIT_BAD_DATA),
    (STLSyntaxError, EXIT_BAD_DATA),
    (EmptyWindowError, EXIT_BAD_DATA),
    (ValueError, EXIT_BAD_DATA),
]


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {path: getattr(args, name)
                     for name, path in getattr(args, "override_map", {}).items()}
        cfg = load_config(args.config, overrides)
        args.func(args, cfg)
    except Exception as exc:  # map to a documented exit code
        code = next((c for t, c in _ERRORS if isinstance(exc, t)), EXIT_INTERNAL)
        if code == EXIT_INTERNAL:
            log.exception("internal error")
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                     "exit_code": code}) + "\n")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
