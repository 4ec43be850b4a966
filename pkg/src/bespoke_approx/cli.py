"""``bespoke-approx`` command line.

Every subcommand reads an optional JSON config (``--config``) whose keys are the
long option names with dashes replaced by underscores; flags given on the command
line win. Exit codes: 0 ok, 1 usage, 2 data error, 3 verification failure.

Config keys: fixture, model, dataset, schema, split_ratio, split_seed, u, c, h,
library, e, tau_grid, seed, out, profile_on, workers, budget, netlist, tau_c,
phi_c, report, hdl.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dse
from . import netlist as nl
from .cells import CellLibrary, LibraryError, default_library, load_library
from .coeff_approx import approximate_model
from .fixtures import NAMES, model_path
from .hdl import export_hdl
from .model import (DatasetError, FixedPointSpec, ModelError, QuantizedModel, accuracy, golden_batch,
                    load_dataset, load_model, load_quantized, quantize_inputs, quantize_model,
                    save_quantized, split_normalize)
from .prune import candidates, prune, save_candidates
from .sim import SimulationError, power, profile, simulate
from .synth import area_table, format_area_table, gen_model_circuit

log = logging.getLogger("bespoke_approx")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3

DEFAULTS = {
    "split_ratio": 0.7, "split_seed": 0, "u": 4, "c": 8, "h": 8, "e": 4, "seed": 0,
    "profile_on": "train", "budget": 0.01, "out": "out",
}
# keys that change how a run executes but never what it writes
_RUNTIME_ONLY = ("workers", "out", "config")


class UsageError(Exception):
    pass


class VerificationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- config


def _tau_grid(text) -> list[float]:
    if isinstance(text, list):
        return [float(t) for t in text]
    text = str(text)
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return [p / 100 for p in range(lo, hi + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < fixture metadata < config file < flags."""
    cfg = dict(DEFAULTS)
    file_cfg = {}
    if getattr(args, "config", None):
        p = Path(args.config)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        try:
            file_cfg = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError(f"{p}: config must be a JSON object")
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("func", "command", "verbose")}
    fixture = flags.get("fixture", file_cfg.get("fixture"))
    model = flags.get("model", file_cfg.get("model"))
    if fixture:
        if fixture not in NAMES:
            raise UsageError(f"unknown fixture {fixture!r}; choose from {', '.join(NAMES)}")
        cfg.update(_model_defaults(model_path(fixture)))
        model = model or str(model_path(fixture))
    if model and Path(model).exists():
        cfg.update(_model_defaults(Path(model)))
    cfg.update(file_cfg)
    cfg.update(flags)
    if fixture and "model" not in flags and "model" not in file_cfg:
        cfg["model"] = model
    if "tau_grid" in cfg:
        cfg["tau_grid"] = _tau_grid(cfg["tau_grid"])
        bad = [t for t in cfg["tau_grid"] if not 0.5 <= t <= 1.0]
        if bad or not cfg["tau_grid"]:
            raise UsageError(f"tau grid must be non-empty and within [0.5, 1.0], got {cfg['tau_grid']}")
    if cfg["profile_on"] not in ("train", "test"):
        raise UsageError("profile_on must be 'train' or 'test'")
    for key in ("model", "dataset", "library", "netlist", "report"):
        if cfg.get(key) and not Path(cfg[key]).exists():
            raise FileNotFoundError(f"{key} path not found: {cfg[key]}")
    return cfg


def _model_defaults(path: Path) -> dict:
    """Dataset, schema, split and spec recorded next to a shipped model."""
    try:
        meta = json.loads(path.read_text()).get("meta", {})
    except (json.JSONDecodeError, AttributeError):
        return {}
    out = {}
    if "dataset" in meta:
        out["dataset"] = str(path.parent / meta["dataset"])
    if "schema" in meta:
        out["schema"] = meta["schema"]
    if "split" in meta:
        out["split_ratio"] = meta["split"]["ratio"]
        out["split_seed"] = meta["split"]["seed"]
    out.update(meta.get("spec", {}))
    return out


def manifest(cfg: dict, lib: CellLibrary, command: str) -> dict:
    return {"command": command, "version": __version__, "library": lib.name, "library_hash": lib.digest(),
            "seeds": {"split": cfg["split_seed"], "seed": cfg["seed"]},
            "config": {k: v for k, v in sorted(cfg.items()) if k not in _RUNTIME_ONLY}}


def _library(cfg) -> CellLibrary:
    return load_library(cfg["library"]) if cfg.get("library") else default_library()


def _spec(cfg) -> FixedPointSpec:
    return FixedPointSpec(int(cfg["u"]), int(cfg["c"]), int(cfg["h"]))


def _need(cfg, *keys):
    for k in keys:
        if not cfg.get(k):
            raise UsageError(f"missing required setting --{k.replace('_', '-')} (or a fixture)")


def _quantized(cfg) -> QuantizedModel:
    _need(cfg, "model")
    try:
        doc = json.loads(Path(cfg["model"]).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{cfg['model']}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(doc, dict) and doc.get("format") == "bespoke-quantized":
        return load_quantized(cfg["model"])
    return quantize_model(load_model(cfg["model"]), _spec(cfg))


def _data(cfg, u):
    _need(cfg, "dataset")
    if "schema" not in cfg:
        raise UsageError("missing dataset schema (config key 'schema')")
    d = load_dataset(cfg["dataset"], cfg["schema"])
    train, test, _ = split_normalize(d, float(cfg["split_ratio"]), int(cfg["split_seed"]))
    return train, test, quantize_inputs(train, u), quantize_inputs(test, u)


def _vectors(X: np.ndarray) -> dict:
    return {f"x{i}": X[:, i] for i in range(X.shape[1])}


def golden_mismatches(n: nl.Netlist, q: QuantizedModel, X: np.ndarray, lib=None) -> int:
    """Rows where the circuit's decision or tracked words differ from the golden model."""
    out = simulate(n, _vectors(X), lib)
    g = golden_batch(q, X)
    bad = out["class" if q.is_classifier else "y"] != g["decision"]
    if q.is_classifier:
        ob = simulate(n, _vectors(X), lib, buses="obuses")
        for c in range(g["argmax_inputs"].shape[1]):
            bad |= ob[f"O{c}"] != g["argmax_inputs"][:, c]
    return int(bad.sum())


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# --------------------------------------------------------------------------- commands


def cmd_synth(cfg) -> int:
    lib = _library(cfg)
    q = _quantized(cfg)
    train, test, Xtr, Xte = _data(cfg, q.spec.u)
    n = gen_model_circuit(q, lib)
    diags = nl.validate(n, lib)
    if diags:
        raise VerificationError("generated netlist is invalid: " + "; ".join(diags))
    bad = golden_mismatches(n, q, np.vstack([Xtr, Xte]), lib)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    nl.save(n, out / "netlist.json")
    save_quantized(q, out / "quantized.json")
    if cfg.get("hdl"):
        export_hdl(n, out / "netlist.v")
    ar = nl.area(n, lib)
    summary = {"area": ar.total_area, "gates": ar.gate_count, "per_cell": ar.per_cell, "mismatches": bad,
               "vectors": len(Xtr) + len(Xte),
               "test_accuracy": accuracy(q, golden_batch(q, Xte)["decision"], test.labels)}
    _write_json(out / "area.json", summary)
    _write_json(out / "manifest.json", manifest(cfg, lib, "synth"))
    _emit(summary)
    if bad:
        raise VerificationError(f"{bad} vectors disagree with the golden model")
    return EXIT_OK


def cmd_eval(cfg) -> int:
    lib = _library(cfg)
    q = _quantized(cfg)
    train, test, Xtr, Xte = _data(cfg, q.spec.u)
    n = nl.load(cfg["netlist"]) if cfg.get("netlist") else gen_model_circuit(q, lib)
    key = "class" if q.is_classifier else "y"
    res = {}
    for part, X, d in (("train", Xtr, train), ("test", Xte, test)):
        res[f"{part}_accuracy"] = accuracy(q, simulate(n, _vectors(X), lib)[key], d.labels)
        res[f"{part}_golden_accuracy"] = accuracy(q, golden_batch(q, X)["decision"], d.labels)
    ar = nl.area(n, lib)
    res.update(area=ar.total_area, gates=ar.gate_count,
               power=power(n, profile(n, _vectors(Xte), lib), lib).total)
    _emit(res)
    return EXIT_OK


def cmd_coeff_approx(cfg) -> int:
    lib = _library(cfg)
    q = _quantized(cfg)
    qa = approximate_model(q, int(cfg["e"]), lib)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_quantized(qa, out / "quantized_approx.json")
    sums = qa.provenance["coeff_approx"]["sums"]
    before = sum(s["proxy_area_before"] for s in sums)
    after = sum(s["proxy_area_after"] for s in sums)
    summary = {"e": int(cfg["e"]), "proxy_area_before": before, "proxy_area_after": after,
               "max_abs_error_sum": max(abs(s["error_sum"]) for s in sums)}
    _write_json(out / "manifest.json", manifest(cfg, lib, "coeff-approx"))
    _emit(summary)
    return EXIT_OK


def cmd_prune(cfg) -> int:
    lib = _library(cfg)
    q = _quantized(cfg)
    if cfg.get("tau_c") is None or cfg.get("phi_c") is None:
        raise UsageError("prune needs --tau-c and --phi-c")
    train, test, Xtr, Xte = _data(cfg, q.spec.u)
    n = nl.load(cfg["netlist"]) if cfg.get("netlist") else gen_model_circuit(q, lib)
    prof = profile(n, _vectors(Xtr if cfg["profile_on"] == "train" else Xte), lib)
    cands = candidates(n, prof)
    try:
        pruned = prune(n, cands, float(cfg["tau_c"]), int(cfg["phi_c"]), lib)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    nl.save(pruned, out / "pruned.json")
    save_candidates(cands, out / "candidates.json")
    if cfg.get("hdl"):
        export_hdl(pruned, out / "pruned.v")
    key = "class" if q.is_classifier else "y"
    summary = {"removed": len(pruned.meta["prune"]["removed"]),
               "area": nl.area(pruned, lib).total_area, "area_before": nl.area(n, lib).total_area,
               "test_accuracy": accuracy(q, simulate(pruned, _vectors(Xte), lib)[key], test.labels)}
    _write_json(out / "manifest.json", manifest(cfg, lib, "prune"))
    _emit(summary)
    return EXIT_OK


def _front_summary(front, best) -> str:
    lines = [f"{'stage':<11}{'e':>3}{'tau_c':>7}{'phi_c':>7}{'accuracy':>10}{'norm_area':>11}"]
    for p in front:
        lines.append(f"{p.stage:<11}{_blank(p.e):>3}{_blank(p.tau_c):>7}{_blank(p.phi_c):>7}"
                     f"{p.accuracy:>10.4f}{p.normalized_area:>11.4f}")
    lines.append(f"best under budget: {best.stage} e={_blank(best.e)} tau_c={_blank(best.tau_c)} "
                 f"phi_c={_blank(best.phi_c)} accuracy={best.accuracy:.4f} "
                 f"normalized_area={best.normalized_area:.4f}")
    return "\n".join(lines)


def _blank(v):
    return "-" if v is None else v


def cmd_explore(cfg) -> int:
    lib = _library(cfg)
    q = _quantized(cfg)
    train, test, Xtr, Xte = _data(cfg, q.spec.u)
    stim = dse.Stimulus(Xtr, Xte, test.labels, train.labels, cfg["profile_on"])
    workers = int(cfg["workers"]) if cfg.get("workers") else (os.cpu_count() or 1)
    ex = dse.explore_cross(q, stim, int(cfg["e"]), lib, cfg.get("tau_grid"), workers=workers)
    out = Path(cfg["out"])
    (out / "netlists").mkdir(parents=True, exist_ok=True)
    front = dse.pareto(ex.points)
    problems = dse.verify_front(front, ex.points)
    named = []
    for i, p in enumerate(front):
        rel = f"netlists/front_{i:03d}.json"
        nl.save(ex.netlist_for(p), out / rel)
        named.append(p)
    front = [dse.DesignPoint(**{**p.__dict__, "netlist_path": f"netlists/front_{i:03d}.json"})
             for i, p in enumerate(named)]
    keyed = {p.config_key(): p for p in front}
    points = [keyed.get(p.config_key(), p) for p in ex.points]
    best = dse.best_under_budget(points, float(cfg["budget"]))
    man = manifest(cfg, lib, "explore")
    man["best_under_budget"] = best.config_key()
    dse.report(points, front, out, man)
    print(_front_summary(front, best))
    if problems:
        raise VerificationError("Pareto front failed verification: " + "; ".join(problems[:5]))
    return EXIT_OK


def cmd_pareto(cfg) -> int:
    _need(cfg, "report")
    points, _, man = dse.load_report(cfg["report"])
    if not points:
        raise DatasetError(f"{cfg['report']}: report has no points")
    front = dse.pareto(points)
    problems = dse.verify_front(front, points)
    best = dse.best_under_budget(points, float(cfg["budget"]))
    if cfg.get("out") and cfg["out"] != DEFAULTS["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "front.csv").write_text(dse.points_csv(front))
    print(_front_summary(front, best))
    if problems:
        raise VerificationError("Pareto front failed verification: " + "; ".join(problems[:5]))
    return EXIT_OK


def cmd_area_table(cfg) -> int:
    lib = _library(cfg)
    rows = area_table(int(cfg["u"]), int(cfg["c"]), lib)
    sys.stdout.write(format_area_table(rows))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "eval": cmd_eval, "coeff-approx": cmd_coeff_approx, "prune": cmd_prune,
            "explore": cmd_explore, "pareto": cmd_pareto, "area-table": cmd_area_table}


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bespoke-approx", description="Bespoke ML circuits with coefficient approximation "
                                                   "and netlist pruning.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        sp.add_argument("--library", help="cell library JSON (default: built-in library)")
        sp.add_argument("-v", "--verbose", action="store_true", default=None)
        if data:
            sp.add_argument("--fixture", help=f"shipped model: {', '.join(NAMES)}")
            sp.add_argument("--model", help="real-valued or quantized model JSON")
            sp.add_argument("--dataset", help="CSV dataset (defaults to the one named in the model file)")
            sp.add_argument("--split-ratio", type=float)
            sp.add_argument("--split-seed", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("-u", type=int, help="input bits")
            sp.add_argument("-c", type=int, help="coefficient bits")
            sp.add_argument("--h-bits", dest="h", type=int, help="hidden activation bits")
            sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("synth", help="generate, optimize and verify a bespoke circuit")
    common(sp)
    sp.add_argument("--hdl", action="store_true", default=None, help="also write structural HDL")
    sp = sub.add_parser("eval", help="simulate a circuit on both splits")
    common(sp)
    sp.add_argument("--netlist", help="netlist JSON (default: regenerate from the model)")
    sp = sub.add_parser("coeff-approx", help="approximate coefficients within +-e")
    common(sp)
    sp.add_argument("-e", type=int, help="coefficient threshold (default 4)")
    sp = sub.add_parser("prune", help="prune one (tau_c, phi_c) configuration")
    common(sp)
    sp.add_argument("--netlist")
    sp.add_argument("--tau-c", type=float)
    sp.add_argument("--phi-c", type=int)
    sp.add_argument("--profile-on", choices=("train", "test"))
    sp.add_argument("--hdl", action="store_true", default=None)
    sp = sub.add_parser("explore", help="full cross-layer exploration and reports")
    common(sp)
    sp.add_argument("-e", type=int)
    sp.add_argument("--tau-grid", help="'80:99' (percent range) or comma-separated fractions")
    sp.add_argument("--profile-on", choices=("train", "test"))
    sp.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    sp.add_argument("--budget", type=float, help="accuracy-loss budget (default 0.01)")
    sp = sub.add_parser("pareto", help="recompute the front of an existing report.json")
    common(sp, data=False)
    sp.add_argument("--report")
    sp.add_argument("--budget", type=float)
    sp.add_argument("--out")
    sp = sub.add_parser("area-table", help="bespoke multiplier area for every coefficient")
    common(sp, data=False)
    sp.add_argument("-u", type=int)
    sp.add_argument("-c", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"bespoke-approx {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"bespoke-approx {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (FileNotFoundError, DatasetError, ModelError, LibraryError, nl.NetlistError, SimulationError,
            json.JSONDecodeError, KeyError, ValueError) as exc:
        where = type(exc).__module__.rsplit(".", 1)[-1]
        if where == "builtins":
            where = "input"
        print(f"bespoke-approx {args.command}: {where}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
