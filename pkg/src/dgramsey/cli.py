"""Command-line experiment runner.

    dgramsey <command> --config <path> [--seed S] [--workers W] [--out DIR]

Configs are JSON. Artifacts depend only on the config and the seed, never on
the worker count. Exit status: 0 success, 2 hypothesis not met, 1 error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Any, Mapping

import numpy as np

from . import counting, localization, search
from .errors import ConfigError, DGRamseyError
from .geometry import fold_graph, verify_isometric
from .graphs import DistanceGraph, degeneracy_ordering, is_proper, load_graph
from .gridset import GridSet, generate, spectrum_annulus_mass, u1_norm
from .rng import STREAM_FOLD, substream

EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS = 0, 1, 2

STOCHASTIC = {"fold", "count", "c0", "gvn", "corollary", "scan", "threshold", "localize"}

COMMANDS = {
    "validate": ("Degeneracy ordering and properness of a graph.", "validate.json: proper, degeneracy, order, predecessors, failing, determinants."),
    "fold": ("Fold a graph at scale lambda.", "embedding.json: lambda, points; fold.json: verification summary."),
    "count": (
        "Estimate the localized counting function.",
        "count.json: value, std_error, samples, lambda, seed. With 'lambdas' in the config, count.csv columns: lambda,value,std_error,samples,seed.",
    ),
    "c0": ("Estimate the total mass of the nested sphere measures.", "c0.json: value, std_error, samples, lambda, seed."),
    "gvn": ("Compare a counting function with the U^1 norm of one input.", "gvn.json: lhs, rhs, slack, std_error, estimate."),
    "u1": ("U^1(L) norm of the balanced indicator of a set.", "u1.json: value, L, boundary, density."),
    "spectrum": ("Spectral mass of a set over frequency annuli.", "spectrum.csv columns: r_lo,r_hi,mass."),
    "localize": (
        "Find a partition scale where the set is uniform in most cubes.",
        "localization.json: chosen level and per-cube statistics; localization.csv columns: level,energy,exceptional_fraction; aggregate.json when 'aggregate' is configured.",
    ),
    "scan": ("Search for copies over a geometric range of scales.", "scan.csv columns: lambda,found,witness_file; witnesses/ holds embedding JSON files."),
    "threshold": ("Largest scanned scale without a copy.", "threshold.json: threshold (null when the last scale is absent), absent_at_end; scan.csv as for scan."),
    "corollary": ("Check the counting lower bound under the uniformity hypothesis.", "corollary.json: status, u1, T, c0, alpha_power, bound, bound_holds."),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dgramsey", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True
    for name, (desc, cols) in COMMANDS.items():
        sp = sub.add_parser(name, help=desc, description=desc, epilog=f"Outputs: {cols}")
        sp.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
        sp.add_argument("--seed", type=int, metavar="S", help="64-bit seed (overrides the config)")
        sp.add_argument("--workers", type=int, default=None, metavar="W", help="worker threads (results do not depend on it)")
        sp.add_argument("--out", default=None, metavar="DIR", help="output directory (default: config 'out' or .)")
        if name in ("scan", "threshold"):
            sp.add_argument("--budget", type=int, metavar="B", help="directions per configuration sphere")
            sp.add_argument("--tolerance", type=float, metavar="DELTA", help="edge-length tolerance (>= sqrt(d)/N)")
            sp.add_argument("--stride", type=int, metavar="K", help="anchor subsampling stride")
    return p


# ---------------------------------------------------------------------------
# config helpers


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


class Config:
    """Field access with diagnostics naming the offending field."""

    def __init__(self, doc: Mapping[str, Any], path: str):
        self.doc = doc
        self.path = path
        self.base = os.path.dirname(os.path.abspath(path))

    def has(self, key: str) -> bool:
        return key in self.doc

    def get(self, key: str, default: Any = None, kind=None, required: bool = False):
        if key not in self.doc:
            if required:
                raise ConfigError(f"{self.path}: missing field '{key}'")
            return default
        val = self.doc[key]
        if kind is None:
            return val
        try:
            return kind(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.path}: field '{key}': {exc}") from exc

    def resolve(self, p: str) -> str:
        full = p if os.path.isabs(p) else os.path.join(self.base, p)
        if not os.path.exists(full):
            raise ConfigError(f"{self.path}: referenced file '{p}' does not exist")
        return full

    def graph(self, key: str = "graph") -> DistanceGraph:
        src = self.get(key, required=True)
        try:
            if isinstance(src, str):
                return load_graph(self.resolve(src))
            return load_graph(src)
        except DGRamseyError as exc:
            raise ConfigError(f"{self.path}: field '{key}': {exc}") from exc

    def gridset(self, seed: int | None, key: str = "set") -> GridSet:
        desc = self.get(key, required=True)
        if isinstance(desc, str):
            desc = {"kind": "from_file", "path": desc}
        if not isinstance(desc, dict):
            raise ConfigError(f"{self.path}: field '{key}' must be a descriptor object or a path")
        desc = dict(desc)
        if desc.get("kind") == "from_file":
            desc["path"] = self.resolve(desc.get("path", ""))
        if desc.get("kind") == "iid" and "seed" not in desc:
            if seed is None:
                raise ConfigError(f"{self.path}: an iid set needs a seed")
            desc["seed"] = seed
        try:
            return generate(desc, self.get("N", None), self.get("d", None))
        except DGRamseyError as exc:
            raise ConfigError(f"{self.path}: field '{key}': {exc}") from exc

    def cutoffs(self, graph, ordering, seed):
        c = self.get("cutoffs", "default")
        n1 = len(ordering.order)
        if c == "default":
            return counting.default_cutoffs(graph, ordering, seed)
        if c == "none":
            return counting.CutoffProfile.accept_all(n1)
        if isinstance(c, dict):
            r = np.asarray(c.get("r_min", [0.0] * n1), dtype=float)
            R = np.asarray([math.inf if x is None else x for x in c.get("R_max", [None] * n1)], dtype=float)
            if r.shape != (n1,) or R.shape != (n1,):
                raise ConfigError(f"{self.path}: field 'cutoffs': need {n1} entries per list")
            return counting.CutoffProfile(r, R)
        raise ConfigError(f"{self.path}: field 'cutoffs' must be 'default', 'none' or an object")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(out: str, name: str, text: str) -> str:
    path = os.path.join(out, name)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _lam(cfg: Config) -> float:
    lam = cfg.get("lambda", kind=float, required=True)
    if not 0 < lam:
        raise ConfigError(f"{cfg.path}: field 'lambda' must be positive")
    return lam


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg, seed, workers, out):
    g = cfg.graph()
    o = degeneracy_ordering(g)
    rep = is_proper(g, o, cfg.get("tol", 1e-8, float))
    doc = {
        "proper": bool(rep),
        "degeneracy": o.degeneracy,
        "order": list(o.order),
        "predecessors": [list(p) for p in o.predecessors],
        "failing": list(rep.failing),
        "determinants": [float(x) for x in rep.determinants],
        "dim": g.dim,
        "dimension_ok": g.dim >= o.degeneracy + 1,
    }
    _write(out, "validate.json", _dump(doc))
    print(f"proper: {str(bool(rep)).lower()}")
    return EXIT_OK


def cmd_fold(cfg, seed, workers, out):
    g = cfg.graph()
    o = degeneracy_ordering(g)
    lam = _lam(cfg)
    emb = fold_graph(g, o, lam, substream(seed, STREAM_FOLD))
    ok = verify_isometric(emb, cfg.get("tol", 1e-9, float))
    _write(out, "embedding.json", _dump(emb.to_json()))
    _write(out, "fold.json", _dump({"verified": ok, "flags": list(emb.flags), "order": list(o.order)}))
    return EXIT_OK if ok else EXIT_ERROR


def _functions(cfg, seed, n1):
    if cfg.has("functions"):
        fs = []
        for i, desc in enumerate(cfg.get("functions")):
            if desc is None or desc == "one":
                fs.append(None)
            elif isinstance(desc, (int, float)):
                fs.append(float(desc))
            else:
                key = f"functions[{i}]"
                sub = Config({**cfg.doc, key: (desc.get("set") if isinstance(desc, dict) and "set" in desc else desc)}, cfg.path)
                A = sub.gridset(seed, key)
                balanced = isinstance(desc, dict) and desc.get("balanced", False)
                fs.append(A.balanced() if balanced else A)
        return fs
    if cfg.has("set"):
        return [cfg.gridset(seed)] * n1
    return [None] * n1


def cmd_count(cfg, seed, workers, out):
    g = cfg.graph()
    o = degeneracy_ordering(g)
    n1 = len(o.order)
    fs = _functions(cfg, seed, n1)
    if len(fs) != n1:
        raise ConfigError(f"{cfg.path}: field 'functions' needs {n1} entries")
    cut = cfg.cutoffs(g, o, seed)
    samples = cfg.get("samples", 100_000, int)
    if cfg.has("lambdas"):
        rows = ["lambda,value,std_error,samples,seed"]
        for lam in cfg.get("lambdas"):
            e = counting.estimate_T(g, o, fs, float(lam), cut, samples, seed, workers)
            rows.append(f"{e.lam!r},{e.value!r},{e.std_error!r},{e.samples},{e.seed}")
        _write(out, "count.csv", "\n".join(rows) + "\n")
        return EXIT_OK
    e = counting.estimate_T(g, o, fs, _lam(cfg), cut, samples, seed, workers)
    _write(out, "count.json", _dump(e.to_json()))
    return EXIT_OK


def cmd_c0(cfg, seed, workers, out):
    g = cfg.graph()
    o = degeneracy_ordering(g)
    e = counting.estimate_c0(g, o, cfg.cutoffs(g, o, seed), cfg.get("samples", 100_000, int), seed, workers)
    _write(out, "c0.json", _dump(e.to_json()))
    return EXIT_OK


def cmd_gvn(cfg, seed, workers, out):
    g = cfg.graph()
    o = degeneracy_ordering(g)
    lam = _lam(cfg)
    eps = cfg.get("epsilon", required=True, kind=float)
    L = cfg.get("L", eps**6 * lam, float)
    fs = _functions(cfg, seed, len(o.order))
    rep = counting.gvn_check(g, o, fs, lam, L, eps, cfg.cutoffs(g, o, seed), cfg.get("samples", 100_000, int), seed, workers)
    _write(out, "gvn.json", _dump({**rep.to_json(), "L": L, "epsilon": eps}))
    return EXIT_OK


def cmd_u1(cfg, seed, workers, out):
    A = cfg.gridset(seed)
    L = cfg.get("L", required=True, kind=float)
    boundary = cfg.get("boundary", "zero")
    v = u1_norm(A.balanced(), L, boundary)
    _write(out, "u1.json", _dump({"value": v, "L": L, "boundary": boundary, "density": A.density}))
    return EXIT_OK


def cmd_spectrum(cfg, seed, workers, out):
    A = cfg.gridset(seed)
    annuli = cfg.get("annuli", [[0.0, None]])
    rows = ["r_lo,r_hi,mass"]
    for pair in annuli:
        lo = float(pair[0])
        hi = math.inf if pair[1] is None else float(pair[1])
        rows.append(f"{lo!r},{hi!r},{spectrum_annulus_mass(A, lo, hi)!r}")
    _write(out, "spectrum.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_localize(cfg, seed, workers, out):
    A = cfg.gridset(seed)
    eps = cfg.get("epsilon", required=True, kind=float)
    inv = cfg.get("inverses", None)
    if inv is None:
        chain = localization.ScaleChain.from_scales(eps, cfg.get("scales", required=True), c=cfg.get("c", 1.0, float), C=cfg.get("C", 8.0, float))
    else:
        chain = localization.ScaleChain(eps, tuple(int(x) for x in inv), c=cfg.get("c", 1.0, float), C=cfg.get("C", 8.0, float))
    res = localization.find_uniform_scale(A, chain)
    doc = res.to_json()
    doc["chain_violations"] = list(chain.violations)
    _write(out, "localization.json", _dump(doc))
    _write(out, "localization.csv", res.trace_csv())
    agg = cfg.get("aggregate")
    if agg:
        sub = Config({**cfg.doc, **agg}, cfg.path)
        g = sub.graph()
        o = degeneracy_ordering(g)
        rep = localization.aggregate_counts(
            A, res, g, o, _lam(sub), sub.cutoffs(g, o, seed), sub.get("samples", 100_000, int), seed, workers,
            enforce_window=sub.get("enforce_window", True, bool),
        )
        _write(out, "aggregate.json", _dump(rep.to_json()))
    return EXIT_OK


def _scan(cfg, seed, workers, out, args):
    A = cfg.gridset(seed)
    g = cfg.graph()
    lo = cfg.get("lam_lo", required=True, kind=float)
    hi = cfg.get("lam_hi", required=True, kind=float)
    steps = cfg.get("steps", 32, int)
    budget = args.budget if args.budget is not None else cfg.get("budget", None)
    tol = args.tolerance if args.tolerance is not None else cfg.get("tolerance", None)
    stride = args.stride if args.stride is not None else cfg.get("stride", None)
    rep = search.scan_lambda(A, g, lo, hi, steps, tolerance=tol, anchor_stride=stride, rotation_budget=budget, seed=seed, workers=workers)
    names = []
    for i, w in enumerate(rep.witnesses):
        if w is None:
            names.append("")
            continue
        name = f"witnesses/witness_{i:04d}.json"
        _write(out, name, _dump(w.to_json()))
        names.append(name)
    _write(out, "scan.csv", rep.to_csv(names))
    return rep


def cmd_scan(cfg, seed, workers, out, args):
    _scan(cfg, seed, workers, out, args)
    return EXIT_OK


def cmd_threshold(cfg, seed, workers, out, args):
    rep = _scan(cfg, seed, workers, out, args)
    t = search.threshold_from_report(rep)
    _write(out, "threshold.json", _dump({"threshold": None if math.isinf(t) else t, "absent_at_end": math.isinf(t)}))
    return EXIT_OK


def cmd_corollary(cfg, seed, workers, out):
    A = cfg.gridset(seed)
    g = cfg.graph()
    o = degeneracy_ordering(g)
    eps = cfg.get("epsilon", required=True, kind=float)
    rep = counting.corollary_lower_bound_check(A, g, o, _lam(cfg), eps, cfg.cutoffs(g, o, seed), cfg.get("samples", 100_000, int), seed, workers)
    _write(out, "corollary.json", _dump(rep.to_json()))
    print(f"status: {rep.status}")
    if rep.status == "hypothesis-not-met":
        return EXIT_HYPOTHESIS
    return EXIT_OK if rep.status == "ok" else EXIT_ERROR


HANDLERS = {
    "validate": cmd_validate,
    "fold": cmd_fold,
    "count": cmd_count,
    "c0": cmd_c0,
    "gvn": cmd_gvn,
    "u1": cmd_u1,
    "spectrum": cmd_spectrum,
    "localize": cmd_localize,
    "scan": cmd_scan,
    "threshold": cmd_threshold,
    "corollary": cmd_corollary,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(load_config(args.config), args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", None, int)
        if args.command in STOCHASTIC and seed is None:
            raise ConfigError(f"{args.config}: command '{args.command}' needs a seed (--seed or field 'seed')")
        workers = args.workers if args.workers is not None else cfg.get("workers", 1, int)
        if workers < 1:
            raise ConfigError("workers must be at least 1")
        out = args.out or cfg.get("out", ".")
        os.makedirs(out, exist_ok=True)
        handler = HANDLERS[args.command]
        if args.command in ("scan", "threshold"):
            return handler(cfg, seed, workers, out, args)
        return handler(cfg, seed, workers, out)
    except (DGRamseyError, ValueError, KeyError, TypeError) as exc:
        print(f"dgramsey {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
