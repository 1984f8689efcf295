"""Batch command line front end.

Every leaf command takes its parameters from a flat JSON config
(``--config``) overridden by flags, writes its artifacts into the output
directory (``--out``, else ``$OUTPUT_DIR``, else ``./out``) and a manifest
``<command>.manifest.json`` holding the resolved config, library versions,
timings and output digests.  ``replay MANIFEST`` re-runs a manifest.

Exit codes: 0 success, 2 invalid input, 3 work budget exceeded,
4 numerical non-convergence.  Failures print a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .bernoulli import (DEFAULT_NODE_BUDGET, ConvergenceError, WorkBudgetExceeded,
                        build_histogram, count_expansions, count_Nk, frostman_exponent)
from .scales import (case3_constants, dim_formula, ell2, ell_n_dynamical, t_gamma_forms,
                     t_gamma_identity_check, thresholds)
from .separation import (double_zero_scan, min_poly, rounding_bound, separation_profile,
                         transversality_measure)
from .symbolic import Params, Regime, SymbolWord, pi_2d
from .targets import (MeasureSpec, TargetSpec, build_schedule, cover_count, cylinder_rects,
                      dim_box_attractor, dynamical_membership, energy_estimate,
                      local_dim_probe, preimage_arrays, render_pgm)
from .targets.geometry import box_count
from .targets.probes import ball_depth, energy_profile

EXIT_INVALID, EXIT_BUDGET, EXIT_CONVERGENCE = 2, 3, 4


class InputError(ValueError):
    """Invalid command line or config."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------- option tables

def _word(s: str) -> str:
    SymbolWord.from_str(s)
    return s.strip()


LAM = ("lambda", float, None, "contraction ratio in (1/2, 1)")
GAM = ("gamma", float, None, "target shrink rate in (0, 1)")
Z = ("z", _word, None, "centre coding as a 0/1 string (random from the seed if omitted)")
ZLEN = ("z_length", int, 400, "length of the random centre coding")
BUDGET = ("budget", int, DEFAULT_NODE_BUDGET, "node budget")
SCHED = [("case", int, 1, "mass distribution case (1, 2 or 3)"),
         ("n1", int, 4, "first return time"),
         ("returns", int, 3, "number of return times (at most 5)"),
         ("c", float, 4.0, "schedule growth factor (>= 3)")]

COMMANDS: dict[str, tuple[list, Callable]] = {}


def command(name: str, options: list):
    def deco(fn):
        COMMANDS[name] = (options, fn)
        return fn
    return deco


# ---------------------------------------------------------------- helpers

class Run:
    """Resolved config plus output bookkeeping for one command."""

    def __init__(self, name: str, cfg: dict, out: Path):
        self.name = name
        self.cfg = cfg
        self.out = out
        self.outputs: dict[str, str] = {}
        self.timings: dict[str, float] = {}
        self.stem = name.replace(" ", "_").replace("-", "_")

    def __getitem__(self, key):
        return self.cfg[key]

    def write(self, suffix: str, data) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"{self.stem}{suffix}"
        raw = data if isinstance(data, bytes) else data.encode("utf-8")
        path.write_bytes(raw)
        self.outputs[path.name] = hashlib.sha256(raw).hexdigest()
        return path

    def write_json(self, suffix: str, obj) -> Path:
        return self.write(suffix, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")

    def write_csv(self, suffix: str, header: list, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        return self.write(suffix, buf.getvalue())

    def params(self) -> Params:
        if self.cfg.get("lambda") is None or self.cfg.get("gamma") is None:
            raise InputError("--lambda and --gamma are required")
        return Params(self.cfg["lambda"], self.cfg["gamma"])

    def lam(self) -> float:
        if self.cfg.get("lambda") is None:
            raise InputError("--lambda is required")
        lam = float(self.cfg["lambda"])
        if not 0.5 < lam < 1.0:
            raise InputError(f"lambda must lie in (1/2, 1), got {lam}")
        return lam

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.cfg["seed"])

    def centre(self, rng: np.random.Generator) -> SymbolWord:
        if self.cfg.get("z"):
            return SymbolWord.from_str(self.cfg["z"])
        return SymbolWord.random(self.cfg["z_length"], rng)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _measure(run: Run, rng: np.random.Generator) -> MeasureSpec:
    p = run.params()
    z = run.centre(rng)
    sched = build_schedule(p, run["n1"], run["returns"], run["c"])
    return MeasureSpec(run["case"], TargetSpec(z, p), sched)


def _schedule_bias(ms: MeasureSpec) -> float:
    """Largest share of forced symbols before a return: ``L_{m-1} / n_m``."""
    ns = ms.schedule.n
    p = ms.p
    worst = 0.0
    for m in range(1, len(ns)):
        forced = sum(ell2(n, p) for n in ns[:m])
        worst = max(worst, forced / ns[m])
    return worst


# ---------------------------------------------------------------- commands

@command("formulas", [LAM, GAM, ("lambda0", float, None, "case-3 interval start"),
                      ("lambda1", float, None, "case-3 interval end"),
                      ("n", int, 20, "return time for the scale table")])
def cmd_formulas(run: Run) -> dict:
    p = run.params()
    tab = thresholds(run["n"], p)
    res = {
        "lambda": p.lam, "gamma": p.gamma, "regime": p.regime.value,
        "dim": {f"case{c}": dim_formula(c, p) for c in (1, 2, 3)},
        "dim_F": 2.0 + math.log(p.lam) / math.log(2.0),
        "t_gamma_forms": t_gamma_forms(p),
        "identity_deviation": t_gamma_identity_check(p),
        "scales": {"n": tab.n_m, "ell1": tab.ell1, "ell2": tab.ell2,
                   "r_minus1": tab.r_minus1, "r_0": tab.r_0},
        "ell_n_dynamical": ell_n_dynamical(run["n"], p),
        "cube": "closed, side 2r",
    }
    if run.cfg.get("lambda0") is not None:
        l1 = run.cfg.get("lambda1") or run["lambda0"]
        k = case3_constants(run["lambda0"], l1, p.gamma)
        res["case3_constants"] = {"xi": k.xi, "s": k.s, "eta": k.eta,
                                  "lambda0": k.lambda0, "lambda1": k.lambda1}
    run.write_json(".json", res)
    return res


@command("render", [LAM, ("depth", int, 14, "cylinder depth (<= 26)"),
                    ("px", int, 1024, "raster side in pixels (power of two)"),
                    ("preimages", int, None, "render the n-th preimages of the target instead of F"),
                    GAM, Z, ZLEN])
def cmd_render(run: Run) -> dict:
    lam = run.lam()
    px = run["px"]
    if px < 1 or px & (px - 1) or px > 1 << 14:
        raise InputError("--px must be a power of two not above 16384")
    r = px.bit_length() - 1
    if run.cfg.get("preimages") is not None:
        t = TargetSpec(run.centre(run.rng()), run.params())
        rects = preimage_arrays(t, run["preimages"])
        what = f"preimages n={run['preimages']}"
    else:
        if not 0 <= run["depth"] <= 26:
            raise InputError("--depth must be in [0, 26]")
        rects = cylinder_rects(lam, run["depth"])
        what = "F"
    data = render_pgm(rects, r)
    run.write(".pgm", data)
    on = int(np.count_nonzero(np.frombuffer(data[-px * px:], dtype=np.uint8)))
    res = {"what": what, "lambda": lam, "px": px, "r": r, "on_pixels": on,
           "box_count": box_count(rects, r), "rectangles": len(rects)}
    run.write_json(".json", res)
    return res


@command("dim-f", [LAM, ("r_lo", int, 8, "smallest grid exponent"),
                   ("r_hi", int, 14, "largest grid exponent (<= 20)")])
def cmd_dim_f(run: Run) -> dict:
    lam = run.lam()
    if run["r_hi"] > 20:
        raise InputError("--r-hi must be at most 20")
    bd = dim_box_attractor(lam, run["r_lo"], run["r_hi"])
    run.write_csv(".csv", ["r", "count"], zip(bd.r, bd.counts))
    res = {"lambda": lam, "slope": bd.slope, "stderr": bd.stderr,
           "formula": 2.0 + math.log(lam) / math.log(2.0), "r": list(bd.r),
           "counts": list(bd.counts)}
    run.write_json(".json", res)
    return res


@command("targets cover", [LAM, GAM, Z, ZLEN,
                           ("n", int, [400], "return times", "+"),
                           ("strategies", str, "ABC", "subset of A, B, C"),
                           ("nk_budget", int, 200_000, "node budget for N_k")])
def cmd_cover(run: Run) -> dict:
    p = run.params()
    t = TargetSpec(run.centre(run.rng()), p)
    rows, best = [], {}
    for n in run["n"]:
        covers = [cover_count(s, t, n, run["nk_budget"]) for s in run["strategies"]]
        for cc in covers:
            rows.append((cc.strategy, n, cc.log_side, cc.log_count, cc.exponent,
                         "" if cc.n_count is None else cc.n_count, cc.extrapolated))
        best[str(n)] = min(covers, key=lambda cc: cc.exponent).strategy
    run.write_csv(".csv", ["strategy", "n", "log_side", "log_count", "exponent",
                           "log_n_count", "extrapolated"], rows)
    res = {"lambda": p.lam, "gamma": p.gamma, "regime": p.regime.value, "argmin": best,
           "dim": {f"case{c}": dim_formula(c, p) for c in (1, 2, 3)}}
    run.write_json(".json", res)
    return res


@command("targets probe", [LAM, GAM, Z, ZLEN, *SCHED,
                           ("r_lo", int, 20, "smallest scale exponent"),
                           ("r_hi", int, 60, "largest scale exponent"),
                           ("points", int, 10, "number of sampled points"),
                           BUDGET])
def cmd_probe(run: Run) -> dict:
    rng = run.rng()
    ms = _measure(run, rng)
    depth = ball_depth(math.ldexp(1.0, -run["r_hi"]), ms.p.lam)
    codes = ms.sample_digits(depth, run["points"], rng)
    out = []
    for row in codes:
        x = SymbolWord.from_digits(row)
        pr = local_dim_probe(ms, x, run["r_lo"], run["r_hi"], run["budget"])
        d = {k: [_jsonable(v) for v in val] if isinstance(val, list) else _jsonable(val)
             for k, val in pr.to_json().items()}
        out.append(d)
    summaries = [d["summary"] for d in out]
    res = {"measure": ms.describe(), "formula": dim_formula(ms.case, ms.p),
           "schedule_bias": _schedule_bias(ms), "summary_min": min(summaries),
           "summary_max": max(summaries), "probes": out}
    run.write_json(".json", res)
    return {k: v for k, v in res.items() if k != "probes"}


@command("targets energy", [LAM, GAM, Z, ZLEN, *SCHED,
                            ("t", float, None, "exponents (default: formula -/+ 0.1)", "+"),
                            ("pairs", int, 10_000, "number of samples"),
                            ("depth", int, 12, "base depth d (depths d, 2d, 4d)"),
                            ("method", str, "conditional", "conditional or pairs"),
                            BUDGET])
def cmd_energy(run: Run) -> dict:
    rng = run.rng()
    ms = _measure(run, rng)
    formula = dim_formula(ms.case, ms.p)
    ts = run.cfg.get("t") or [formula - 0.1, formula + 0.1]
    phi = None
    if run["method"] == "conditional":
        # ball masses do not depend on t, so one descent serves every exponent
        t0 = time.perf_counter()
        phi = energy_profile(ms, 4 * run["depth"], run["pairs"], run["seed"], run["budget"])
        run.timings["ball_masses"] = time.perf_counter() - t0
    rows, res_t = [], []
    for t in ts:
        t0 = time.perf_counter()
        er = energy_estimate(ms, t, run["pairs"], run["depth"], run["seed"],
                             method=run["method"], budget=run["budget"], phi=phi)
        run.timings[f"t={t!r}"] = time.perf_counter() - t0
        for d, m, e in zip(er.depths, er.means, er.stderr):
            rows.append((t, d, m, e))
        res_t.append({"t": t, "depths": list(er.depths), "means": list(er.means),
                      "stderr": list(er.stderr), "trend": er.trend})
    run.write_csv(".csv", ["t", "depth", "mean", "stderr"], rows)
    res = {"measure": ms.describe(), "formula": formula, "method": run["method"],
           "samples": run["pairs"], "results": res_t}
    run.write_json(".json", res)
    return res


@command("targets dynamical", [LAM, GAM, Z, ZLEN,
                               ("i", _word, None, "coding to test (random if omitted)"),
                               ("n", int, 10, "time")])
def cmd_dynamical(run: Run) -> dict:
    p = run.params()
    rng = run.rng()
    z = run.centre(rng)
    n = run["n"]
    ell = 0 if n == 0 else ell_n_dynamical(n, p)
    i = SymbolWord.from_str(run["i"]) if run.cfg.get("i") else SymbolWord.random(n + ell, rng)
    res = {"n": n, "ell_n": ell, "member": dynamical_membership(i, TargetSpec(z, p), n),
           "i": str(i), "regime": p.regime.value}
    run.write_json(".json", res)
    return res


@command("bc hist", [LAM, ("level", int, 12, "dyadic level m (<= 24)"),
                     ("iterations", int, None, "iteration cap (default 10 m)"),
                     ("tol", float, 1e-9, "L1 stopping tolerance")])
def cmd_hist(run: Run) -> dict:
    h = build_histogram(run.lam(), run["level"], run.cfg.get("iterations"), run["tol"])
    run.write(".csv", h.to_csv())
    res = {"lambda": h.lam, "level": h.level, "iterations": h.iterations,
           "residual": h.residual, "frostman_exponent": frostman_exponent(h)}
    run.write_json(".json", res)
    return res


@command("bc nk", [LAM, ("x", float, None, "point in [0, 1]"),
                   ("rho", float, 1.0, "relative radius"),
                   ("k", int, None, "depth"), BUDGET])
def cmd_nk(run: Run) -> dict:
    if run.cfg.get("x") is None or run.cfg.get("k") is None:
        raise InputError("--x and --k are required")
    bc = count_Nk(run["x"], run["rho"], run["k"], run.lam(), budget=run["budget"],
                  threads=run["threads"])
    res = {"lambda": run["lambda"], "x": bc.x, "rho": bc.rho, "k": bc.k, "count": bc.count,
           "nodes": bc.nodes}
    run.write_json(".json", res)
    return res


@command("bc expansions", [LAM, ("x", float, None, "point in [0, 1]"),
                           ("k", int, None, "depth"), BUDGET])
def cmd_expansions(run: Run) -> dict:
    if run.cfg.get("x") is None or run.cfg.get("k") is None:
        raise InputError("--x and --k are required")
    c = count_expansions(run["x"], run.lam(), run["k"], budget=run["budget"],
                         threads=run["threads"])
    res = {"lambda": run["lambda"], "x": run["x"], "k": run["k"], "count": c}
    run.write_json(".json", res)
    return res


@command("sep scan", [("lambda_lo", float, 0.51, "grid start"),
                      ("lambda_hi", float, 0.99, "grid end"),
                      ("steps", int, 49, "grid points"),
                      ("n", int, 12, "polynomial degree")])
def cmd_sep_scan(run: Run) -> dict:
    lo, hi, n = run["lambda_lo"], run["lambda_hi"], run["n"]
    if not 0.5 < lo <= hi < 1.0 or run["steps"] < 1:
        raise InputError("need 1/2 < lambda_lo <= lambda_hi < 1 and steps >= 1")
    rows = []
    for lam in np.linspace(lo, hi, run["steps"]):
        pm = min_poly(float(lam), n)
        zero = pm.value <= rounding_bound(float(lam), n)
        lmn = -math.inf if zero else math.log(pm.value) / max(n, 1)
        rows.append((float(lam), pm.value, lmn, zero))
    run.write_csv(".csv", ["lambda", "min_value", "log_min_over_n", "exact_zero"], rows)
    res = {"n": n, "points": len(rows), "smallest": min(r[1] for r in rows),
           "exact_zeros": [r[0] for r in rows if r[3]]}
    run.write_json(".json", res)
    return res


def _decimal_delta(text: str) -> float:
    """Half a unit in the last written decimal place of ``text``."""
    try:
        d = Decimal(text)
    except InvalidOperation as exc:
        raise InputError(f"not a decimal number: {text!r}") from exc
    exp = d.as_tuple().exponent
    return 0.5 * 10.0 ** exp if isinstance(exp, int) and exp < 0 else 0.0


@command("sep profile", [("lambda", str, None, "lambda as written; its decimals fix the tolerance"),
                         ("nmax", int, 12, "largest degree (<= 29)"),
                         ("delta", float, None, "tolerance on lambda (default from its decimals)"),
                         ("timings", int, 0, "1 adds a per-degree seconds column to the CSV")])
def cmd_sep_profile(run: Run) -> dict:
    text = str(run.cfg.get("lambda") or "")
    if not text:
        raise InputError("--lambda is required")
    lam = float(text)
    if not 0.5 < lam < 1.0:
        raise InputError(f"lambda must lie in (1/2, 1), got {lam}")
    delta = run.cfg.get("delta")
    if delta is None:
        delta = _decimal_delta(text)
    rows = separation_profile(lam, run["nmax"], delta)
    header = ["n", "min_value", "log_min_over_n", "exact_zero"]
    if run["timings"]:
        header.append("seconds")
    run.write_csv(".csv", header,
                  [(r.n, r.min_value, r.log_min_over_n, r.exact_zero)
                   + ((r.seconds,) if run["timings"] else ()) for r in rows])
    for r in rows:
        run.timings[f"n={r.n}"] = r.seconds
    flagged = [r.n for r in rows if r.exact_zero]
    res = {"lambda": lam, "delta": delta, "nmax": run["nmax"],
           "first_exact_zero": flagged[0] if flagged else None,
           "min_values": [r.min_value for r in rows]}
    run.write_json(".json", res)
    return res


def _trans_depth(lam_hi: float, rho: float) -> int:
    d = 1
    while lam_hi ** (d + 1) / (1.0 - lam_hi) >= rho / 10.0:
        d += 1
    return d


@command("trans measure", [("i", _word, None, "first word (random pairs if omitted)"),
                           ("j", _word, None, "second word"),
                           ("pairs", int, 200, "number of random pairs"),
                           ("rho", float, [1e-1, 1e-2, 1e-3], "radii", "+"),
                           ("lambda_lo", float, 0.52, "interval start"),
                           ("lambda_hi", float, 0.66, "interval end")])
def cmd_trans_measure(run: Run) -> dict:
    lo, hi = run["lambda_lo"], run["lambda_hi"]
    depth = max(_trans_depth(hi, r) for r in run["rho"])
    if run.cfg.get("i"):
        if not run.cfg.get("j"):
            raise InputError("--j is required with --i")
        pairs = [(SymbolWord.from_str(run["i"]), SymbolWord.from_str(run["j"]))]
        depth = min(depth, len(pairs[0][0]), len(pairs[0][1]))
    else:
        rng = run.rng()
        pairs = []
        for _ in range(run["pairs"]):
            a = SymbolWord.random(depth, rng)
            b = SymbolWord.random(depth, rng)
            if a[0] == b[0]:
                b = SymbolWord(b.bits ^ (1 << (depth - 1)), depth)
            pairs.append((a, b))
    rows = []
    for k, (a, b) in enumerate(pairs):
        for rho in run["rho"]:
            tr = transversality_measure(a, b, rho, lo, hi, depth)
            rows.append((k, rho, tr.measure, tr.ratio, tr.undecided))
    run.write_csv(".csv", ["pair", "rho", "measure", "ratio", "undecided"], rows)
    res = {"pairs": len(pairs), "depth": depth, "rho": run["rho"],
           "max_ratio": max(r[3] for r in rows), "interval": [lo, hi]}
    run.write_json(".json", res)
    return res


@command("trans doublezero", [("lambda_lo", float, 0.5, "interval start"),
                              ("lambda_hi", float, 0.66, "interval end"),
                              ("degree", int, 40, "number of random coefficients"),
                              ("delta", float, 1e-4, "derivative threshold"),
                              ("samples", int, 10_000, "number of sampled series")])
def cmd_doublezero(run: Run) -> dict:
    rep = double_zero_scan(run["lambda_lo"], run["lambda_hi"], run["degree"], run["delta"],
                           run["samples"], run["seed"])
    res = {"samples": rep.samples, "roots": rep.roots,
           "min_abs_derivative": _jsonable(rep.min_abs_derivative),
           "violations": rep.violations,
           "note": "sampled search: absence of violations is evidence, not proof"}
    run.write_json(".json", res)
    return res


# ---------------------------------------------------------------- parser and dispatch

COMMON = [("seed", int, 0, "random seed"), ("threads", int, 1, "worker threads"),
          ("out", str, None, "output directory")]


def _add_options(p: argparse.ArgumentParser, options: list) -> None:
    p.add_argument("--config", help="JSON file with flat keys (flags override it)")
    for opt in options + COMMON:
        key, typ, _default, help_ = opt[:4]
        kw = {"type": typ, "help": help_, "dest": key}
        if len(opt) > 4:
            kw["nargs"] = opt[4]
        p.add_argument("--" + key.replace("_", "-"), **kw)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="affine-targets", description=__doc__.splitlines()[0],
                  argument_default=argparse.SUPPRESS)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    groups: dict[str, Any] = {}
    for name, (options, fn) in COMMANDS.items():
        parts = name.split()
        if len(parts) == 1:
            p = sub.add_parser(name, help=fn.__doc__ or name, argument_default=argparse.SUPPRESS)
        else:
            if parts[0] not in groups:
                g = sub.add_parser(parts[0], argument_default=argparse.SUPPRESS)
                groups[parts[0]] = g.add_subparsers(dest="sub", required=True,
                                                    parser_class=_Parser)
            p = groups[parts[0]].add_parser(parts[1], argument_default=argparse.SUPPRESS)
        _add_options(p, options)
    rp = sub.add_parser("replay", help="re-run a manifest", argument_default=argparse.SUPPRESS)
    rp.add_argument("manifest")
    rp.add_argument("--out", dest="out", type=str)
    return top


def _coerce(options: list, cfg: dict) -> dict:
    known = {o[0]: o for o in options + COMMON}
    out = {}
    for key, val in cfg.items():
        if key not in known:
            raise InputError(f"unknown config key {key!r}")
        typ = known[key][1]
        if val is None:
            out[key] = None
        elif len(known[key]) > 4:
            vals = val if isinstance(val, list) else [val]
            out[key] = [typ(v) for v in vals]
        else:
            out[key] = typ(val)
    return out


def resolve(name: str, file_cfg: dict, flags: dict) -> dict:
    """Defaults, then config file, then flags."""
    options, _ = COMMANDS[name]
    cfg = {o[0]: o[2] for o in options + COMMON}
    file_cfg = {k: v for k, v in file_cfg.items() if k != "command"}
    try:
        cfg.update(_coerce(options, file_cfg))
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    cfg.update(flags)
    if cfg["threads"] < 1:
        raise InputError("--threads must be at least 1")
    return cfg


def run_command(name: str, cfg: dict, out: Optional[str] = None) -> tuple[dict, Run]:
    out_dir = out or cfg.get("out") or os.environ.get("OUTPUT_DIR") or "out"
    run = Run(name, cfg, Path(out_dir))
    _, fn = COMMANDS[name]
    t0 = time.perf_counter()
    result = fn(run)
    run.timings["total"] = time.perf_counter() - t0
    manifest = {
        "command": name,
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "versions": {"affine_targets": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "timings": run.timings,
        "outputs": dict(sorted(run.outputs.items())),
    }
    run.out.mkdir(parents=True, exist_ok=True)
    (run.out / f"{run.stem}.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result, run


def _fail(code: int, kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def main(argv: Optional[list] = None) -> int:
    try:
        ns = vars(build_parser().parse_args(argv))
        cmd = ns.pop("cmd")
        if cmd == "replay":
            try:
                man = json.loads(Path(ns["manifest"]).read_text(encoding="utf-8"))
                name, file_cfg = man["command"], man["config"]
            except (OSError, KeyError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read manifest: {exc}") from exc
            if name not in COMMANDS:
                raise InputError(f"unknown command {name!r} in manifest")
            cfg = resolve(name, file_cfg, {})
            result, _ = run_command(name, cfg, ns.get("out"))
        else:
            name = cmd if "sub" not in ns else f"{cmd} {ns.pop('sub')}"
            file_cfg = {}
            path = ns.pop("config", None)
            if path:
                try:
                    file_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError) as exc:
                    raise InputError(f"cannot read config: {exc}") from exc
                if not isinstance(file_cfg, dict):
                    raise InputError("config must be a JSON object")
            cfg = resolve(name, file_cfg, ns)
            result, _ = run_command(name, cfg)
    except WorkBudgetExceeded as exc:
        return _fail(EXIT_BUDGET, "work_budget_exceeded", str(exc), nodes=int(exc.nodes))
    except ConvergenceError as exc:
        return _fail(EXIT_CONVERGENCE, "no_convergence", str(exc), residual=exc.residual)
    except (InputError, ValueError) as exc:
        return _fail(EXIT_INVALID, "invalid_input", str(exc))
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
