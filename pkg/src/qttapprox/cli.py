"""Command line interface.

Exit codes: 0 success, 1 a checked inequality failed, 2 usage error,
3 run aborted early (partial output is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path

from . import experiments as ex
from . import splines as sp
from . import tt as ttm
from .complexity import measure

__all__ = ["main", "build_parser", "parse_int_list", "load_config"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3

# per-experiment defaults, overridden by the config file and then by flags
DEFAULTS = {
    "rate-linear": {"target": "sin", "levels": list(range(1, 7))},
    "rate-nonlinear": {"target": "power", "target_params": {"gamma": 0.3}, "s": 1.4,
                       "tau": 0.6, "levels": list(range(1, 10)),
                       "budgets": [2 ** k for k in range(3, 11)]},
    "p4-sweep": {},
    "inverse-demo": {"target": "sawtooth", "levels": list(range(0, 7)), "p": 1.0,
                     "quad_extra": 8},
    "bounds": {"levels": [1, 2, 3, 4], "budgets": [1, 2, 4, 8]},
}


def parse_int_list(text: str) -> list[int]:
    """Parse ``"1,2,5"``, ``"1..6"`` or ``"2^3..2^10"`` (comma-separated pieces may mix)."""
    out: list[int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        mpow = re.fullmatch(r"(\d+)\^(\d+)\.\.(\d+)\^(\d+)", piece)
        mrange = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", piece)
        mone = re.fullmatch(r"(\d+)\^(\d+)", piece)
        if mpow:
            base, lo, base2, hi = map(int, mpow.groups())
            if base != base2:
                raise argparse.ArgumentTypeError(f"mismatched bases in {piece!r}")
            out.extend(base ** k for k in range(lo, hi + 1))
        elif mrange:
            lo, hi = map(int, mrange.groups())
            out.extend(range(lo, hi + 1))
        elif mone:
            base, k = map(int, mone.groups())
            out.append(base ** k)
        else:
            try:
                out.append(int(piece))
            except ValueError:
                raise argparse.ArgumentTypeError(f"cannot parse {piece!r} as an integer list")
    return out


def load_config(path: str) -> dict:
    """Read a TOML or JSON configuration file into a dict."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        return json.loads(p.read_text(encoding="utf-8"))
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def _float(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _common(parser: argparse.ArgumentParser):
    g = parser.add_argument_group("common")
    g.add_argument("--b", type=int, help="base of the digit expansion")
    g.add_argument("--D", type=int, help="dimension")
    g.add_argument("--m", type=int, help="polynomial degree of the remainder block")
    g.add_argument("--mbar", type=int, help="spline degree")
    g.add_argument("--p", type=_float, help="Lebesgue exponent of the error")
    g.add_argument("--tau", type=_float, help="Besov integrability")
    g.add_argument("--q", type=_float, help="Besov fine index")
    g.add_argument("--s", type=float, help="declared smoothness")
    g.add_argument("--levels", type=parse_int_list, help="e.g. 1..6 or 1,2,4")
    g.add_argument("--budgets", type=parse_int_list, help="e.g. 2^3..2^10")
    g.add_argument("--seed", type=int)
    g.add_argument("--tol", type=float, help="relative truncation tolerance")
    g.add_argument("--zeta", type=float, help="threshold for compl_S")
    g.add_argument("--out", help="output path (CSV or JSON); stdout when omitted")
    g.add_argument("--reproducible", action="store_true", default=None,
                   help="omit the timestamp line")
    g.add_argument("--config", help="TOML or JSON file; flags override its values")
    g.add_argument("-v", "--verbose", action="store_true")


def _experiment_args(parser: argparse.ArgumentParser):
    g = parser.add_argument_group("experiment")
    g.add_argument("--target", choices=ex.TARGETS)
    g.add_argument("--target-param", action="append", default=[], metavar="KEY=VALUE",
                   help="target parameter, repeatable")
    g.add_argument("--kind", choices=("isotropic", "anisotropic", "mixed"))
    g.add_argument("--alpha", type=lambda t: [float(v) for v in t.split(",")])
    g.add_argument("--n-pairs", type=int, dest="n_pairs")
    g.add_argument("--depth", type=int)
    g.add_argument("--eps", type=float)
    g.add_argument("--quad-extra", type=int, dest="quad_extra")
    g.add_argument("--nodes-per-cell", type=int, dest="nodes_per_cell")
    g.add_argument("--L-delta", type=int, dest="L_delta")
    g.add_argument("--expect-slope", type=float, dest="expect_slope")
    g.add_argument("--slope-tol", type=float, dest="slope_tol")
    g.add_argument("--min-gap", type=float, dest="min_gap")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qttapprox",
                                 description="Tensorized spline approximation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode-spline", help="encode one (tensor-product) spline as a TT")
    _common(p)
    p.add_argument("--l", type=parse_int_list, required=True, help="spline level per dimension")
    p.add_argument("--shift", type=parse_int_list, required=True, help="shift per dimension")
    p.add_argument("--L", type=int, help="encoding level")
    p.add_argument("--L-delta", type=int, dest="L_delta")

    p = sub.add_parser("extend-level", help="re-express a TT at a higher level")
    _common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--L", type=int, required=True)

    p = sub.add_parser("ranks", help="representation and computed ranks of a TT")
    _common(p)
    p.add_argument("--in", dest="inp", required=True)

    p = sub.add_parser("complexity", help="complexity measures of a TT")
    _common(p)
    p.add_argument("--in", dest="inp", required=True)

    for name, hlp in (("rate-linear", "linear approximation rates"),
                      ("rate-nonlinear", "uniform versus adaptive rates"),
                      ("p4-sweep", "sum complexity over random pairs"),
                      ("inverse-demo", "sawtooth complexity and seminorm"),
                      ("bounds", "predicted bounds next to measured complexities")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        _experiment_args(p)

    p = sub.add_parser("tt-io", help="validate and rewrite a TT, or encode an expansion file")
    _common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--L", type=int, help="encoding level for expansion input")
    return ap


_FLAG_KEYS = ("b", "D", "m", "mbar", "p", "tau", "q", "s", "levels", "budgets", "seed", "tol",
              "zeta", "target", "kind", "alpha", "n_pairs", "depth", "eps", "quad_extra",
              "nodes_per_cell", "L_delta", "expect_slope", "slope_tol", "min_gap",
              "reproducible")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _experiment_config(args) -> ex.ExperimentConfig:
    data = dict(DEFAULTS.get(args.command, {}))
    if args.config:
        data.update(load_config(args.config))
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if args.target_param:
        tp = dict(data.get("target_params", {}))
        for item in args.target_param:
            k, _, v = item.partition("=")
            tp[k] = _parse_value(v)
        data["target_params"] = tp
    return ex.ExperimentConfig.from_mapping(data)


def _emit_text(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_tt(path: str) -> ttm.TTFunction:
    return ttm.from_json(Path(path).read_text(encoding="utf-8"))


def _run_experiment(args) -> int:
    cfg = _experiment_config(args)
    fn = {"rate-linear": ex.run_linear_rate, "rate-nonlinear": ex.run_nonlinear_rate,
          "p4-sweep": ex.run_p4_sweep, "inverse-demo": ex.run_inverse_demo,
          "bounds": ex.emit_bound_table}[args.command]
    try:
        result = fn(cfg)
    except ex.ExperimentAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        if exc.partial is not None:
            _emit_text(ex.write_csv(exc.partial, reproducible=cfg.reproducible), args.out)
        return EXIT_ABORT
    _emit_text(ex.write_csv(result, reproducible=cfg.reproducible), args.out)
    guard = result.metadata.get("max_level_guard")
    if guard:
        print(f"maximal level guard: rho = {guard['rho']:.4f}, depth = {guard['depth']}",
              file=sys.stderr)
    for msg in result.failures:
        print(f"violated: {msg}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_FAIL


def _tt_command(args) -> int:
    b = args.b or 2
    if args.command == "encode-spline":
        if len(args.l) != len(args.shift):
            raise ValueError("--l and --shift need the same number of entries")
        mbar = 1 if args.mbar is None else args.mbar
        m = mbar if args.m is None else args.m
        p = 2.0 if args.p is None else args.p
        ix = sp.SplineIndex(tuple(args.l), tuple(args.shift))
        f = sp.encode_tensor_product(ix, mbar, p, args.L, b, m, args.L_delta,
                                     tol=args.tol or 1e-13)
        _emit_text(ttm.to_json(f) + "\n", args.out)
        if args.out:
            print(json.dumps(measure(f, args.zeta or 0.0).as_dict()))
        return EXIT_OK
    if args.command == "extend-level":
        f = ttm.extend_level(_read_tt(args.inp), args.L)
        _emit_text(ttm.to_json(f) + "\n", args.out)
        return EXIT_OK
    if args.command == "ranks":
        f = _read_tt(args.inp)
        tol = ttm.DEFAULT_TOL if args.tol is None else args.tol
        info = {"representation": list(f.ranks),
                "computed": list(ttm.computed_ranks(f, tol)), "tol": tol}
        _emit_text(json.dumps(info) + "\n", args.out)
        return EXIT_OK
    if args.command == "complexity":
        f = _read_tt(args.inp)
        info = {**measure(f, args.zeta or 0.0).as_dict(), "zeta": args.zeta or 0.0}
        _emit_text(json.dumps(info) + "\n", args.out)
        return EXIT_OK
    if args.command == "tt-io":
        text = Path(args.inp).read_text(encoding="utf-8")
        data = json.loads(text)
        if "terms" in data:
            e = sp.NTermExpansion.from_json(text)
            m = e.mbar if args.m is None else args.m
            f = sp.encode_expansion(e, args.L, m, compress=True, tol=args.tol or 1e-13)
        else:
            f = ttm.from_json(text)
        _emit_text(ttm.to_json(f) + "\n", args.out)
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command in DEFAULTS:
            return _run_experiment(args)
        return _tt_command(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
