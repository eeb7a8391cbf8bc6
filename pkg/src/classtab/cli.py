"""Command-line front end: ``classtab <command> [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CATALOG, builtin_field
from .construct import HField, class_prediction, stable_set
from .distance import BOUNDARY_MODES, MODES, boundary_distances
from .io import load_field
from .nn import ACTIVATIONS, load_net, save_net, train_narrow_deep, train_shallow, verify_net
from .reproduce import reproduce_paper
from .stability import (
    ball_stability_closed_form,
    class_stability,
    cube_stability_closed_form,
    matched_radius,
    volume_matched_ratio,
)

__all__ = ["main", "build_parser", "resolve_field", "parse_points"]


def resolve_field(spec):
    """A path to a grid/point-cloud file, or a catalog name such as ``cube:n=2,a=1``."""
    path = Path(spec)
    if path.is_file():
        return load_field(path)
    return builtin_field(spec)


def parse_points(text, dim):
    """``"0.5,0.5"`` or ``"0.1,0.2;0.3,0.4"`` -> (n, dim) array."""
    rows = [r for r in text.replace(" ", "").split(";") if r]
    X = np.array([[float(v) for v in r.split(",")] for r in rows], dtype=float)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"points must have {dim} coordinates, got {text!r}")
    return X


def _p_value(p):
    return "inf" if p == math.inf else p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _emit(payload, rows, args):
    """JSON writes ``payload``; CSV writes ``rows`` (list of flat dicts)."""
    if args.format == "csv":
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_dist(args):
    field = resolve_field(args.field)
    X = parse_points(args.point, field.dim)
    vals, eb, sat = boundary_distances(field, X, args.p, args.mode, args.boundary, seed=args.seed,
                                       samples_per_radius=args.samples or 4096)
    rows = [{"point": ",".join(map(repr, x.tolist())), "distance": float(v), "error_bound": float(e),
             "saturated": bool(s), "mode": args.mode, "boundary_mode": args.boundary, "p": _p_value(args.p)}
            for x, v, e, s in zip(X, vals, eb, sat)]
    _emit({"field": args.field, "seed": args.seed, "results": rows}, rows, args)
    return 0


def cmd_stability(args):
    field = resolve_field(args.field)
    est = class_stability(field, p=args.p, mode=args.mode, boundary_mode=args.boundary,
                          integrator=args.integrator, samples=args.samples, seed=args.seed)
    row = {"field": args.field, "seed": args.seed, **est.to_dict()}
    _emit(row, [row], args)
    return 0


def cmd_tables(args):
    rows = []
    for n in range(1, args.n_max + 1):
        if args.family == "cube":
            rows.append({"n": n, "a": args.a, "stability": cube_stability_closed_form(n, args.a)})
        elif args.family == "ball":
            rows.append({"n": n, "R": args.a, "stability": ball_stability_closed_form(n, args.a)})
        else:
            rows.append({"n": n, "ratio": volume_matched_ratio(n), "matched_radius": matched_radius(n, 1.0)})
    payload = {"family": args.family, "rows": rows}
    if args.family == "ratio":
        payload["monotone"] = bool(all(b["ratio"] > a["ratio"] for a, b in zip(rows, rows[1:])))
    _emit(payload, rows, args)
    return 0


def cmd_hfield(args):
    field = resolve_field(args.field)
    H = HField(field, args.p, args.boundary)
    X = parse_points(args.point, field.dim)
    h, lab = H.distances(X)
    V = H(X)
    rows = []
    for x, hv, v in zip(X, h, V):
        pred = "undefined (boundary)" if hv == 0 else int(H.slots[class_prediction(v) - 1])
        rows.append({"point": ",".join(map(repr, x.tolist())), "h": float(hv),
                     "H": ",".join(map(repr, v.tolist())), "prediction": pred})
    payload = {"field": args.field, "p": _p_value(H.p), "boundary_mode": args.boundary,
               "slots": H.mapping(), "error_bound": H.error_bound, "results": rows}
    _emit(payload, rows, args)
    return 0


def cmd_stableset(args):
    field = resolve_field(args.field)
    S = stable_set(field, args.eps, args.p, args.boundary, resolution=args.resolution)
    rows = [{**{f"x{i}": float(v) for i, v in enumerate(x)}, "label": int(lab)}
            for x, lab in zip(S.members, S.labels)]
    payload = {"epsilon": S.epsilon, "members": len(S), "grid_size": S.grid_size, "empty": S.empty,
               "provenance": S.provenance, "points": rows}
    _emit(payload, rows, args)
    return 0


def cmd_train(args):
    field = resolve_field(args.field)
    common = dict(p=args.p, epsilon=args.eps, budget=args.budget, seed=args.seed,
                  boundary_mode=args.boundary, resolution=args.resolution)
    if args.narrow_deep:
        net, rep = train_narrow_deep(field, activation=args.activation, depth_budget=args.depth_budget,
                                     **common)
    else:
        net, rep = train_shallow(field, activation=args.activation, width=args.width, **common)
    if args.out:
        save_net(net, args.out)
    text = json.dumps(_jsonable({"field": args.field, "seed": args.seed, "net": args.out,
                                 "report": rep.to_dict()}), indent=2, sort_keys=True)
    sys.stdout.write(text + "\n")
    return 0 if rep.success else 1


def cmd_verify(args):
    field = resolve_field(args.field)
    net = load_net(args.net)
    rep = verify_net(net, field, p=args.p, epsilon=args.eps, boundary_mode=args.boundary,
                     resolution=args.resolution)
    row = {"field": args.field, "net": args.net, **rep.to_dict()}
    _emit(row, [{k: v for k, v in row.items() if k != "slots"}], args)
    return 0 if rep.success else 1


def cmd_reproduce(args):
    report = reproduce_paper(seed=args.seed, out_path=args.out or "reproduce_report")
    s = report["summary"]
    print(f"{s['pass']} pass, {s['documented_deviation']} documented deviation, {s['fail']} fail "
          f"({report['runtime_s']:.1f} s)")
    if report["failed"]:
        print("failed: " + ", ".join(report["failed"]), file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- parser

def _p_arg(text):
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="classtab", description="Class stability of classification functions.")
    ap.add_argument("--version", action="version", version=f"classtab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, field=True, mode=True):
        if field:
            sp.add_argument("--field", required=True,
                            help="grid/point-cloud file or catalog name (" + ", ".join(sorted(CATALOG)) + ")")
        sp.add_argument("--p", type=_p_arg, default=2.0, help="norm exponent, >= 1 or 'inf'")
        if mode:
            sp.add_argument("--mode", choices=MODES, default="pointwise")
        sp.add_argument("--boundary", choices=BOUNDARY_MODES, default="extension")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("dist", help="distance to the decision boundary at given points")
    common(sp)
    sp.add_argument("--point", required=True, help="'x1,x2' or 'x1,x2;y1,y2'")
    sp.add_argument("--samples", type=int, help="ball samples per radius (measure mode)")
    sp.set_defaults(func=cmd_dist)

    sp = sub.add_parser("stability", help="class stability integral")
    common(sp)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--integrator", choices=("monte_carlo", "grid"), default="monte_carlo")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("tables", help="closed-form cube, ball and ratio tables")
    sp.add_argument("--family", choices=("cube", "ball", "ratio"), required=True)
    sp.add_argument("--n-max", type=int, default=8)
    sp.add_argument("--a", type=float, default=1.0, help="cube half-side or ball radius")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("hfield", help="H vector and prediction at given points")
    common(sp, mode=False)
    sp.add_argument("--point", required=True)
    sp.set_defaults(func=cmd_hfield)

    sp = sub.add_parser("stableset", help="grid points of the epsilon-stable set")
    common(sp, mode=False)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--resolution", type=float)
    sp.set_defaults(func=cmd_stableset)

    sp = sub.add_parser("train", help="fit a network to H and certify it")
    common(sp, mode=False)
    sp.add_argument("--eps", type=float, default=0.2)
    sp.add_argument("--width", type=int, default=64)
    sp.add_argument("--activation", choices=sorted(ACTIVATIONS), default="relu")
    sp.add_argument("--budget", type=int, default=2000)
    sp.add_argument("--resolution", type=float)
    sp.add_argument("--narrow-deep", action="store_true", help="width d+q+2 nets of growing depth")
    sp.add_argument("--depth-budget", type=int, default=16)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("verify", help="certify a saved network against a field")
    common(sp, mode=False)
    sp.add_argument("--net", required=True)
    sp.add_argument("--eps", type=float, default=0.2)
    sp.add_argument("--resolution", type=float)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("reproduce", help="run the full reproduction table")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--out", help="output stem; writes <stem>.json and <stem>.csv")
    sp.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"classtab {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
