"""Reproduction suite: runs every catalogued case and emits a JSON + CSV report."""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import child_rng
from .catalog import builtin_field
from .construct import HField, class_prediction, empirical_lipschitz, lipschitz_check_H, stable_set
from .distance import boundary_distances
from .fields import relabel, rescale_domain
from .nn import rounding_chain, train_narrow_deep, train_shallow
from .stability import (
    ball_stability_closed_form,
    class_stability,
    cube_stability_closed_form,
    volume_matched_ratio,
)

__all__ = ["reproduce_paper", "write_report", "CSV_COLUMNS", "strip_timing"]

PASS, FAIL, DEVIATION = "pass", "fail", "documented deviation"
TIMING_KEYS = ("runtime_s",)
CSV_COLUMNS = ["name", "paper_value", "computed", "uncertainty", "tolerance", "mode", "boundary_mode",
               "p", "status", "provenance", "runtime_s"]

# measure-mode midpoint count: odd, so no midpoint except 0 is a dyadic rational
MEASURE_GRID_CELLS = 401


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "nan" if v != v else "-inf")


def _case(name, computed, ok, *, paper=None, uncertainty=None, tolerance=None, mode=None,
          boundary_mode=None, p=None, provenance="paper", status=None, detail=None, runtime=0.0):
    return {
        "name": name,
        "paper_value": _num(paper),
        "computed": _num(computed) if not isinstance(computed, (bool, np.bool_)) else bool(computed),
        "uncertainty": _num(uncertainty),
        "tolerance": _num(tolerance),
        "mode": mode,
        "boundary_mode": boundary_mode,
        "p": "inf" if p == math.inf else p,
        "status": status or (PASS if ok else FAIL),
        "provenance": provenance,
        "detail": detail or {},
        "runtime_s": round(runtime, 3),
    }


class _Timer:
    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t


def _stability_cases(seed):
    out = []
    values = {}
    specs = [
        ("stability_f1_interior", "f1", 1.0, 1.0, 0.01, "paper"),
        ("stability_f4_interior", "f4", 1.25, 1.25, 0.01, "paper"),
        ("stability_f2_interior", "f2", 0.5, 0.375, 0.005, "derived-oracle"),
    ]
    for name, fname, paper, expect, tol, prov in specs:
        with _Timer() as t:
            est = class_stability(builtin_field(fname), p=1, mode="pointwise", boundary_mode="interior",
                                  samples=10 ** 6, seed=seed)
        values[fname] = est.value
        ok = abs(est.value - expect) <= tol
        status = None
        detail = {"samples": est.samples, "expected": expect}
        if fname == "f2":
            status = DEVIATION if ok else FAIL
            detail["note"] = ("literal definition integrates min-distance to {0, +-1/2} to 3/8; "
                              "the reference value 1/2 is not reproduced")
        out.append(_case(name, est.value, ok, paper=paper, uncertainty=est.std_error, tolerance=tol,
                         mode="pointwise", boundary_mode="interior", p=1, provenance=prov, status=status,
                         detail=detail, runtime=t.elapsed))
    gap = values["f4"] - values["f1"]
    out.append(_case("uneven_preference_f4_minus_f1", gap, abs(gap - 0.25) <= 0.02 and gap > 0,
                     paper=0.25, tolerance=0.02, mode="pointwise", boundary_mode="interior", p=1))

    with _Timer() as t:
        est = class_stability(builtin_field("f1"), p=1, boundary_mode="extension", samples=10 ** 6,
                              seed=seed)
    out.append(_case("stability_f1_extension", est.value, abs(est.value - 0.5) <= 0.01, uncertainty=est.std_error,
                     tolerance=0.01, mode="pointwise", boundary_mode="extension", p=1,
                     provenance="derived-oracle", detail={"expected": 0.5}, runtime=t.elapsed))

    f3 = builtin_field("f3-analog")
    with _Timer() as t:
        est = class_stability(f3, p=1, boundary_mode="interior", samples=10 ** 6, seed=seed)
    out.append(_case("stability_f3_analog_pointwise", est.value, est.value < 1e-3, paper=0.0,
                     uncertainty=est.std_error, tolerance=1e-3, mode="pointwise", boundary_mode="interior",
                     p=1, runtime=t.elapsed))
    with _Timer() as t:
        est = class_stability(f3, p=1, mode="measure", boundary_mode="interior", integrator="grid",
                              samples=MEASURE_GRID_CELLS, seed=seed)
    out.append(_case("stability_f3_analog_measure", est.value, abs(est.value - 1.0) <= 0.02, paper=1.0,
                     uncertainty=est.error_bound, tolerance=0.02, mode="measure", boundary_mode="interior",
                     p=1, detail={"integrator": "grid", "cells": est.samples}, runtime=t.elapsed))
    return out


def _closed_form_cases(seed):
    out = []
    with _Timer() as t:
        for a in (0.5, 1.0):
            for n in range(1, 6):
                exact = cube_stability_closed_form(n, a)
                est = class_stability(builtin_field(f"cube:n={n},a={a}"), p=2, boundary_mode="extension",
                                      seed=seed)
                rel = abs(est.value - exact) / exact
                ok = rel <= 0.01 and abs(est.value - exact) <= 3 * est.std_error
                out.append(_case(f"cube_n{n}_a{a:g}", est.value, ok, paper=exact, uncertainty=est.std_error,
                                 tolerance=0.01, mode="pointwise", boundary_mode="extension", p=2,
                                 detail={"relative_error": rel, "samples": est.samples}))
    cube_time = t.elapsed
    for n in range(1, 6):
        exact = ball_stability_closed_form(n, 1.0)
        with _Timer() as t:
            est = class_stability(builtin_field(f"ball:n={n},R=1"), p=2, boundary_mode="extension", seed=seed)
        rel = abs(est.value - exact) / exact
        ok = rel <= 0.02 and abs(est.value - exact) <= 3 * est.std_error
        out.append(_case(f"ball_n{n}_R1", est.value, ok, paper=exact, uncertainty=est.std_error,
                         tolerance=0.02, mode="pointwise", boundary_mode="extension", p=2,
                         detail={"relative_error": rel, "samples": est.samples}, runtime=t.elapsed))
    b1, c1 = ball_stability_closed_form(1, 1.0), cube_stability_closed_form(1, 1.0)
    out.append(_case("ball_cube_n1_consistency", b1, abs(b1 - 1) < 1e-12 and abs(c1 - 1) < 1e-12,
                     paper=1.0, tolerance=1e-12, provenance="derived-oracle", detail={"cube": c1}))
    out.append(_case("cube_family_under_30s", cube_time < 30.0, cube_time < 30.0, tolerance=30.0,
                     provenance="trivial", runtime=cube_time))
    ratios = [volume_matched_ratio(n) for n in range(1, 65)]
    for n in range(1, 9):
        out.append(_case(f"ratio_n{n}", ratios[n - 1], True, provenance="derived-oracle"))
    mono = bool(np.all(np.diff(ratios) > 0))
    out.append(_case("ratio_monotone_n1_64", mono, mono, provenance="paper",
                     detail={"ratio_n64": ratios[-1]}))
    return out


def _h_field_cases(seed):
    out = []
    for name in ("f1", "f4", "cube", "disk-in-square"):
        with _Timer() as t:
            ratio, pair = lipschitz_check_H(builtin_field(name), p=2, pair_count=10 ** 5, seed=seed)
        out.append(_case(f"H_lipschitz_{name}", ratio, ratio <= 1 + 1e-9, paper=1.0, tolerance=1e-9,
                         mode="pointwise", boundary_mode="extension", p=2, runtime=t.elapsed,
                         detail={"pairs": 10 ** 5}))
    for name in ("f1", "f2", "f3-analog", "f4", "H1", "H2", "H3", "f_l", "cube", "ball", "disk-in-square"):
        field = builtin_field(name)
        with _Timer() as t:
            H = HField(field, 2.0, "extension")
            X = field.domain.sample(child_rng(seed, 21), 10 ** 5)
            h, lab = H.distances(X)
            ok_pts = h > 10 * H.error_bound
            want = H.slot_of(lab[ok_pts]) + 1
            got = class_prediction(H(X[ok_pts])) if ok_pts.any() else np.zeros(0, int)
            frac = float(np.mean(got == want)) if ok_pts.any() else 1.0
        out.append(_case(f"H_argmax_{name}", frac, frac == 1.0, tolerance=0.0, mode="pointwise",
                         boundary_mode="extension", p=2, provenance="paper", runtime=t.elapsed,
                         detail={"eligible_points": int(ok_pts.sum()), "samples": 10 ** 5}))
    eps = 0.01
    for name, lower in (("H1", 1 / (2 * eps)), ("H2", 1000 / (2 * eps)), ("H3", 1 / (2 * eps * 1e-3))):
        with _Timer() as t:
            L = empirical_lipschitz(builtin_field(name), 10 ** 5, p=2, seed=seed)
        out.append(_case(f"empirical_lipschitz_{name}", L, L >= lower * (1 - 1e-12), paper=lower,
                         p=2, provenance="derived-oracle", runtime=t.elapsed,
                         detail={"urysohn_reference": math.sqrt(2.0) / (2 * eps)}))
    return out


def _network_cases(seed):
    out = []
    with _Timer() as t:
        _, rep = train_shallow(builtin_field("disk-in-square"), p=2, epsilon=0.1, width=512, budget=1000,
                               seed=seed, resolution=0.01)
    out.append(_case("shallow_net_disk", rep.sup_error, rep.success, tolerance=rep.target,
                     mode="pointwise", boundary_mode="extension", p=2, provenance="derived-oracle",
                     runtime=t.elapsed, detail=rep.to_dict()))
    with _Timer() as t:
        _, rep = train_narrow_deep(builtin_field("f1"), p=2, epsilon=0.1, depth_budget=16, seed=seed,
                                   resolution=0.01)
    out.append(_case("narrow_deep_net_f1", rep.sup_error, rep.success, tolerance=rep.target,
                     mode="pointwise", boundary_mode="extension", p=2, provenance="derived-oracle",
                     runtime=t.elapsed, detail=rep.to_dict()))
    with _Timer() as t:
        _, chain = rounding_chain(builtin_field("disk-in-square"), epsilon1=0.05, epsilon2=0.05, n_anchors=5,
                                  p=2, resolution=0.01, seed=seed)
    out.append(_case("rounding_chain_disk", chain.deficit_bound, chain.success, tolerance=0.05,
                     mode="pointwise", boundary_mode="extension", p=2, provenance="derived-oracle",
                     runtime=t.elapsed, detail=chain.to_dict()))
    return out


def _invariance_cases(seed):
    out = []
    f1 = builtin_field("f1")
    a = class_stability(f1, p=1, boundary_mode="interior", integrator="grid", samples=2000)
    b = class_stability(relabel(f1, {1: 7, 2: 3}), p=1, boundary_mode="interior", integrator="grid",
                        samples=2000)
    out.append(_case("relabel_invariance_grid", b.value - a.value, a.value == b.value, tolerance=0.0,
                     mode="pointwise", boundary_mode="interior", p=1, provenance="trivial"))
    for name, c in (("H1", 1e-3), ("f1", 0.5), ("f1", 2.0)):
        base = builtin_field(name)
        s0 = class_stability(base, p=2, boundary_mode="interior", samples=10 ** 5, seed=seed)
        s1 = class_stability(rescale_domain(base, c), p=2, boundary_mode="interior", samples=10 ** 5,
                             seed=seed)
        scale = c ** (base.dim + 1)
        diff = abs(s1.value - scale * s0.value)
        ok = diff <= 3 * math.hypot(s1.std_error, scale * s0.std_error)
        out.append(_case(f"scaling_{name}_c{c:g}", s1.value / s0.value, ok, paper=scale,
                         uncertainty=s1.std_error, mode="pointwise", boundary_mode="interior", p=2,
                         provenance="derived-oracle"))
    disk = builtin_field("disk-in-square")
    small = stable_set(disk, 0.05, 2, resolution=0.02)
    big = stable_set(disk, 0.1, 2, resolution=0.02)
    nested = big.key_set() <= small.key_set()
    out.append(_case("stable_set_nesting", nested, nested, provenance="trivial",
                     detail={"members_eps_0.05": len(small), "members_eps_0.1": len(big)}))
    ordered = True
    for name in ("f1", "f4", "disk-in-square"):
        field = builtin_field(name)
        X = field.domain.sample(child_rng(seed, 31), 2000)
        ext, _, _ = boundary_distances(field, X, 2, "pointwise", "extension")
        inn, _, _ = boundary_distances(field, X, 2, "pointwise", "interior")
        ordered &= bool(np.all(ext <= inn))
    out.append(_case("extension_le_interior", ordered, ordered, provenance="trivial"))
    ordered = True
    for name in ("f1", "f4", "disk-in-square"):
        field = builtin_field(name)
        X = field.domain.sample(child_rng(seed, 32), 64)
        pw, _, _ = boundary_distances(field, X, 2, "pointwise", "interior")
        ms, _, _ = boundary_distances(field, X, 2, "measure", "interior", samples_per_radius=1024, seed=seed)
        ordered &= bool(np.all(ms >= pw))
    out.append(_case("measure_ge_pointwise", ordered, ordered, provenance="trivial"))
    return out


def strip_timing(obj):
    """Copy of a report without its timing fields."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def reproduce_paper(seed=42, out_path=None, sections=None):
    """Run the reproduction table; returns the report dict and writes it if ``out_path`` is given.

    ``sections`` restricts the run to a subset of
    {"stability", "closed_forms", "h_field", "networks", "invariance"}.
    """
    runners = {
        "stability": _stability_cases,
        "closed_forms": _closed_form_cases,
        "h_field": _h_field_cases,
        "networks": _network_cases,
        "invariance": _invariance_cases,
    }
    chosen = list(runners) if sections is None else list(sections)
    start = time.perf_counter()
    cases = []
    for key in chosen:
        cases.extend(runners[key](int(seed)))
    failed = [c["name"] for c in cases if c["status"] == FAIL]
    report = {
        "seed": int(seed),
        "version": __version__,
        "sections": chosen,
        "summary": {
            "cases": len(cases),
            "pass": sum(c["status"] == PASS for c in cases),
            "fail": len(failed),
            "documented_deviation": sum(c["status"] == DEVIATION for c in cases),
        },
        "failed": failed,
        "cases": cases,
        "runtime_s": round(time.perf_counter() - start, 3),
    }
    if out_path is not None:
        write_report(report, out_path)
    return report


def write_report(report, out_path):
    """Write ``<stem>.json`` and ``<stem>.csv`` next to ``out_path``."""
    path = Path(out_path)
    stem = path.with_suffix("") if path.suffix in (".json", ".csv") else path
    stem.parent.mkdir(parents=True, exist_ok=True)
    json_path = stem.with_suffix(".json")
    csv_path = stem.with_suffix(".csv")
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in report["cases"]:
            w.writerow(["" if c[k] is None else (repr(c[k]) if isinstance(c[k], float) else c[k])
                        for k in CSV_COLUMNS])
    return json_path, csv_path
