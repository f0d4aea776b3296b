"""Command-line front end: configuration, dispatch, and artifact emission.

Every run validates its JSON config against a per-command schema (unknown
fields are rejected), writes its artifacts into the output directory, and
records a manifest holding the canonical config, its hash, the effective
seed, and the package version.  Nothing time-dependent is written, so a
rerun with the same manifest produces byte-identical artifacts.

Exit codes: 0 success, 1 invariant failure (or any uncaught error),
2 config schema violation, 3 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("fpplab")
    except Exception:
        import fpplab

        return getattr(fpplab, "__version__", "unknown")


# ---------------------------------------------------------------------------
# config schemas
# ---------------------------------------------------------------------------

_FRACTION = {
    "type": "object",
    "properties": {
        "num": {"type": "integer"},
        "den": {"type": "integer", "exclusiveMinimum": 0},
    },
    "required": ["num", "den"],
    "additionalProperties": False,
}

_PROB = {"oneOf": [{"$ref": "#/$defs/fraction"},
                   {"type": "number", "minimum": 0, "maximum": 1}]}

_DISTRIBUTION = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "deterministic"},
                           "c": {"type": "number", "minimum": 0}},
            "required": ["kind", "c"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "two_point"},
                           "lo": {"type": "number", "minimum": 0},
                           "hi": {"type": "number", "minimum": 0},
                           "p_lo": _PROB},
            "required": ["kind", "lo", "hi", "p_lo"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "uniform"},
                           "a": {"type": "number", "minimum": 0},
                           "b": {"type": "number", "minimum": 0}},
            "required": ["kind", "a", "b"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "exponential"},
                           "rate": {"type": "number", "exclusiveMinimum": 0},
                           "shift": {"type": "number", "minimum": 0}},
            "required": ["kind", "rate"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "finite_support"},
                           "values": {"type": "array", "minItems": 1,
                                      "items": {"type": "number", "minimum": 0}},
                           "probs": {"type": "array", "minItems": 1,
                                     "items": _PROB}},
            "required": ["kind", "values", "probs"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "truncated"},
                           "base": {"$ref": "#/$defs/distribution"},
                           "cap": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["kind", "base", "cap"],
            "additionalProperties": False,
        },
    ]
}

_POINT = {"type": "array", "minItems": 1, "items": {"type": "number"}}
_INT_POINT = {"type": "array", "minItems": 1, "items": {"type": "integer"}}
_PATH_POINTS = {"type": "array", "minItems": 2, "items": _POINT}

_METRIC = {
    "type": "object",
    "properties": {
        "kind": {"const": "norm_plus_highways"},
        "weights": {"type": "array", "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0}},
        "access_points": {"type": "integer", "minimum": 2},
        "highways": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "points": _PATH_POINTS,
                    "profile": {"type": "array", "minItems": 1,
                                "items": {"type": "array", "minItems": 2,
                                          "maxItems": 2,
                                          "items": {"type": "number"}}},
                },
                "required": ["points", "profile"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["weights", "highways"],
    "additionalProperties": False,
}

_RATE_FN = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "analytic"},
                           "weights": {"type": "array", "minItems": 1,
                                       "items": {"type": "number",
                                                 "exclusiveMinimum": 0}},
                           "scale": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["kind", "weights"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "surface"},
                           "file": {"type": "string"}},
            "required": ["kind", "file"],
            "additionalProperties": False,
        },
    ]
}

_COMMON = {
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
    "budget": {"type": "integer", "minimum": 1},
}


def _schema(properties: dict, required: list) -> dict:
    return {
        "type": "object",
        "properties": {**properties, **_COMMON},
        "required": required,
        "additionalProperties": False,
        "$defs": {"distribution": _DISTRIBUTION, "fraction": _FRACTION},
    }


SCHEMAS = {
    "simulate": _schema(
        {
            "distribution": {"$ref": "#/$defs/distribution"},
            "dim": {"type": "integer", "minimum": 1, "maximum": 4},
            "n": {"type": "integer", "minimum": 1},
            "points": {"type": "array", "items": _INT_POINT},
            "truncation": {"type": "number", "exclusiveMinimum": 0},
            "geodesic_stats": {
                "type": "object",
                "properties": {
                    "b": {"type": "number", "exclusiveMinimum": 0},
                    "L_values": {"type": "array", "minItems": 1,
                                 "items": {"type": "number"}},
                    "n_random_pairs": {"type": "integer", "minimum": 0},
                },
                "required": ["b", "L_values"],
                "additionalProperties": False,
            },
        },
        ["distribution", "dim", "n"],
    ),
    "oracle": _schema(
        {
            "distribution": {"$ref": "#/$defs/distribution"},
            "dim": {"type": "integer", "minimum": 1, "maximum": 4},
            "n": {"type": "integer", "minimum": 1},
            "event": {
                "oneOf": [
                    {
                        "type": "object",
                        "properties": {"kind": {"const": "passage_time_at_most"},
                                       "x": _INT_POINT, "y": _INT_POINT,
                                       "t": {"type": "number"}},
                        "required": ["kind", "x", "y", "t"],
                        "additionalProperties": False,
                    },
                    {
                        "type": "object",
                        "properties": {"kind": {"const": "ld_lower"},
                                       "metric": _METRIC,
                                       "eps": {"type": "number", "minimum": 0}},
                        "required": ["kind", "metric", "eps"],
                        "additionalProperties": False,
                    },
                    {
                        "type": "object",
                        "properties": {"kind": {"const": "hub"},
                                       "x": _INT_POINT,
                                       "kappa": {"type": "number",
                                                 "exclusiveMinimum": 0}},
                        "required": ["kind", "x", "kappa"],
                        "additionalProperties": False,
                    },
                ]
            },
            "mc_samples": {"type": "integer", "minimum": 0},
            "fkg": {
                "type": "object",
                "properties": {"x1": _INT_POINT, "x2": _INT_POINT,
                               "t1": {"type": "number"},
                               "t2": {"type": "number"}},
                "required": ["x1", "x2", "t1", "t2"],
                "additionalProperties": False,
            },
        },
        ["distribution", "dim", "n", "event"],
    ),
    "rate": _schema(
        {
            "distribution": {"$ref": "#/$defs/distribution"},
            "x": _INT_POINT,
            "zeta_grid": {"type": "array", "minItems": 1,
                          "items": {"type": "number", "exclusiveMinimum": 0}},
            "zeta_count": {"type": "integer", "minimum": 2},
            "n_ladder": {"type": "array", "minItems": 1,
                         "items": {"type": "integer", "minimum": 1}},
            "samples": {"type": "integer", "minimum": 1},
            "method": {"enum": ["auto", "exact", "mc"]},
            "time_constant": {
                "type": "object",
                "properties": {"n_ladder": {"type": "array", "minItems": 2,
                                            "items": {"type": "integer",
                                                      "minimum": 1}},
                               "samples": {"type": "integer", "minimum": 1}},
                "required": ["n_ladder"],
                "additionalProperties": False,
            },
            "zero_tol": {"type": "number", "exclusiveMinimum": 0},
        },
        ["distribution", "x", "n_ladder"],
    ),
    "highways": _schema(
        {
            "metric": _METRIC,
            "mode": {"enum": ["own", "build"]},
            "n_geodesics": {"type": "integer", "minimum": 1},
            "tol": {"type": "number", "exclusiveMinimum": 0},
            "initial_access": {"type": "integer", "minimum": 2},
            "seed_pairs": {"type": "array",
                           "items": {"type": "array", "minItems": 2,
                                     "maxItems": 2, "items": _POINT}},
        },
        ["metric"],
    ),
    "functional": _schema(
        {
            "metric": _METRIC,
            "rate": _RATE_FN,
            "order": {"type": "integer", "minimum": 1},
            "family": {"type": "array", "minItems": 1, "items": _PATH_POINTS},
            "probe_metric": _METRIC,
        },
        ["metric", "rate"],
    ),
    "ld-trend": _schema(
        {
            "metric": _METRIC,
            "distribution": {"$ref": "#/$defs/distribution"},
            "eps": {"type": "number", "minimum": 0},
            "n_ladder": {"type": "array", "minItems": 1,
                         "items": {"type": "integer", "minimum": 1}},
            "samples": {"type": "integer", "minimum": 1},
            "method": {"enum": ["auto", "exact", "mc"]},
            "rate": _RATE_FN,
        },
        ["metric", "distribution", "eps", "n_ladder"],
    ),
    "selftest": _schema({}, []),
}

_TWO_POINT = {"kind": "two_point", "lo": 1.0, "hi": 2.0,
              "p_lo": {"num": 1, "den": 2}}
_DIAGONAL_METRIC = {
    "kind": "norm_plus_highways",
    "weights": [1.0, 1.0],
    "highways": [{"points": [[0.0, 0.0], [1.0, 1.0]],
                  "profile": [[2.0, 0.5]]}],
}

DEFAULT_CONFIGS = {
    "simulate": {"distribution": _TWO_POINT, "dim": 2, "n": 8, "seed": 0,
                 "truncation": 2.0,
                 "geodesic_stats": {"b": 2.0, "L_values": [1.0, 1.5]}},
    "oracle": {"distribution": _TWO_POINT, "dim": 2, "n": 1,
               "event": {"kind": "passage_time_at_most",
                         "x": [0, 0], "y": [1, 1], "t": 2.0},
               "mc_samples": 400, "seed": 0},
    "rate": {"distribution": _TWO_POINT, "x": [1, 0],
             "zeta_grid": [1.0, 1.2, 1.4, 1.7, 2.0],
             "n_ladder": [1, 2], "samples": 200, "seed": 0,
             "time_constant": {"n_ladder": [4, 8], "samples": 200}},
    "highways": {"metric": _DIAGONAL_METRIC, "mode": "build",
                 "n_geodesics": 6, "tol": 1e-6, "seed": 0,
                 "seed_pairs": [[[0.0, 0.0], [1.0, 1.0]]]},
    "functional": {"metric": _DIAGONAL_METRIC,
                   "rate": {"kind": "analytic", "weights": [1.0, 1.0],
                            "scale": 1.0}},
    "ld-trend": {"metric": {"kind": "norm_plus_highways",
                            "weights": [0.9, 0.9], "highways": []},
                 "distribution": _TWO_POINT, "eps": 1.5,
                 "n_ladder": [1, 2], "samples": 200, "seed": 0,
                 "rate": {"kind": "analytic", "weights": [1.0, 1.0]}},
    "selftest": {},
}


# ---------------------------------------------------------------------------
# emission helpers
# ---------------------------------------------------------------------------


def _canonical(cfg) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return {"num": obj.numerator, "den": obj.denominator}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_manifest(outdir: Path, command: str, cfg: dict, artifacts: list) -> None:
    canon = _canonical(cfg)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package": "fpplab",
        "version": _package_version(),
        "command": command,
        "config": json.loads(canon),
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "seed": cfg.get("seed"),
        "threads": cfg.get("threads", 1),
        "budget": cfg.get("budget"),
        "artifacts": sorted(artifacts),
    }
    _write_json(outdir / "manifest.json", manifest)


def _metric_from(cfg_metric: dict):
    from fpplab.geometry import NormPlusHighways

    return NormPlusHighways.from_json(cfg_metric)


def _rate_fn_from(rec: dict, outdir: Path):
    from fpplab.functional import AnalyticRate, SurfaceRate

    if rec["kind"] == "analytic":
        return AnalyticRate(rec["weights"], scale=rec.get("scale", 1.0))
    from fpplab.elementary_rate import RateSurface

    path = Path(rec["file"])
    if not path.is_absolute():
        path = outdir / path
    with open(path) as fh:
        return SurfaceRate(RateSurface.from_json(json.load(fh)))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_simulate(cfg: dict, outdir: Path) -> list:
    from fpplab.model import EdgeDistribution, LatticeBox, sample_weights
    from fpplab.oracle import CapExceededError
    from fpplab.passage_time import (geodesic_length_stats, rescaled_metric,
                                     uniform_gap)

    dist = EdgeDistribution.from_spec(cfg["distribution"])
    box = LatticeBox(dimension=cfg["dim"], side=cfg["n"])
    seed = cfg.get("seed", 0)
    budget = cfg.get("budget")
    if budget is not None and cfg.get("points") is None and box.n_vertices ** 2 > budget:
        raise CapExceededError(box.n_vertices ** 2, budget)
    field = sample_weights(dist, box, seed)
    pts = cfg.get("points")
    metric = rescaled_metric(field, points=None if pts is None else np.asarray(pts))
    metric.write_csv(outdir / "metric.csv")
    report = {
        "dim": cfg["dim"], "n": cfg["n"], "seed": seed,
        "distribution": dist.spec(), "n_edges": box.n_edges,
        "n_grid_points": len(metric.points),
        "max_rescaled_value": float(np.max(metric.matrix)),
    }
    if "truncation" in cfg:
        gap = uniform_gap(field, cfg["truncation"], seed=seed)
        report["uniform_gap"] = {"gap": gap.gap, "bound": gap.bound,
                                 "n_pairs": gap.n_pairs,
                                 "within_bound": gap.within_bound}
    if "geodesic_stats" in cfg:
        gs = cfg["geodesic_stats"]
        report["geodesic_stats"] = geodesic_length_stats(
            field, gs["b"], gs["L_values"],
            n_random_pairs=gs.get("n_random_pairs", 8), seed=seed)
    _write_json(outdir / "simulate.json", report)
    print(f"simulate: wrote metric.csv ({len(metric.points)} grid points), "
          f"simulate.json")
    return ["metric.csv", "simulate.json"]


def _cmd_oracle(cfg: dict, outdir: Path) -> list:
    from fpplab.model import EdgeDistribution, LatticeBox
    from fpplab.oracle import (EventSpec, exact_event_probability,
                               fkg_supermultiplicativity_check,
                               monte_carlo_event_probability)

    dist = EdgeDistribution.from_spec(cfg["distribution"])
    box = LatticeBox(dimension=cfg["dim"], side=cfg["n"])
    seed = cfg.get("seed", 0)
    budget = cfg.get("budget", 1 << 24)
    ev = cfg["event"]
    if ev["kind"] == "passage_time_at_most":
        event = EventSpec.passage_time_at_most(ev["x"], ev["y"], ev["t"])
    elif ev["kind"] == "ld_lower":
        metric = _metric_from(ev["metric"])
        event = EventSpec.ld_lower(lambda x, y: float(metric.evaluate(x, y)),
                                   ev["eps"])
    else:
        event = EventSpec.hub(ev["x"], ev["kappa"])

    report = {"event": event.name, "dim": cfg["dim"], "n": cfg["n"],
              "distribution": dist.spec(), "p_exact": None, "p_mc": None,
              "ci": None, "seed": seed}
    if dist.is_finite_support:
        res = exact_event_probability(event, dist, box, cap=budget)
        report["p_exact"] = res.p
        report["n_configs"] = res.n_configs
    mc_samples = cfg.get("mc_samples", 0)
    if mc_samples > 0:
        mc = monte_carlo_event_probability(event, dist, box, mc_samples,
                                           seed=seed)
        report["p_mc"] = mc.p_hat
        report["ci"] = [mc.ci_low, mc.ci_high]
        report["mc_samples"] = mc_samples
    if "fkg" in cfg:
        fk = cfg["fkg"]
        rep = fkg_supermultiplicativity_check(dist, box, fk["x1"], fk["x2"],
                                              fk["t1"], fk["t2"], cap=budget)
        report["fkg"] = {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack,
                         "slack_nonnegative": rep.slack >= 0}
    _write_json(outdir / "oracle.json", report)
    bits = []
    if report["p_exact"] is not None:
        bits.append(f"p_exact = {report['p_exact']}")
    if report["p_mc"] is not None:
        bits.append(f"p_mc = {report['p_mc']:.6g}")
    print(f"oracle: {event.name}: " + ", ".join(bits))
    return ["oracle.json"]


def _cmd_rate(cfg: dict, outdir: Path) -> list:
    from fpplab.elementary_rate import (default_zeta_grid, estimate_rate_point,
                                        estimate_time_constant, extend_surface,
                                        fekete_envelope, zero_set_check)
    from fpplab.model import EdgeDistribution

    dist = EdgeDistribution.from_spec(cfg["distribution"])
    x = cfg["x"]
    seed = cfg.get("seed", 0)
    threads = cfg.get("threads", 1)
    samples = cfg.get("samples", 200)
    method = cfg.get("method", "auto")
    budget = cfg.get("budget", 1 << 13)
    zetas = cfg.get("zeta_grid")
    if zetas is None:
        zetas = default_zeta_grid(dist, x, count=cfg.get("zeta_count", 5))
    ladder = sorted(cfg["n_ladder"])

    root = np.random.SeedSequence(seed)
    children = iter(root.spawn(len(zetas) * len(ladder)))
    points = []
    envelope = []
    for z in zetas:
        per_z = []
        for n in ladder:
            sub = int(next(children).generate_state(1)[0])
            per_z.append(estimate_rate_point(
                dist, x, z, n, samples=samples, seed=sub, method=method,
                enum_cap=budget, threads=threads))
        points.extend(per_z)
        envelope.append(fekete_envelope(per_z) if len(per_z) > 1 else per_z[0])

    surface = extend_surface(envelope)
    surface.check_invariants()

    rows = [[
        "_".join(str(v) for v in p.x), _fmt(p.zeta), p.n, _fmt(p.estimate),
        _fmt(p.ci[0]), "inf" if math.isinf(p.ci[1]) else _fmt(p.ci[1]),
        p.method, p.censored, _fmt(p.p_hat), p.samples or "", p.hits if p.hits is not None else "",
        p.seed if p.seed is not None else "",
    ] for p in points]
    _write_csv(outdir / "rate_points.csv",
               ["x", "zeta", "n", "estimate", "ci_lo", "ci_hi", "method",
                "censored", "p_mc", "samples", "hits", "seed"], rows)
    surface.write_csv(outdir / "surface.csv")
    _write_json(outdir / "surface.json", surface.to_json())
    artifacts = ["rate_points.csv", "surface.csv", "surface.json"]

    report = {"x": list(x), "zeta_grid": [float(z) for z in zetas],
              "n_ladder": ladder, "n_points": len(points), "seed": seed,
              "invariants_ok": True}
    if "time_constant" in cfg:
        tc_cfg = cfg["time_constant"]
        tc = estimate_time_constant(dist, x, tc_cfg["n_ladder"],
                                    samples=tc_cfg.get("samples", 200),
                                    seed=seed, threads=threads)
        zs = zero_set_check(surface, tc, zero_tol=cfg.get("zero_tol", 0.05))
        report["time_constant"] = tc.to_json()
        report["zero_set"] = {"zero_ok": zs.zero_ok,
                              "positive_ok": zs.positive_ok,
                              "trend_ok": zs.trend_ok,
                              "trend_slope": zs.trend_slope,
                              "passed": zs.passed()}
    _write_json(outdir / "rate.json", report)
    artifacts.append("rate.json")
    print(f"rate: {len(points)} points on {len(zetas)} speeds, surface "
          f"invariants ok; wrote rate_points.csv, surface.csv, surface.json, rate.json")
    return artifacts


def _cmd_highways(cfg: dict, outdir: Path) -> list:
    from fpplab.geometry import build_highway_network, network_from_highways

    metric = _metric_from(cfg["metric"])
    seed = cfg.get("seed", 0)
    mode = cfg.get("mode", "build")
    if mode == "own":
        net = network_from_highways(metric)
    else:
        seed_pairs = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
                      for a, b in cfg.get("seed_pairs", [])]
        net = build_highway_network(
            metric, n_geodesics=cfg.get("n_geodesics", 12),
            tol=cfg.get("tol", 1e-6), seed=seed, seed_pairs=seed_pairs,
            initial_access=cfg.get("initial_access", 17))
    _write_json(outdir / "network.json", net.to_json())
    rows = [[d["k"], d["origin"], _fmt(d["sup_distance"]), d["n_pieces"], seed]
            for d in net.diagnostics]
    _write_csv(outdir / "diagnostics.csv",
               ["k", "origin", "sup_distance", "n_pieces", "seed"], rows)
    last = net.diagnostics[-1]["sup_distance"] if net.diagnostics else 0.0
    print(f"highways: {len(net.paths)} pieces, converged = {net.converged}, "
          f"final sup distance = {last:.3g}")
    return ["network.json", "diagnostics.csv"]


def _cmd_functional(cfg: dict, outdir: Path) -> list:
    from fpplab.functional import (PathFamily, functional_report,
                                   strict_monotonicity_probe)
    from fpplab.geometry import LipschitzPath, network_from_highways

    metric = _metric_from(cfg["metric"])
    J = _rate_fn_from(cfg["rate"], outdir)
    threads = cfg.get("threads", 1)
    net = network_from_highways(metric)
    family = None
    if "family" in cfg:
        family = PathFamily([LipschitzPath(np.asarray(p, dtype=float))
                             for p in cfg["family"]])
    rep = functional_report(metric, net, J, family=family,
                            order=cfg.get("order", 8), threads=threads)
    out = rep.to_json()
    if "probe_metric" in cfg:
        smaller = _metric_from(cfg["probe_metric"])
        probe = strict_monotonicity_probe(smaller, metric, J,
                                          seed=cfg.get("seed", 0))
        out["monotonicity_probe"] = probe.to_json()
    _write_json(outdir / "functional.json", out)

    width = max(len(f"{v:.12g}") for v in
                (rep.geodesic_sum, rep.intrinsic, rep.sup_bound))
    print("expression        " + "value".rjust(width))
    print("geodesic sum      " + f"{rep.geodesic_sum:.12g}".rjust(width))
    print("intrinsic         " + f"{rep.intrinsic:.12g}".rjust(width))
    print("sup lower bound   " + f"{rep.sup_bound:.12g}".rjust(width))
    print(f"delta intrinsic   {rep.delta_intrinsic:.3g}")
    print(f"delta sup         {rep.delta_sup:.3g}")
    if "monotonicity_probe" in out:
        p = out["monotonicity_probe"]
        print(f"probe: smaller metric {p['value_smaller_metric']:.12g} > "
              f"larger metric {p['value_larger_metric']:.12g}")
    return ["functional.json"]


def _cmd_ld_trend(cfg: dict, outdir: Path) -> list:
    from fpplab.functional import empirical_ld_trend, functional_geodesic_sum
    from fpplab.geometry import network_from_highways
    from fpplab.model import EdgeDistribution

    metric = _metric_from(cfg["metric"])
    dist = EdgeDistribution.from_spec(cfg["distribution"])
    fv = None
    if "rate" in cfg:
        J = _rate_fn_from(cfg["rate"], outdir)
        fv = functional_geodesic_sum(metric, network_from_highways(metric), J)
    table = empirical_ld_trend(
        metric, dist, cfg["eps"], cfg["n_ladder"],
        samples=cfg.get("samples", 200), seed=cfg.get("seed", 0),
        method=cfg.get("method", "auto"), enum_cap=cfg.get("budget", 1 << 13),
        functional_value=fv)
    _write_json(outdir / "ld_trend.json", table.to_json())
    rows = [[
        r.n, r.method, _fmt(r.p),
        "" if r.p_exact is None else r.p_exact.numerator,
        "" if r.p_exact is None else r.p_exact.denominator,
        "inf" if r.rate is not None and math.isinf(r.rate) else _fmt(r.rate),
        "" if r.ci is None else _fmt(r.ci[0]),
        "" if r.ci is None else ("inf" if math.isinf(r.ci[1]) else _fmt(r.ci[1])),
        r.censored, r.samples, r.hits if r.hits is not None else "", r.seed,
    ] for r in table.rows]
    _write_csv(outdir / "ld_trend.csv",
               ["n", "method", "p", "p_num", "p_den", "rate", "rate_ci_lo",
                "rate_ci_hi", "censored", "samples", "hits", "seed"], rows)
    shown = ", ".join(
        f"n={r.n}: " + ("censored" if r.censored else
                        ("inf" if math.isinf(r.rate) else f"{r.rate:.4f}"))
        for r in table.rows)
    tail = f" (functional value {fv:.6g})" if fv is not None else ""
    print(f"ld-trend: rates {shown}{tail}")
    return ["ld_trend.json", "ld_trend.csv"]


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def _selftest_checks():
    """Fast cross-module invariant suite; yields (name, passed, detail)."""
    from fpplab.elementary_rate import (RatePoint, estimate_rate_point,
                                        extend_surface, fekete_envelope)
    from fpplab.functional import AnalyticRate, functional_report
    from fpplab.geometry import (NormPlusHighways, build_highway_network,
                                 network_from_highways)
    from fpplab.model import EdgeDistribution, LatticeBox, sample_weights
    from fpplab.oracle import (EventSpec, chernoff_upper_tail, crude_lower_bound,
                               exact_event_probability,
                               fkg_supermultiplicativity_check,
                               monte_carlo_event_probability)
    from fpplab.passage_time import disjoint_paths, hub_check, uniform_gap

    tp = EdgeDistribution.two_point(1, 2, Fraction(1, 2))

    def deterministic_exactness():
        from fpplab.passage_time import rescaled_metric

        box = LatticeBox(dimension=2, side=8)
        field = sample_weights(EdgeDistribution.deterministic(1.0), box, 0)
        m = rescaled_metric(field)
        pts = m.points.astype(float)
        want = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2) / box.side
        ok = np.array_equal(m.matrix, want)
        return ok, "rescaled metric equals the l1 pseudometric exactly"

    def oracle_half():
        box = LatticeBox(dimension=2, side=1)
        ev = EventSpec.passage_time_at_most([0, 0], [1, 0], 1.0)
        p = exact_event_probability(ev, tp, box).p
        return p == Fraction(1, 2), f"p = {p}"

    def oracle_seven_sixteenths():
        box = LatticeBox(dimension=2, side=1)
        ev = EventSpec.passage_time_at_most([0, 0], [1, 1], 2.0)
        p = exact_event_probability(ev, tp, box).p
        return p == Fraction(7, 16), f"p = {p}"

    def mc_within_3se():
        box = LatticeBox(dimension=2, side=1)
        ev = EventSpec.passage_time_at_most([0, 0], [1, 1], 2.0)
        mc = monte_carlo_event_probability(ev, tp, box, 400, seed=0)
        p = 7.0 / 16.0
        se = math.sqrt(p * (1 - p) / 400)
        return abs(mc.p_hat - p) <= 3 * se, f"|{mc.p_hat} - {p}| vs 3se = {3 * se:.4f}"

    def fkg_slack():
        box = LatticeBox(dimension=2, side=2)
        rep = fkg_supermultiplicativity_check(tp, box, [1, 0], [1, 0], 1.5, 1.5)
        return rep.slack >= 0, f"slack = {rep.slack}"

    def crude_bound():
        # the bound's threshold is per edge; it bounds P(T <= t * l1)
        box = LatticeBox(dimension=2, side=2)
        ev = EventSpec.passage_time_at_most([0, 0], [2, 0], 2.5)
        p = exact_event_probability(ev, tp, box).p
        lb = crude_lower_bound(tp, [0, 0], [2, 0], 1.25)
        return lb <= p, f"bound {lb} vs exact {p}"

    def gap_bound():
        for n in (4, 8):
            box = LatticeBox(dimension=2, side=n)
            field = sample_weights(tp, box, 7)
            rep = uniform_gap(field, 1.0, seed=3)
            if not rep.within_bound:
                return False, f"gap {rep.gap} exceeds bound {rep.bound} at n={n}"
        return True, "gap within 2bd/n at n = 4, 8"

    def disjoint_paths_small():
        box = LatticeBox(dimension=2, side=2)
        coords = box.all_vertex_coords()
        for x in coords:
            for y in coords:
                if np.array_equal(x, y):
                    continue
                paths = disjoint_paths(box, x, y)
                l1 = int(np.abs(y - x).sum())
                if len(paths) != 2:
                    return False, f"{x}->{y}: {len(paths)} paths"
                interiors = []
                for p in paths:
                    if p.hops not in (l1, l1 + 2):
                        return False, f"{x}->{y}: bad length {p.hops}"
                    if np.any(p.vertices < 0) or np.any(p.vertices > 2):
                        return False, f"{x}->{y}: leaves the box"
                    interiors.append(set(map(tuple, p.vertices[1:-1])))
                if interiors[0] & interiors[1]:
                    return False, f"{x}->{y}: interior overlap"
        return True, "all ordered pairs of the side-2 box"

    def highway_diagonal():
        D = NormPlusHighways([1, 1], [([[0, 0], [1, 1]], 0.5)])
        if D.evaluate([0, 0], [1, 1]) != 1.0:
            return False, "diagonal distance is not 1.0"
        net = network_from_highways(D)
        rep = functional_report(D, net, AnalyticRate([1.0, 1.0]))
        ok = (rep.geodesic_sum == 1.0 and abs(rep.intrinsic - 1.0) < 1e-9
              and abs(rep.sup_bound - 1.0) < 1e-9)
        return ok, (f"three expressions: {rep.geodesic_sum}, "
                    f"{rep.intrinsic}, {rep.sup_bound}")

    def network_build():
        # seed the designated geodesic so the endpoint segments are covered
        D = NormPlusHighways([1, 1], [([[0, 0], [1, 1]], 0.5)])
        net = build_highway_network(
            D, n_geodesics=6, tol=1e-6, seed=0,
            seed_pairs=[(np.zeros(2), np.ones(2))])
        sups = [d["sup_distance"] for d in net.diagnostics]
        mono = all(a >= b - 1e-12 for a, b in zip(sups, sups[1:]))
        return (net.converged and mono and sups[-1] <= 1e-3,
                f"diagnostics {['%.2g' % s for s in sups]}")

    def rate_exact_log2():
        pt = estimate_rate_point(tp, [1, 0], 1.0, 1)
        ok = (pt.method == "exact-oracle" and pt.p_exact == Fraction(1, 2)
              and abs(pt.estimate - math.log(2)) < 1e-12)
        return ok, f"rate = {pt.estimate:.6f}, p = {pt.p_exact}"

    def fekete_pick():
        pts = [RatePoint(x=(1, 0), zeta=1.0, n=n, estimate=v, ci=(v, v),
                         method="exact-oracle", censored=False, p_hat=None,
                         p_exact=None, samples=None, hits=None, seed=None)
               for n, v in [(1, 0.9), (2, 0.7), (3, 0.72)]]
        env = fekete_envelope(pts)
        return env.estimate == 0.7, f"envelope = {env.estimate}"

    def surface_invariants():
        pts = [estimate_rate_point(tp, [1, 0], z, 1)
               for z in (1.0, 1.2, 1.5, 1.8, 2.0)]
        surf = extend_surface(pts)
        surf.check_invariants()
        return True, f"{len(surf.cells)} cells pass the structural checks"

    def chernoff_empirical():
        lam, eps, n, hops = 0.8, 1.8, 4, 4
        bound = chernoff_upper_tail(tp, lam, eps, n, hops)
        rng = np.random.default_rng(11)
        sums = tp.sample_from_uniforms(rng.uniform(size=(2000, hops))).sum(axis=1)
        freq = float(np.mean(sums >= eps * n))
        return freq <= bound, f"freq {freq:.4f} <= bound {bound:.4f}"

    def hub_deterministic():
        box = LatticeBox(dimension=2, side=4)
        field = sample_weights(EdgeDistribution.deterministic(1.0), box, 0)
        rep = hub_check(field, [2, 2], 1.0)
        return rep.is_hub, f"center hub slack {rep.worst_time_slack:.3g}"

    def rng_determinism():
        box = LatticeBox(dimension=2, side=6)
        a = sample_weights(tp, box, 5).weights
        b = sample_weights(tp, box, 5).weights
        c = sample_weights(tp, box, 6).weights
        return (np.array_equal(a, b) and not np.array_equal(a, c),
                "same seed agrees, different seed differs")

    return [
        ("deterministic-metric-exact", deterministic_exactness),
        ("oracle-p-half", oracle_half),
        ("oracle-p-seven-sixteenths", oracle_seven_sixteenths),
        ("mc-within-3se", mc_within_3se),
        ("fkg-slack-nonnegative", fkg_slack),
        ("crude-bound-below-exact", crude_bound),
        ("truncation-gap-bound", gap_bound),
        ("disjoint-paths-exhaustive-small", disjoint_paths_small),
        ("highway-diagonal-fixture", highway_diagonal),
        ("network-build-converges", network_build),
        ("rate-exact-log2", rate_exact_log2),
        ("fekete-envelope-pick", fekete_pick),
        ("surface-structural-invariants", surface_invariants),
        ("chernoff-bound-respected", chernoff_empirical),
        ("hub-deterministic-center", hub_deterministic),
        ("weight-rng-deterministic", rng_determinism),
    ]


def _cmd_selftest(cfg: dict, outdir: Path) -> tuple[list, int]:
    results = []
    failed = 0
    for name, fn in _selftest_checks():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": bool(ok), "detail": detail})
        if not ok:
            failed += 1
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    _write_json(outdir / "selftest.json",
                {"results": results, "n_failed": failed,
                 "n_checks": len(results)})
    print(f"selftest: {len(results) - failed}/{len(results)} checks passed")
    return ["selftest.json"], failed


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpplab",
        description="First-passage percolation large-deviations laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_by_cmd = {
        "simulate": "sample a weight field and emit the rescaled box metric",
        "oracle": "exact and Monte-Carlo event probabilities, FKG checks",
        "rate": "estimate rate points, extend the surface, check its laws",
        "highways": "build a highway network and report its diagnostics",
        "functional": "evaluate the rate functional by its three expressions",
        "ld-trend": "finite-box lower-deviation probabilities along a ladder",
        "selftest": "run the fast cross-module invariant suite",
    }
    for cmd in SCHEMAS:
        p = sub.add_parser(cmd, help=help_by_cmd[cmd])
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file (defaults to a built-in fixture)")
        p.add_argument("-o", "--output", type=str, default=None,
                       help="output directory (default: $FPPLAB_OUTPUT_DIR or .)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; results do not depend on this")
        p.add_argument("--budget", type=int, default=None,
                       help="enumeration budget (cap on configurations)")
    return parser


def _effective_config(args) -> dict:
    import copy

    if args.config is not None:
        with open(args.config) as fh:
            cfg = json.load(fh)
    else:
        cfg = copy.deepcopy(DEFAULT_CONFIGS[args.command])
    for key in ("seed", "threads", "budget"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return cfg


def main(argv=None) -> int:
    import jsonschema

    from fpplab.oracle import CapExceededError

    args = _build_parser().parse_args(argv)
    cfg = _effective_config(args)
    try:
        jsonschema.validate(cfg, SCHEMAS[args.command])
    except jsonschema.ValidationError as exc:
        print(f"config schema violation: {exc.message}", file=sys.stderr)
        return 2

    outdir = Path(args.output or os.environ.get("FPPLAB_OUTPUT_DIR", "."))
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "selftest":
            artifacts, failed = _cmd_selftest(cfg, outdir)
            _write_manifest(outdir, args.command, cfg,
                            artifacts + ["manifest.json"])
            return 1 if failed else 0
        runner = {
            "simulate": _cmd_simulate,
            "oracle": _cmd_oracle,
            "rate": _cmd_rate,
            "highways": _cmd_highways,
            "functional": _cmd_functional,
            "ld-trend": _cmd_ld_trend,
        }[args.command]
        artifacts = runner(cfg, outdir)
    except CapExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    _write_manifest(outdir, args.command, cfg, artifacts + ["manifest.json"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
