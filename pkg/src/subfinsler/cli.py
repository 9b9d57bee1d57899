"""Command-line surface: models, extremals, certificates, spheres, oracle.

Exit codes: 0 success, 2 flag/validation error, 3 computational error.
Errors are mirrored as one JSON line on stderr.  Identical invocations
produce byte-identical outputs; `--seed` is accepted for interface
stability (every code path here is deterministic already).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import oracle as oracle_mod
from .exact import float17, parse_scalar, scalar_str
from .models import (
    ModelId,
    all_models,
    get_model,
    schedule_endpoint,
    schedule_from_json,
    schedule_to_json,
)
from .pmp import InvalidLift, make_lift, synthesize_extremal, transport
from .second_order import NotBangBang, assemble_report, check_unique_lift
from .synthesis import (
    HorizonExceeded,
    cut_rules,
    minimal_time,
    trace_front,
    trace_sphere,
)
from . import export


class ValidationError(ValueError):
    pass


def _model_arg(name: str):
    try:
        return get_model(ModelId(name))
    except ValueError:
        raise ValidationError(
            f"unknown model {name!r}; choose from "
            + ", ".join(mid.value for mid in ModelId)
        )


def _parse_point(text: str, dim: int):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != dim:
        raise ValidationError(f"expected {dim} comma-separated coordinates")
    try:
        return tuple(parse_scalar(p) for p in parts)
    except ValueError as e:
        raise ValidationError(str(e))


def _emit(text: str, out: str | None):
    if out:
        target = Path(out)
        out_dir = os.environ.get("SUBFINSLER_OUT_DIR")
        if out_dir and not target.is_absolute():
            target = Path(out_dir) / target
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_models(args) -> int:
    rows = []
    for m in all_models():
        rows.append(
            {
                "id": m.id.value,
                "dim": m.dim,
                "frame": [str(f) for f in m.frame],
                "bracket_fields": [str(f) for f in m.aux_fields],
                "structural_relations": [
                    r.description for r in m.structural_relations
                ],
                "arc_bound": m.arc_bound,
                "dilation_weights": list(m.weights),
                "cut_rules": [
                    {"label": c.label, "description": c.description}
                    for c in cut_rules(m)
                ],
            }
        )
    _emit(json.dumps(rows, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _cmd_extremal(args) -> int:
    m = _model_arg(args.model)
    phi = _parse_point(args.phi, m.n_phi)
    start = (
        _parse_point(args.start, m.dim)
        if args.start
        else tuple(Fraction(0) for _ in range(m.dim))
    )
    tmax = parse_scalar(args.tmax)
    if tmax <= 0:
        raise ValidationError("tmax must be positive")
    try:
        lift = make_lift(m, phi)
    except InvalidLift as e:
        raise ValidationError(str(e))
    try:
        schedule, record = synthesize_extremal(m, start, lift, tmax)
    except InvalidLift as e:
        raise ValidationError(str(e))
    payload = {
        "schedule": schedule_to_json(schedule),
        "switching_record": record.to_json(),
        "endpoint": [scalar_str_or_float(c) for c in schedule_endpoint(m, schedule)],
    }
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def scalar_str_or_float(c):
    try:
        return scalar_str(c)
    except TypeError:
        return float17(c)


def _cmd_check_optimality(args) -> int:
    m = _model_arg(args.model)
    data = json.loads(Path(args.schedule).read_text(encoding="utf-8"))
    schedule = schedule_from_json(data)
    if schedule.model != m.id:
        raise ValidationError("schedule file belongs to a different model")
    try:
        unique, lift = check_unique_lift(m, schedule)
    except NotBangBang as e:
        raise ValidationError(str(e))
    if lift is None:
        payload = {
            "verdict": "Inconclusive",
            "reason": "no one-dimensional valid lift for this switching structure",
            "uniqueness_established": False,
        }
        _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
        print("verdict: Inconclusive (no unique extremal lift)")
        return 0
    report = assemble_report(m, schedule, lift, args.switch_index, unique)
    payload = report.to_json()
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    if report.verdict == "NotOptimal":
        w = report.witness
        coords = ", ".join(str(c) for c in w.coords)
        print(
            f"verdict: NotOptimal  witness ({coords})  Q value {w.value}"
        )
    else:
        print("verdict: Inconclusive")
    return 0


def _cmd_minimal_time(args) -> int:
    m = _model_arg(args.model)
    target = _parse_point(args.target, m.dim)
    start = (
        _parse_point(args.start, m.dim)
        if args.start
        else tuple(Fraction(0) for _ in range(m.dim))
    )
    res = minimal_time(m, start, target, resolution=args.resolution)
    _emit(json.dumps(res.to_json(), sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _cmd_sphere(args) -> int:
    m = _model_arg(args.model)
    radius = parse_scalar(args.radius)
    if radius <= 0:
        raise ValidationError("radius must be positive")
    patches = trace_sphere(m, radius, sampling=args.sampling)
    out = args.out or f"sphere-{m.id.value}.json"
    suffix = Path(out).suffix.lower()
    if suffix == ".json":
        _emit(export.sphere_json(m, radius, patches), out)
    elif suffix == ".csv":
        pts, labels = [], []
        for p in patches:
            for s in p.samples:
                pts.append(s)
                labels.append(p.label)
        _emit(export.points_csv(pts, m.dim, labels), out)
    elif suffix == ".svg":
        _emit(export.sphere_svg(m, patches, view=args.view), out)
    else:
        raise ValidationError("output must end in .json, .csv, or .svg")
    return 0


def _cmd_front(args) -> int:
    m = _model_arg(args.model)
    t = parse_scalar(args.time)
    if t <= 0:
        raise ValidationError("time must be positive")
    front = trace_front(m, t, sampling=args.sampling)
    out = args.out or f"front-{m.id.value}.json"
    suffix = Path(out).suffix.lower()
    if suffix == ".json":
        _emit(export.front_json(m, front), out)
    elif suffix == ".csv":
        pts = [pt for _, pt in front.points]
        labels = [label for label, _ in front.points]
        _emit(export.points_csv(pts, m.dim, labels), out)
    elif suffix == ".svg":
        _emit(export.front_svg(m, front, view=args.view), out)
    else:
        raise ValidationError("output must end in .json, .csv, or .svg")
    return 0


def _grid_config(m, args):
    bounds = None
    if args.bounds:
        vals = [float(v) for v in args.bounds.split(",")]
        if len(vals) != 2 * m.dim:
            raise ValidationError("bounds needs lo,hi per coordinate")
        bounds = tuple((vals[2 * i], vals[2 * i + 1]) for i in range(m.dim))
    else:
        h = args.horizon
        span = 1.2 * h + 0.3
        if m.dim == 2:
            bounds = ((-span, span), (-span, span))
        else:
            zspan = 0.6 * h * h + 0.3
            bounds = ((-span, span), (-span, span), (-zspan, zspan))
    return oracle_mod.GridConfig(
        bounds=bounds, dx=args.dx, dt=args.dt, horizon=args.horizon
    )


def _cmd_oracle(args) -> int:
    m = _model_arg(args.model)
    target = tuple(float(v) for v in args.target.split(","))
    if len(target) != m.dim:
        raise ValidationError(f"target needs {m.dim} coordinates")
    start = (
        tuple(float(v) for v in args.start.split(","))
        if args.start
        else tuple(0.0 for _ in range(m.dim))
    )
    cfg = _grid_config(m, args)
    grid = oracle_mod.propagate(m, start, cfg)
    if args.arrival_out:
        grid.save(args.arrival_out)
    est = oracle_mod.estimate(
        m, start, target, cfg, grid=grid, max_arcs=args.max_arcs
    )
    _emit(json.dumps(est.to_json(), sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _cmd_compare(args) -> int:
    m = _model_arg(args.model)
    target_f = tuple(float(v) for v in args.target.split(","))
    if len(target_f) != m.dim:
        raise ValidationError(f"target needs {m.dim} coordinates")
    target = tuple(Fraction(v).limit_denominator(10**6) for v in target_f)
    res = minimal_time(m, tuple(Fraction(0) for _ in range(m.dim)), target,
                       resolution=args.resolution)
    cfg = _grid_config(m, args)
    est = oracle_mod.estimate(
        m, tuple(0.0 for _ in range(m.dim)), target_f, cfg, max_arcs=args.max_arcs
    )
    mid = 0.5 * (est.lower_bound + est.upper_bound)
    half = 0.5 * (est.upper_bound - est.lower_bound)
    agree = abs(float(res.time) - mid) <= half + args.tolerance
    payload = {
        "model": m.id.value,
        "target": [float17(c) for c in target_f],
        "synthesis_time": float17(float(res.time)),
        "oracle_lower": float17(est.lower_bound),
        "oracle_upper": float17(est.upper_bound),
        "bracket_midpoint": float17(mid),
        "bracket_halfwidth": float17(half),
        "tolerance": float17(args.tolerance),
        "agree": agree,
    }
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    print(
        f"synthesis {float(res.time):.4f} vs oracle "
        f"[{est.lower_bound:.4f}, {est.upper_bound:.4f}] -> "
        + ("AGREE" if agree else "DISAGREE")
    )
    return 0 if agree else 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="subfinsler",
        description=(
            "Time-optimal synthesis, optimality certificates, and metric "
            "spheres for the five square-norm structures"
        ),
    )
    p.add_argument("--seed", type=int, default=0, help="fixes sampled runs")
    p.add_argument("--threads", type=int, default=1, help="worker cap")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("models", help="list the model catalog")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_models)

    sp = sub.add_parser("extremal", help="synthesize an extremal from phi(0)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--phi", required=True, help="comma-separated exact values")
    sp.add_argument("--tmax", required=True)
    sp.add_argument("--start")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_extremal)

    sp = sub.add_parser("check-optimality", help="second-order certificate")
    sp.add_argument("--model", required=True)
    sp.add_argument("--schedule", required=True, help="schedule JSON file")
    sp.add_argument("--switch-index", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_check_optimality)

    sp = sub.add_parser("minimal-time", help="minimum time to a target")
    sp.add_argument("--model", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--start")
    sp.add_argument("--resolution", type=int, default=16)
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_minimal_time)

    sp = sub.add_parser("sphere", help="trace a metric sphere")
    sp.add_argument("--model", required=True)
    sp.add_argument("--radius", required=True)
    sp.add_argument("--sampling", type=int, default=9)
    sp.add_argument("--view", choices=("x", "y", "z"), default="z")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_sphere)

    sp = sub.add_parser("front", help="trace an extremal front")
    sp.add_argument("--model", required=True)
    sp.add_argument("--time", required=True)
    sp.add_argument("--sampling", type=int, default=9)
    sp.add_argument("--view", choices=("x", "y", "z"), default="z")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_front)

    for name, fn in (("oracle", _cmd_oracle), ("compare", _cmd_compare)):
        sp = sub.add_parser(name, help=f"{name} a target by grid propagation")
        sp.add_argument("--model", required=True)
        sp.add_argument("--target", required=True)
        sp.add_argument("--start")
        sp.add_argument("--dx", type=float, default=0.02)
        sp.add_argument("--dt", type=float, default=0.02)
        sp.add_argument("--horizon", type=float, default=2.0)
        sp.add_argument("--bounds", help="lo,hi per coordinate")
        sp.add_argument("--max-arcs", type=int, default=5, dest="max_arcs")
        sp.add_argument("--arrival-out", dest="arrival_out",
                        help="write the arrival map (JSON header + cell dump)")
        sp.add_argument("--out")
        if name == "compare":
            sp.add_argument("--resolution", type=int, default=16)
            sp.add_argument("--tolerance", type=float, default=0.05)
        sp.set_defaults(fn=fn)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ValidationError as e:
        _err("validation", str(e))
        return 2
    except (InvalidLift, NotBangBang) as e:
        _err("validation", str(e))
        return 2
    except (
        HorizonExceeded,
        oracle_mod.GridTooLarge,
        oracle_mod.NotFound,
        oracle_mod.OracleInconsistency,
    ) as e:
        _err(type(e).__name__, str(e))
        return 3
    except (OSError, json.JSONDecodeError) as e:
        _err("io", str(e))
        return 2


def _err(code: str, message: str):
    sys.stderr.write(
        json.dumps({"error": code, "message": message}, sort_keys=True) + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
