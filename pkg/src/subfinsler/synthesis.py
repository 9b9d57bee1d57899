"""Per-model optimal synthesis: candidate families, minimal time, spheres.

Candidate extremal trajectories fall into finitely many *families*: bang
concatenations whose duration vectors carry the switching structure the
covector dynamics force (equal internal arcs for the three-component
models, the periodic/parity structure for the Martinet ones), and
singular families with one control component pinned at +-1.  A family is
a polynomial map from a small parameter box to endpoints, built by pushing
the start point through the exact flows with formal parameters, so sphere
patches come out as polynomial maps with exact coefficients.

Minimal time scans a cached cloud of family samples across time slices,
locally refines the winner in both time and parameters, and screens the
winning schedule through the second-order test.  The tolerance delta is
twice the per-cell endpoint displacement computed from explicit Lipschitz
bounds of the polynomial maps, plus the time-slice quantization.  Spheres
are families frozen at total time = radius with per-sample minimal-time
verification; fronts are the same images without optimality filtering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .exact import scalar_to_float, to_fraction
from .models import (
    Control,
    ControlSchedule,
    Model,
    bang_arc,
    bang_flow,
    get_model,
    singular_arc,
)
from .pmp import InvalidLift, check_pmp_invariants, make_lift, transport
from .second_order import NotBangBang, assemble_report, check_unique_lift
from .vecfield import Poly


class HorizonExceeded(LookupError):
    """Target not reachable within the configured time horizon."""


F0 = Fraction(0)
F1 = Fraction(1)
HALF = Fraction(1, 2)
_BUILD_EPS = Fraction(1, 10**6)


@dataclass(frozen=True)
class CutRule:
    label: str
    description: str


def cut_rules(m: Model) -> list[CutRule]:
    """Geometric stopping predicates baked into the family truncations."""
    mid = m.id.value
    if mid == "heisenberg-linf":
        return [
            CutRule("arc-bound-5", "regular bang-bang beyond 5 arcs is never optimal"),
            CutRule(
                "single-wrap",
                "5-arc schedules sweeping the underlying square more than once "
                "are excluded (first+last arc lengths capped by the internal one)",
            ),
        ]
    if mid == "grushin-l1":
        return [
            CutRule("arc-bound-3", "bang-bang beyond 3 arcs is never optimal"),
            CutRule(
                "axis-reflection",
                "trajectories from the y-axis stop being optimal at their second "
                "crossing of {x=0}",
            ),
        ]
    if mid == "grushin-linf":
        return [
            CutRule("arc-bound-3", "bang-bang beyond 3 arcs is never optimal"),
            CutRule("axis-start-2-arcs", "trajectories from the y-axis keep at most 2 arcs"),
        ]
    if mid == "martinet-l1":
        return [
            CutRule("arc-bound-7", "beyond 7 arcs (bang or singular): not optimal"),
            CutRule(
                "plane-start-5",
                "from {y=0} more than 5 arcs is not optimal; the third bang arc "
                "is truncated at its midpoint",
            ),
        ]
    return [
        CutRule("arc-bound-6", "regular beyond 6 arcs is not optimal"),
        CutRule(
            "plane-start-patches",
            "from {y=0} sphere patches use at most 4 bang arcs plus singular "
            "prefixes; longer concatenations are filtered by the minimal-time "
            "check and validated against the oracle",
        ),
    ]


@dataclass(frozen=True)
class Family:
    """A parametrized schedule family with a polynomial endpoint map."""

    label: str
    model_id: object
    kind: str  # "bang" | "singular" | "line"
    param_names: tuple[str, ...]
    box: tuple  # ((lo, hi) Fractions) per parameter
    total_time: Fraction
    endpoint: tuple  # Poly per coordinate over the parameter ring
    validity: tuple  # Polys required >= 0
    build_schedule: Callable
    meta: dict = field(default_factory=dict)

    @property
    def dim_params(self) -> int:
        return len(self.param_names)

    def degree(self) -> int:
        return max((p.degree() for p in self.endpoint), default=0)

    def grid(self, n: int):
        """Sampled (params, endpoints) honoring the validity cuts."""
        axes = [
            np.linspace(float(lo), float(hi), max(2, n)) for lo, hi in self.box
        ]
        if axes:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=1)
        else:
            pts = np.zeros((1, 0))
        ok = np.ones(pts.shape[0], dtype=bool)
        for v in self.validity:
            ok &= v.eval_array(pts) >= -1e-12
        pts = pts[ok]
        ends = np.stack([p.eval_array(pts) for p in self.endpoint], axis=1)
        return pts, ends

    def local_grid(self, center: np.ndarray, width: float, n: int):
        axes = []
        for k, (lo, hi) in enumerate(self.box):
            a = max(float(lo), center[k] - width)
            b = min(float(hi), center[k] + width)
            axes.append(np.linspace(a, b, n))
        if axes:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=1)
        else:
            pts = np.zeros((1, 0))
        ok = np.ones(pts.shape[0], dtype=bool)
        for v in self.validity:
            ok &= v.eval_array(pts) >= -1e-12
        pts = pts[ok]
        ends = np.stack([p.eval_array(pts) for p in self.endpoint], axis=1)
        return pts, ends

    def lipschitz_cell(self, n: int) -> float:
        """Endpoint displacement bound across one parameter-grid cell."""
        total = 0.0
        for coord in self.endpoint:
            acc = 0.0
            for k, (lo, hi) in enumerate(self.box):
                width = (float(hi) - float(lo)) / max(1, n - 1)
                acc += _poly_partial_bound(coord, k, self.box) * width
            total += acc * acc
        return float(np.sqrt(total))


def _poly_partial_bound(poly: Poly, var: int, box) -> float:
    """sup |d poly / d var| over the box, via coefficient norms."""
    bound = 0.0
    sup = [max(abs(float(lo)), abs(float(hi)), 1.0) for lo, hi in box]
    for exps, c in poly.terms.items():
        k = exps[var]
        if k == 0:
            continue
        term = abs(float(c)) * k
        for j, e in enumerate(exps):
            e_eff = e - 1 if j == var else e
            term *= sup[j] ** e_eff
        bound += term
    return bound


def _pvars(n: int) -> list[Poly]:
    return [Poly.var(k, n) for k in range(n)]


def _clamp_duration(d: Fraction) -> Fraction:
    if d < 0:
        if d > -_BUILD_EPS:
            return F0
        raise ValueError("negative duration in family build")
    return d


def _sym_bang_family(
    m: Model,
    label: str,
    start,
    controls: Sequence[Control],
    durations: Sequence,
    param_names,
    box,
    validity,
    total_time: Fraction,
    kind: str = "bang",
    meta=None,
):
    """Build a Family by pushing `start` through the flows symbolically."""
    nparams = len(param_names)
    start_fr = tuple(to_fraction(c) for c in start)
    point = tuple(Poly.const(c, nparams) for c in start_fr)
    for ctrl, dur in zip(controls, durations):
        point = bang_flow(m, point, ctrl, dur)

    def build(params):
        vals = [to_fraction(v) for v in params]
        arcs = []
        for ctrl, dur in zip(controls, durations):
            d = dur.evaluate(vals) if isinstance(dur, Poly) else to_fraction(dur)
            d = _clamp_duration(d)
            if d > 0:
                arcs.append(bang_arc(ctrl.u1, ctrl.u2, d))
        if not arcs:
            arcs.append(bang_arc(controls[0].u1, controls[0].u2, F0))
        return ControlSchedule(model=m.id, start=start_fr, arcs=tuple(arcs))

    return Family(
        label=label,
        model_id=m.id,
        kind=kind,
        param_names=tuple(param_names),
        box=tuple(box),
        total_time=total_time,
        endpoint=point,
        validity=tuple(validity),
        build_schedule=build,
        meta=meta or {},
    )


def _sym_singular_family(
    m: Model,
    label: str,
    start,
    fixed_index: int,
    fixed_sign: int,
    profile,
    param_names,
    box,
    validity,
    total_time: Fraction,
    meta=None,
):
    nparams = len(param_names)
    start_fr = tuple(to_fraction(c) for c in start)
    point = tuple(Poly.const(c, nparams) for c in start_fr)
    for value, dur in profile:
        pair = (
            (Fraction(fixed_sign), value)
            if fixed_index == 1
            else (value, Fraction(fixed_sign))
        )
        point = bang_flow(m, point, pair, dur)

    def build(params):
        vals = [to_fraction(v) for v in params]
        prof = []
        for value, dur in profile:
            v = value.evaluate(vals) if isinstance(value, Poly) else to_fraction(value)
            v = max(Fraction(-1), min(F1, v))
            d = dur.evaluate(vals) if isinstance(dur, Poly) else to_fraction(dur)
            d = _clamp_duration(d)
            if d > 0:
                prof.append((v, d))
        if not prof:
            prof.append((F0, F0))
        return ControlSchedule(
            model=m.id,
            start=start_fr,
            arcs=(singular_arc(fixed_index, fixed_sign, prof),),
        )

    return Family(
        label=label,
        model_id=m.id,
        kind="singular",
        param_names=tuple(param_names),
        box=tuple(box),
        total_time=total_time,
        endpoint=point,
        validity=tuple(validity),
        build_schedule=build,
        meta=meta or {},
    )


def _alternating_controls(initial: Control, first_comp: int, k: int):
    out = [initial]
    cur = (initial.u1, initial.u2)
    comp = first_comp
    for _ in range(k - 1):
        cur = (-cur[0], cur[1]) if comp == 1 else (cur[0], -cur[1])
        out.append(Control(*cur))
        comp = 3 - comp
    return out


def _controls_by_sequence(initial: Control, seq):
    out = [initial]
    cur = (initial.u1, initial.u2)
    for comp in seq:
        cur = (-cur[0], cur[1]) if comp == 1 else (cur[0], -cur[1])
        out.append(Control(*cur))
    return out


def _all_bangs():
    return [Control(Fraction(a), Fraction(b)) for a in (1, -1) for b in (1, -1)]


def _ctrl_tag(u: Control) -> str:
    return f"({int(u.u1):+d},{int(u.u2):+d})"


def _heisenberg_families(m: Model, r: Fraction, for_front: bool):
    fams = []
    for fixed_index in (1, 2):
        for sigma in (1, -1):
            for first in (1, -1):
                b, s = _pvars(2)
                prof = [(Poly.const(first, 2), s), (b, Poly.const(r, 2) - s)]
                fams.append(
                    _sym_singular_family(
                        m,
                        f"singular-u{fixed_index}={sigma:+d}-first={first:+d}",
                        (F0, F0, F0),
                        fixed_index,
                        sigma,
                        prof,
                        ("b", "s"),
                        ((Fraction(-1), F1), (F0, r)),
                        (),
                        r,
                    )
                )
    max_k = 5 if not for_front else 6
    for k in range(2, max_k + 1):
        for initial in _all_bangs():
            for first_comp in (1, 2):
                controls = _alternating_controls(initial, first_comp, k)
                if k == 2:
                    (t0,) = _pvars(1)
                    durs = [t0, Poly.const(r, 1) - t0]
                    validity = []
                    box = ((F0, r),)
                    names = ("t0",)
                else:
                    t0, s = _pvars(2)
                    tail = Poly.const(r, 2) - t0 - (k - 2) * s
                    durs = [t0] + [s] * (k - 2) + [tail]
                    validity = [s - t0, tail, s - tail]
                    if k == 5 and not for_front:
                        validity.append(s - t0 - tail)
                    box = ((F0, r), (F0, r))
                    names = ("t0", "s")
                fams.append(
                    _sym_bang_family(
                        m,
                        f"bang{k}-{_ctrl_tag(initial)}-sw{first_comp}",
                        (F0, F0, F0),
                        controls,
                        durs,
                        names,
                        box,
                        validity,
                        r,
                    )
                )
    return fams


def _grushin_l1_families(m: Model, r: Fraction, for_front: bool):
    fams = []
    max_k = 3 if not for_front else 4
    for sigma in (1, -1):
        initial = Control(Fraction(sigma), Fraction(sigma))
        for first_comp in (1, 2):
            for k in range(2, max_k + 1):
                controls = _alternating_controls(initial, first_comp, k)
                (s,) = _pvars(1)
                half_s = s * HALF
                rP = Poly.const(r, 1)
                tail = rP - half_s - (k - 2) * s
                durs = [half_s] + [s] * (k - 2) + [tail]
                validity = [tail, s - tail]
                fams.append(
                    _sym_bang_family(
                        m,
                        f"bang{k}-{_ctrl_tag(initial)}-sw{first_comp}",
                        (F0, F0),
                        controls,
                        durs,
                        ("s",),
                        ((F0, 2 * r),),
                        validity,
                        r,
                    )
                )
    return fams


def _grushin_linf_families(m: Model, r: Fraction, for_front: bool):
    fams = []
    for sigma in (1, -1):
        (w,) = _pvars(1)
        fams.append(
            _sym_singular_family(
                m,
                f"singular-u1={sigma:+d}",
                (F0, F0),
                1,
                sigma,
                [(w, Poly.const(r, 1))],
                ("w",),
                ((Fraction(-1), F1),),
                (),
                r,
            )
        )
    max_k = 2 if not for_front else 3
    for initial in _all_bangs():
        for k in range(2, max_k + 1):
            controls = _alternating_controls(initial, 1, k)
            (s,) = _pvars(1)
            rP = Poly.const(r, 1)
            tail = rP - (k - 1) * s
            durs = [s] * (k - 1) + [tail]
            validity = [tail, s - tail]
            fams.append(
                _sym_bang_family(
                    m,
                    f"bang{k}-{_ctrl_tag(initial)}",
                    (F0, F0),
                    controls,
                    durs,
                    ("s",),
                    ((F0, r),),
                    validity,
                    r,
                )
            )
    return fams


def _martinet_singular_profiles(m, r, label_prefix):
    """Piecewise-{0,+-1} free-component profiles, degree-3-safe."""
    fams = []
    rr = Poly.const(r, 2)
    for fixed_index in (1, 2):
        for sigma in (1, -1):
            for first in (1, -1):
                p, q = _pvars(2)
                tail = rr - p - q
                prof1 = [
                    (Poly.const(first, 2), p),
                    (Poly.const(-first, 2), q),
                    (Poly.const(first, 2), tail),
                ]
                prof2 = [
                    (Poly.const(0, 2), p),
                    (Poly.const(first, 2), q),
                    (Poly.const(-first, 2), tail),
                ]
                for tag, prof in (("bangs", prof1), ("hold", prof2)):
                    fams.append(
                        _sym_singular_family(
                            m,
                            f"{label_prefix}-u{fixed_index}={sigma:+d}-{tag}{first:+d}",
                            (F0, F0, F0),
                            fixed_index,
                            sigma,
                            prof,
                            ("p", "q"),
                            ((F0, r), (F0, r)),
                            (tail,),
                            r,
                        )
                    )
    return fams


def _martinet_l1_families(m: Model, r: Fraction, for_front: bool):
    fams = _martinet_singular_profiles(m, r, "singular")
    mixed = [Control(F1, -F1), Control(-F1, F1)]
    for c0 in mixed:
        for first_comp in (1, 2):
            # k = 2: mixed then straight; k = 3: ... then mixed, cut at its
            # midpoint (the plane-start rule)
            for k in (2, 3):
                seq = (first_comp,) if k == 2 else (first_comp, first_comp)
                controls = _controls_by_sequence(c0, seq)
                if k == 2:
                    (t1,) = _pvars(1)
                    durs = [t1, Poly.const(r, 1) - t1]
                    validity = [Poly.const(r, 1) - t1]
                    names, box = ("t1",), ((F0, r),)
                else:
                    t1, ta = _pvars(2)
                    tau = Poly.const(r, 2) - t1 - ta
                    durs = [t1, ta, tau]
                    validity = [tau, t1 - tau] if not for_front else [tau]
                    names, box = ("t1", "ta"), ((F0, r), (F0, r))
                fams.append(
                    _sym_bang_family(
                        m,
                        f"plane{k}-{_ctrl_tag(c0)}-sw{first_comp}",
                        (F0, F0, F0),
                        controls,
                        durs,
                        names,
                        box,
                        validity,
                        r,
                    )
                )
    # line prefix in {y=0} then the mixed/straight continuation
    for sigma in (1, -1):
        line = Control(Fraction(sigma), Fraction(sigma))
        for exit_comp in (1, 2):
            exit_ctrl = (
                Control(-line.u1, line.u2)
                if exit_comp == 1
                else Control(line.u1, -line.u2)
            )
            follow = Control(-exit_ctrl.u1, -exit_ctrl.u2)
            follow = (
                Control(exit_ctrl.u1, -exit_ctrl.u2)
                if exit_comp == 1
                else Control(-exit_ctrl.u1, exit_ctrl.u2)
            )
            ts, t1 = _pvars(2)
            rr = Poly.const(r, 2)
            fams.append(
                _sym_bang_family(
                    m,
                    f"line{_ctrl_tag(line)}-exit{exit_comp}-k2",
                    (F0, F0, F0),
                    [line, exit_ctrl],
                    [ts, rr - ts],
                    ("ts", "t1"),
                    ((F0, r), (F0, r)),
                    (rr - ts,),
                    r,
                    kind="line",
                )
            )
            fams.append(
                _sym_bang_family(
                    m,
                    f"line{_ctrl_tag(line)}-exit{exit_comp}-k3",
                    (F0, F0, F0),
                    [line, exit_ctrl, follow],
                    [ts, t1, rr - ts - t1],
                    ("ts", "t1"),
                    ((F0, r), (F0, r)),
                    (rr - ts - t1,),
                    r,
                    kind="line",
                )
            )
            third = (
                Control(-follow.u1, follow.u2)
                if exit_comp == 1
                else Control(follow.u1, -follow.u2)
            )
            for num in range(0, 5):
                ts_val = r * Fraction(num, 6)
                t1, ta = _pvars(2)
                rr2 = Poly.const(r - ts_val, 2)
                tau = rr2 - t1 - ta
                durs = [Poly.const(ts_val, 2), t1, ta, tau]
                validity = [tau, t1 - tau] if not for_front else [tau]
                fams.append(
                    _sym_bang_family(
                        m,
                        f"line{_ctrl_tag(line)}-exit{exit_comp}-k4-s{num}",
                        (F0, F0, F0),
                        [line, exit_ctrl, follow, third],
                        durs,
                        ("t1", "ta"),
                        ((F0, r), (F0, r)),
                        validity,
                        r,
                        kind="line",
                    )
                )
    return fams


def _martinet_linf_families(m: Model, r: Fraction, for_front: bool):
    fams = _martinet_singular_profiles(m, r, "singular")
    for initial in _all_bangs():
        for first_comp in (1, 2):
            for k in (2, 3, 4):
                seq = tuple(
                    first_comp if i % 2 == 0 else 3 - first_comp
                    for i in range(k - 1)
                )
                controls = _controls_by_sequence(initial, seq)
                if k == 2:
                    (a,) = _pvars(1)
                    durs = [a, Poly.const(r, 1) - a]
                    validity = [Poly.const(r, 1) - a]
                    names, box = ("a",), ((F0, r),)
                elif k == 3:
                    a, b = _pvars(2)
                    tail = Poly.const(r, 2) - a - b
                    durs = [a, b, tail]
                    validity = [tail, b - tail]
                    names, box = ("a", "b"), ((F0, r), (F0, r))
                else:
                    a, b = _pvars(2)
                    tail = Poly.const(r, 2) - a - 2 * b
                    durs = [a, b, b, tail]
                    lam = a * b + b * b * HALF
                    validity = [
                        tail,
                        lam - (a * tail - tail * tail * HALF),
                    ]
                    names, box = ("a", "b"), ((F0, r), (F0, r))
                fams.append(
                    _sym_bang_family(
                        m,
                        f"bang{k}-{_ctrl_tag(initial)}-sw{first_comp}",
                        (F0, F0, F0),
                        controls,
                        durs,
                        names,
                        box,
                        validity,
                        r,
                    )
                )
    # singular line prefix along {y=0} (free component 0), then a bang tail
    for sigma in (1, -1):
        for tail_ctrl in _all_bangs():
            ts, a = _pvars(2)
            rr = Poly.const(r, 2)
            prefix_end = bang_flow(
                m,
                tuple(Poly.const(0, 2) for _ in range(3)),
                (Fraction(sigma), F0),
                ts,
            )
            end = bang_flow(m, prefix_end, tail_ctrl, rr - ts)
            fams.append(
                Family(
                    label=f"line{sigma:+d}-then-{_ctrl_tag(tail_ctrl)}",
                    model_id=m.id,
                    kind="line",
                    param_names=("ts", "a"),
                    box=((F0, r), (F0, r)),
                    total_time=r,
                    endpoint=end,
                    validity=(rr - ts,),
                    build_schedule=lambda params, s=sigma, tc=tail_ctrl: (
                        _line_then_bang(m, s, tc, params, r)
                    ),
                )
            )
    return fams


def _line_then_bang(m, sigma, tail_ctrl, params, r):
    tsv = _clamp_duration(to_fraction(params[0]))
    tsv = min(tsv, r)
    arcs = []
    if tsv > 0:
        arcs.append(singular_arc(1, sigma, [(F0, tsv)]))
    if r - tsv > 0:
        arcs.append(bang_arc(tail_ctrl.u1, tail_ctrl.u2, r - tsv))
    if not arcs:
        arcs.append(bang_arc(tail_ctrl.u1, tail_ctrl.u2, F0))
    return ControlSchedule(model=m.id, start=(F0, F0, F0), arcs=tuple(arcs))


_BUILDERS = {
    "heisenberg-linf": _heisenberg_families,
    "grushin-l1": _grushin_l1_families,
    "grushin-linf": _grushin_linf_families,
    "martinet-l1": _martinet_l1_families,
    "martinet-linf": _martinet_linf_families,
}


@lru_cache(maxsize=4096)
def _families_cached(mid: str, r: Fraction, for_front: bool):
    m = get_model(mid)
    return tuple(_BUILDERS[mid](m, r, for_front))


def candidate_families(m: Model, radius=Fraction(1)) -> tuple[Family, ...]:
    """Per-model candidate extremal families at a fixed total time."""
    return _families_cached(m.id.value, to_fraction(radius), False)


def front_families(m: Model, time) -> tuple[Family, ...]:
    return _families_cached(m.id.value, to_fraction(time), True)


# ---------------------------------------------------------------------------
# minimal time


@dataclass(frozen=True)
class OptimalResult:
    target: tuple
    time: Fraction
    schedule: ControlSchedule
    distance: float
    delta: float
    certificate: dict
    alternatives: tuple = ()

    def to_json(self) -> dict:
        from .models import schedule_to_json

        return {
            "target": [float(c) for c in self.target],
            "time": float(self.time),
            "time_exact": str(self.time),
            "distance": self.distance,
            "delta": self.delta,
            "schedule": schedule_to_json(self.schedule),
            "certificate": {k: str(v) for k, v in self.certificate.items()},
        }


def _dilate(m: Model, pts: np.ndarray, lam: float) -> np.ndarray:
    """Anisotropic dilation: coordinate i scales by lam**weights[i]."""
    out = np.array(pts, dtype=float, copy=True)
    for i, w in enumerate(m.weights):
        out[..., i] *= lam**w
    return out


def quasi_radius(m: Model, q) -> float:
    """Homogeneous scale estimate: max_i |q_i|^(1/w_i)."""
    vals = [abs(float(c)) ** (1.0 / w) for c, w in zip(q, m.weights)]
    return max(vals)


class _UnitCloud:
    """Unit-time family samples; dilations turn them into any-time data."""

    def __init__(self, m: Model, resolution: int):
        self.model = m
        self.resolution = resolution
        self.families = candidate_families(m, F1)
        pts, fam_idx, params = [], [], []
        for fi, fam in enumerate(self.families):
            p, e = fam.grid(max(7, resolution // 2))
            if p.shape[0] == 0:
                continue
            pts.append(e)
            fam_idx.append(np.full(e.shape[0], fi))
            params.append(_pad_params(p))
        self.points = np.concatenate(pts, axis=0)
        self.fam_idx = np.concatenate(fam_idx).astype(np.int64)
        self.params = np.concatenate(params, axis=0)
        from scipy.spatial import cKDTree

        self.tree = cKDTree(self.points)

    def seeds(self, target: np.ndarray, lam_grid, per_lam: int = 4, cap: int = 14):
        """(family, params, lam) seeds: nearest unit points to the
        dilation-normalized target across a grid of scales."""
        found = []
        for lam in lam_grid:
            q = _dilate(self.model, target, 1.0 / lam)
            dist, idx = self.tree.query(q, k=per_lam)
            for d, i in zip(np.atleast_1d(dist), np.atleast_1d(idx)):
                found.append((float(d) * lam, float(lam), int(i)))
        found.sort()
        seen = set()
        out = []
        for scaled_d, lam, i in found:
            fi = int(self.fam_idx[i])
            if fi in seen:
                continue
            seen.add(fi)
            fam = self.families[fi]
            out.append((fam, self.params[i][: fam.dim_params], lam))
            if len(out) >= cap:
                break
        return out


def _pad_params(p: np.ndarray, width: int = 4) -> np.ndarray:
    out = np.zeros((p.shape[0], width))
    out[:, : p.shape[1]] = p
    return out


_CLOUDS: dict = {}


def _get_cloud(m: Model, resolution: int) -> _UnitCloud:
    key = (m.id.value, resolution)
    if key not in _CLOUDS:
        _CLOUDS[key] = _UnitCloud(m, resolution)
    return _CLOUDS[key]


def _params_fit(fam: Family, m: Model, target: np.ndarray, lam: float,
                warm: np.ndarray, rounds: int = 4, n: int = 9):
    """Closest family point to delta_{1/lam}(target), zooming parameters.

    Works in original coordinates (unit endpoints are dilated by lam), and
    returns (params, dist, cell_disp) with cell_disp the measured endpoint
    displacement across one final-grid cell: the delta(resolution) unit.
    """
    span = max(((float(hi) - float(lo)) for lo, hi in fam.box), default=0.0)
    width = span
    params = np.array(warm, dtype=float)
    best = None
    for rnd in range(rounds):
        if rnd == 0:
            p, e = fam.grid(n)
        else:
            p, e = fam.local_grid(params, width, n)
        if p.shape[0] == 0:
            width /= 3.0
            continue
        de = _dilate(m, e, lam)
        dist = np.linalg.norm(de - target[None, :], axis=1)
        i = int(np.argmin(dist))
        if best is None or dist[i] < best[1]:
            best = (p[i], float(dist[i]))
            params = np.array(p[i])
        width /= 3.0
    if best is None:
        return None
    cell = max(width * 3.0 / max(1, n - 1), 1e-12)
    disp = 0.0
    if fam.dim_params:
        base = np.array([poly.eval_float(best[0]) for poly in fam.endpoint])
        for k in range(fam.dim_params):
            shifted = np.array(best[0])
            up = shifted[k] + cell
            shifted[k] = up if up <= float(fam.box[k][1]) else shifted[k] - cell
            e2 = np.array([poly.eval_float(shifted) for poly in fam.endpoint])
            disp = max(
                disp,
                float(np.linalg.norm(_dilate(m, e2, lam) - _dilate(m, base, lam))),
            )
    return best[0], best[1], disp


def _family_min_scale(m, fam, target, lam0, warm, resolution):
    """Smallest dilation scale at which the family image meets the target.

    The scale is zoomed jointly with the parameters until the touching
    scale is located to high precision; for targets interior to the
    swept region a halving walk then pushes the scale further down while
    the fit stays within the measured tolerance.
    """
    lam_w = max(0.4 * lam0, 1e-3)
    lam_c = lam0
    params = np.array(warm, dtype=float)
    precision = lam0 / 4096.0 + 1e-7
    for it in range(16):
        rounds = 4 if lam_w > 0.02 * lam0 else 6
        lo = max(1e-9, lam_c - lam_w)
        lams = np.linspace(lo, lam_c + lam_w, 9)
        best = None
        for lam in lams:
            r = _params_fit(fam, m, target, float(lam), params, rounds=rounds)
            if r is None:
                continue
            score = r[1] + 1e-9 * lam
            if best is None or score < best[0]:
                best = (score, float(lam), r)
        if best is None:
            return None
        lam_c = best[1]
        params = np.array(best[2][0])
        # trust region: shrink only when the winner is interior; a winner
        # at the window edge recenters without shrinking
        at_edge = lam_c <= lams[1] + 1e-15 or lam_c >= lams[-2] - 1e-15
        if not at_edge:
            lam_w /= 3.0
        if lam_w < precision:
            break
        if it == 2 and best[2][1] > 0.3 * max(lam_c, 1.0):
            return None  # hopeless seed: nowhere near touching
    p_best, dist, disp = _params_fit(fam, m, target, lam_c, params, rounds=7)
    delta = max(2.0 * disp, 5e-4 * max(lam_c, 1.0)) + 1e-9
    if dist > delta:
        return None
    params = np.array(p_best)
    # interior targets stay feasible on a scale interval: walk it down
    step = max(lam_c / 8.0, 4.0 * delta)
    floor = lam_c / 2048.0 + 1e-6
    while step > floor:
        lam_try = lam_c - step
        ok = None
        if lam_try > 0:
            r = _params_fit(fam, m, target, lam_try, params, rounds=5)
            if r is not None and r[1] <= delta:
                ok = r
        if ok is not None:
            lam_c = lam_try
            params = np.array(ok[0])
            dist = ok[1]
        else:
            step /= 2.0
    return lam_c, params, dist, delta


def _min_time_query(m: Model, cloud: _UnitCloud, target: np.ndarray,
                    resolution: int):
    rho = quasi_radius(m, target)
    if rho == 0:
        return None
    lam_grid = rho * np.geomspace(0.45, 3.2, 28)
    best = None
    for fam, warm, lam0 in cloud.seeds(target, lam_grid):
        if best is not None and 0.55 * lam0 > best[0]:
            continue
        r = _family_min_scale(m, fam, target, lam0, warm, resolution)
        if r is None:
            continue
        lam, params, dist, delta = r
        if best is None or lam < best[0] - 1e-12:
            best = (lam, fam, params, dist, delta)
    return best


def minimal_time(
    m: Model,
    p0,
    target,
    resolution: int = 16,
    horizon=None,
    q_screen: bool = True,
) -> OptimalResult:
    """Minimum family time landing within delta(resolution) of the target.

    The result is an upper bound on the true distance converging as the
    resolution grows; the certificate records the screenings the winning
    schedule survived.  Start points away from the origin are handled via
    the translation symmetries; from the origin the anisotropic dilations
    reduce the search to the unit-time families.
    """
    p0_fr = tuple(_as_fraction(c) for c in p0)
    tgt_fr = tuple(_as_fraction(c) for c in target)
    if any(c != 0 for c in p0_fr):
        return _minimal_time_shifted(m, p0_fr, tgt_fr, resolution, horizon, q_screen)
    tgt = np.array([float(c) for c in tgt_fr])
    if all(c == 0 for c in tgt_fr):
        schedule = ControlSchedule(model=m.id, start=p0_fr, arcs=())
        return OptimalResult(
            target=tgt_fr,
            time=F0,
            schedule=schedule,
            distance=0.0,
            delta=0.0,
            certificate={"family": "trivial", "q_verdict": "NotApplicable"},
        )
    cloud = _get_cloud(m, resolution)
    hit = _min_time_query(m, cloud, tgt, resolution)
    if hit is None or (horizon is not None and hit[0] > float(horizon)):
        raise HorizonExceeded(
            f"target {tuple(map(float, tgt_fr))} not reachable by the "
            "candidate families at the requested tolerance"
        )
    lam, fam, params, dist, delta = hit
    lam_fr = Fraction(lam).limit_denominator(10**6)
    fam_lam = _family_at(m, fam.label, lam_fr)
    scaled = []
    for x, scale_like in zip(np.atleast_1d(params), fam.meta.get(
            "param_scales", (1,) * fam.dim_params)):
        v = Fraction(float(x)).limit_denominator(10**9)
        scaled.append(v * lam_fr if scale_like else v)
    schedule = fam_lam.build_schedule(tuple(scaled))
    certificate = _certify(m, schedule, dist, delta, q_screen)
    certificate["family"] = fam.label
    return OptimalResult(
        target=tgt_fr,
        time=lam_fr,
        schedule=schedule,
        distance=dist,
        delta=delta,
        certificate=certificate,
    )


def _family_at(m: Model, label: str, T: Fraction) -> Family:
    for f in candidate_families(m, T):
        if f.label == label:
            return f
    raise KeyError(label)


def _as_fraction(c) -> Fraction:
    if isinstance(c, float):
        return Fraction(c).limit_denominator(10**9)
    return to_fraction(c)


def _certify(m: Model, schedule: ControlSchedule, dist, delta, q_screen) -> dict:
    cert = {
        "distance": dist,
        "delta": delta,
        "arc_count": len(schedule.arcs),
        "arc_bound_ok": (not schedule.is_bang_bang())
        or len(schedule.arcs) <= m.arc_bound,
    }
    unique, lift = False, None
    if schedule.is_bang_bang() and len(schedule.arcs) >= 2:
        try:
            unique, lift = check_unique_lift(m, schedule)
        except NotBangBang:
            unique, lift = False, None
    cert["unique_lift"] = unique
    if lift is None:
        lift = _fallback_lift(m, schedule)
    if lift is not None:
        try:
            path = transport(m, lift, schedule)
            cert["pmp_ok"] = check_pmp_invariants(m, path, schedule).ok
        except InvalidLift:
            cert["pmp_ok"] = False
    else:
        cert["pmp_ok"] = None
    if q_screen and unique and schedule.is_bang_bang() and len(schedule.arcs) >= 2:
        try:
            K = len(schedule.arcs) - 1
            rep = assemble_report(m, schedule, lift, max(1, (K + 1) // 2), True)
            cert["q_verdict"] = rep.verdict
        except (NotBangBang, InvalidLift):
            cert["q_verdict"] = "Inconclusive"
    else:
        cert["q_verdict"] = "NotApplicable"
    return cert


def _fallback_lift(m: Model, schedule: ControlSchedule):
    """A valid lift for single-bang or singular schedules, when one exists."""
    arcs = schedule.arcs
    if not arcs:
        return None
    first = arcs[0]
    try:
        if first.kind == "singular" and len(arcs) == 1:
            sigma = Fraction(first.fixed_sign)
            if m.n_phi == 3:
                phi = (F0, sigma, F0) if first.fixed_index == 2 else (sigma, F0, F0)
            else:
                phi = (
                    (F0, sigma, F0, F0, F0)
                    if first.fixed_index == 2
                    else (sigma, F0, F0, F0, F0)
                )
            return make_lift(m, phi)
        if len(arcs) == 1 and first.kind == "bang":
            u = first.control
            if m.n_phi == 3:
                phi = (u.u1 * HALF, u.u2 * HALF, F0)
            else:
                phi = (u.u1 * HALF, u.u2 * HALF, F0, F0, F0)
            return make_lift(m, phi)
    except InvalidLift:
        return None
    return None


def _minimal_time_shifted(m, p0, target, resolution, horizon, q_screen):
    """Reduce a general start to the origin via the model symmetries."""
    mid = m.id.value
    x0 = p0[0]
    if mid == "heisenberg-linf":
        x, y, z = p0
        tx, ty, tz = target
        sx, sy = tx - x, ty - y
        sz = tz - z - (x * ty - y * tx) * HALF
        res = minimal_time(m, (F0, F0, F0), (sx, sy, sz), resolution, horizon, q_screen)
        sched = ControlSchedule(model=m.id, start=tuple(p0), arcs=res.schedule.arcs)
        return OptimalResult(
            target=tuple(target),
            time=res.time,
            schedule=sched,
            distance=res.distance,
            delta=res.delta,
            certificate=dict(res.certificate),
        )
    if mid in ("grushin-l1", "grushin-linf") and x0 == 0:
        ty = target[1] - p0[1]
        res = minimal_time(m, (F0, F0), (target[0], ty), resolution, horizon, q_screen)
        sched = ControlSchedule(model=m.id, start=tuple(p0), arcs=res.schedule.arcs)
        return OptimalResult(
            target=tuple(target),
            time=res.time,
            schedule=sched,
            distance=res.distance,
            delta=res.delta,
            certificate=dict(res.certificate),
        )
    if mid in ("martinet-l1", "martinet-linf") and p0[1] == 0:
        tgt2 = (target[0] - p0[0], target[1], target[2] - p0[2])
        res = minimal_time(m, (F0, F0, F0), tgt2, resolution, horizon, q_screen)
        sched = ControlSchedule(model=m.id, start=tuple(p0), arcs=res.schedule.arcs)
        return OptimalResult(
            target=tuple(target),
            time=res.time,
            schedule=sched,
            distance=res.distance,
            delta=res.delta,
            certificate=dict(res.certificate),
        )
    raise HorizonExceeded(
        f"minimal_time from start {tuple(map(float, p0))} is not supported for "
        f"{mid}; use the oracle for general starts"
    )


# ---------------------------------------------------------------------------
# spheres and fronts


@dataclass(frozen=True)
class SpherePatch:
    label: str
    kind: str
    parameter_domain: tuple
    map_coefficients: tuple  # Poly per coordinate
    validity: tuple
    degree: int
    samples: tuple

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "domain": [[str(lo), str(hi)] for lo, hi in self.parameter_domain],
            "map_coefficients": [
                {
                    ",".join(str(e) for e in exps): str(c)
                    for exps, c in sorted(poly.terms.items())
                }
                for poly in self.map_coefficients
            ],
            "validity": [str(v) for v in self.validity],
            "degree": self.degree,
            "n_samples": len(self.samples),
        }


@dataclass(frozen=True)
class FrontSample:
    time: float
    points: tuple  # (label, point) pairs

    def point_array(self) -> np.ndarray:
        return np.array([p for _, p in self.points], dtype=float)


def trace_sphere(
    m: Model,
    radius,
    sampling: int = 9,
    keep_fraction: float = 0.95,
    resolution: int = 16,
):
    """Sphere patches at the given radius, with on-sphere verification.

    Families are frozen at total time == radius and sampled; a sample
    survives when the minimal-time query cannot reach it in less than
    keep_fraction * radius.  Patches retaining no samples are dropped.
    """
    r = to_fraction(radius)
    cloud = _get_cloud(m, resolution)
    patches = []
    for fam in candidate_families(m, r):
        params, ends = fam.grid(sampling)
        suspicious = _beaten_prefilter(m, cloud, ends, float(r), keep_fraction)
        kept = []
        for flag, end in zip(suspicious, ends):
            fast = False
            if flag:
                hit = _min_time_query(
                    m, cloud, np.asarray(end, dtype=float), resolution
                )
                fast = hit is not None and float(hit[0]) < keep_fraction * float(r)
            if not fast:
                kept.append(tuple(float(c) for c in end))
        if not kept:
            continue
        patches.append(
            SpherePatch(
                label=fam.label,
                kind=fam.kind,
                parameter_domain=fam.box,
                map_coefficients=fam.endpoint,
                validity=fam.validity,
                degree=fam.degree(),
                samples=tuple(kept),
            )
        )
    return patches


def _beaten_prefilter(
    m: Model,
    cloud: _UnitCloud,
    ends: np.ndarray,
    r: float,
    keep_fraction: float,
    gate: float = 0.05,
) -> np.ndarray:
    """Cheap vectorized test: could any sample be reachable before keep*r?

    A sample is suspicious when some dilation scale below keep_fraction*r
    brings it within `gate` of the unit cloud; only suspicious samples get
    the full minimal-time query.
    """
    if ends.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    suspicious = np.zeros(ends.shape[0], dtype=bool)
    for lam in np.linspace(0.45 * r, keep_fraction * r, 10):
        scaled = np.array(ends, dtype=float)
        for i, w in enumerate(m.weights):
            scaled[:, i] /= lam**w
        d, _ = cloud.tree.query(scaled)
        suspicious |= np.atleast_1d(d) <= gate * max(1.0, 1.0 / lam)
    return suspicious


def trace_front(m: Model, time_, sampling: int = 9) -> FrontSample:
    """Endpoints of all extremal families at the given time, unfiltered."""
    T = to_fraction(time_)
    points = []
    for fam in front_families(m, T):
        params, ends = fam.grid(sampling)
        for end in ends:
            points.append((fam.label, tuple(float(c) for c in end)))
    return FrontSample(time=float(T), points=tuple(points))
