"""Catalog of the five square-norm structures.

Each model packages a two-field frame on R^2 or R^3, the iterated-bracket
fields it generates, the linear relations tying switching values to state
coordinates, the per-model arc-count ceiling for optimal bang-bang
trajectories, and an exact closed-form flow for arcs of constant control.

The closed-form flows are hand-derived per model (they are short) and are
cross-checked at construction time against the nilpotent Taylor expansion
of the frame, so a transcription error cannot survive import.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from . import vecfield
from .exact import (
    Scalar,
    fraction_str,
    parse_scalar,
    scalar_str,
    to_fraction,
)
from .vecfield import DimensionError, Poly, PolyVectorField, bracket


class ModelId(enum.Enum):
    HEISENBERG_LINF = "heisenberg-linf"
    GRUSHIN_L1 = "grushin-l1"
    GRUSHIN_LINF = "grushin-linf"
    MARTINET_L1 = "martinet-l1"
    MARTINET_LINF = "martinet-linf"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Control:
    """An admissible control value: the square |u1|, |u2| <= 1."""

    u1: Fraction
    u2: Fraction

    def __post_init__(self):
        object.__setattr__(self, "u1", to_fraction(self.u1))
        object.__setattr__(self, "u2", to_fraction(self.u2))
        if abs(self.u1) > 1 or abs(self.u2) > 1:
            raise ValueError("control outside the unit square")

    def is_bang(self) -> bool:
        return abs(self.u1) == 1 and abs(self.u2) == 1

    def as_tuple(self) -> tuple[Fraction, Fraction]:
        return (self.u1, self.u2)


BANG_CONTROLS = tuple(
    Control(Fraction(a), Fraction(b)) for a in (1, -1) for b in (1, -1)
)


@dataclass(frozen=True)
class Arc:
    """One schedule arc: constant bang control, or a singular profile.

    Singular arcs fix one control component at +-1 and carry a
    piecewise-constant profile for the free component.  Durations are
    exact scalars (rational unless produced by an irrational switching
    root).
    """

    duration: Scalar
    control: Control | None = None
    fixed_index: int | None = None
    fixed_sign: int | None = None
    profile: tuple[tuple[Scalar, Scalar], ...] | None = None

    @property
    def kind(self) -> str:
        return "bang" if self.control is not None else "singular"

    def __post_init__(self):
        if (self.control is None) == (self.fixed_index is None):
            raise ValueError("arc is either bang (control) or singular (profile)")
        if self.control is None:
            if self.fixed_index not in (1, 2) or self.fixed_sign not in (1, -1):
                raise ValueError("singular arc needs fixed_index in {1,2}, sign +-1")
            if self.profile is None:
                raise ValueError("singular arc needs a profile")
            total = sum(d for _, d in self.profile)
            if total != self.duration:
                raise ValueError("profile durations must sum to the arc duration")

    def pieces(self) -> list[tuple]:
        """Constant-control pieces covering the arc.

        Pieces carry Control values when the profile is rational; symbolic
        profile values (polynomial patch parameters) pass through as raw
        (u1, u2) pairs, which the flow maps accept.
        """
        if self.control is not None:
            return [(self.control, self.duration)]
        out = []
        for value, dt in self.profile:
            fixed = Fraction(self.fixed_sign)
            pair = (fixed, value) if self.fixed_index == 1 else (value, fixed)
            try:
                out.append((Control(*pair), dt))
            except TypeError:
                out.append((pair, dt))
        return out


def bang_arc(u1, u2, duration) -> Arc:
    return Arc(duration=duration, control=Control(to_fraction(u1), to_fraction(u2)))


def singular_arc(fixed_index: int, fixed_sign: int, profile) -> Arc:
    profile = tuple((v, d) for v, d in profile)
    total = sum(d for _, d in profile)
    return Arc(
        duration=total,
        fixed_index=fixed_index,
        fixed_sign=fixed_sign,
        profile=profile,
    )


@dataclass(frozen=True)
class ControlSchedule:
    """A start point plus an ordered list of arcs."""

    model: ModelId
    start: tuple
    arcs: tuple[Arc, ...]

    def total_time(self):
        total = Fraction(0)
        for arc in self.arcs:
            total = total + arc.duration
        return total

    def controls(self) -> list[Control]:
        if any(a.kind != "bang" for a in self.arcs):
            raise ValueError("schedule contains singular arcs")
        return [a.control for a in self.arcs]

    def durations(self) -> list:
        return [a.duration for a in self.arcs]

    def is_bang_bang(self) -> bool:
        return all(a.kind == "bang" for a in self.arcs)


@dataclass(frozen=True)
class StructuralRelation:
    """An identically-satisfied linear relation between phi and the state."""

    description: str
    check: Callable  # (phi tuple, point) -> residual scalar


@dataclass(frozen=True)
class Model:
    id: ModelId
    dim: int
    frame: tuple[PolyVectorField, PolyVectorField]
    aux_fields: tuple[PolyVectorField, ...]
    structural_relations: tuple[StructuralRelation, ...]
    arc_bound: int
    n_phi: int
    # anisotropic dilation weights: delta_lam scales coordinate i by
    # lam**weights[i] and trajectory time by lam
    weights: tuple[int, ...] = ()
    # phi3' = phi3_rate(u1, u2, phi_consts); the constant slots per model.
    phi3_rate: Callable = field(repr=False, default=None)
    flow: Callable = field(repr=False, default=None)
    covector_from_phi: Callable = field(repr=False, default=None)
    phi_from_covector: Callable = field(repr=False, default=None)

    def control_field(self, u: Control) -> PolyVectorField:
        return self.frame[0].scale(u.u1) + self.frame[1].scale(u.u2)

    def all_fields(self) -> tuple[PolyVectorField, ...]:
        return self.frame + self.aux_fields


def _heisenberg_frame():
    # X1 = dx - (y/2) dz, X2 = dy + (x/2) dz on R^3
    X1 = PolyVectorField.from_coeff_map(
        3, {0: {(0, 0, 0): 1}, 2: {(0, 1, 0): Fraction(-1, 2)}}
    )
    X2 = PolyVectorField.from_coeff_map(
        3, {1: {(0, 0, 0): 1}, 2: {(1, 0, 0): Fraction(1, 2)}}
    )
    return X1, X2


def _grushin_l1_frame():
    # Y1 = dx + x dy, Y2 = dx - x dy on R^2
    Y1 = PolyVectorField.from_coeff_map(2, {0: {(0, 0): 1}, 1: {(1, 0): 1}})
    Y2 = PolyVectorField.from_coeff_map(2, {0: {(0, 0): 1}, 1: {(1, 0): -1}})
    return Y1, Y2


def _grushin_linf_frame():
    # X1 = dx, X2 = x dy on R^2
    X1 = PolyVectorField.from_coeff_map(2, {0: {(0, 0): 1}})
    X2 = PolyVectorField.from_coeff_map(2, {1: {(1, 0): 1}})
    return X1, X2


def _martinet_l1_frame():
    # Y1 = dx + dy + y^2 dz, Y2 = dx - dy + y^2 dz on R^3
    Y1 = PolyVectorField.from_coeff_map(
        3, {0: {(0, 0, 0): 1}, 1: {(0, 0, 0): 1}, 2: {(0, 2, 0): 1}}
    )
    Y2 = PolyVectorField.from_coeff_map(
        3, {0: {(0, 0, 0): 1}, 1: {(0, 0, 0): -1}, 2: {(0, 2, 0): 1}}
    )
    return Y1, Y2


def _martinet_linf_frame():
    # X1 = dx + y^2 dz, X2 = dy on R^3
    X1 = PolyVectorField.from_coeff_map(3, {0: {(0, 0, 0): 1}, 2: {(0, 2, 0): 1}})
    X2 = PolyVectorField.from_coeff_map(3, {1: {(0, 0, 0): 1}})
    return X1, X2


def _flow_heisenberg(p, u1, u2, t):
    x, y, z = p
    return (
        x + u1 * t,
        y + u2 * t,
        z + (u2 * x - u1 * y) * Fraction(1, 2) * t,
    )


def _flow_grushin_l1(p, u1, u2, t):
    x, y = p
    a = u1 + u2
    d = u1 - u2
    return (x + a * t, y + d * (x * t + a * t * t * Fraction(1, 2)))


def _flow_grushin_linf(p, u1, u2, t):
    x, y = p
    return (x + u1 * t, y + u2 * (x * t + u1 * t * t * Fraction(1, 2)))


def _flow_martinet_l1(p, u1, u2, t):
    x, y, z = p
    a = u1 + u2
    d = u1 - u2
    area = y * y * t + y * d * t * t + d * d * t * t * t * Fraction(1, 3)
    return (x + a * t, y + d * t, z + a * area)


def _flow_martinet_linf(p, u1, u2, t):
    x, y, z = p
    area = y * y * t + y * u2 * t * t + u2 * u2 * t * t * t * Fraction(1, 3)
    return (x + u1 * t, y + u2 * t, z + u1 * area)


def _relation(description, fn) -> StructuralRelation:
    return StructuralRelation(description=description, check=fn)


def _build_heisenberg() -> Model:
    X1, X2 = _heisenberg_frame()
    X3 = bracket(X1, X2)
    _assert_commutes(X3, (X1, X2))
    return Model(
        id=ModelId.HEISENBERG_LINF,
        dim=3,
        weights=(1, 1, 2),
        frame=(X1, X2),
        aux_fields=(X3,),
        structural_relations=(),
        arc_bound=5,
        n_phi=3,
        phi3_rate=lambda u, consts: Fraction(0),
        flow=_flow_heisenberg,
        covector_from_phi=_cov_heisenberg,
        phi_from_covector=_phi_heisenberg,
    )


def _cov_heisenberg(phi, p):
    ph1, ph2, ph3 = phi
    x, y = p[0], p[1]
    return (
        ph1 + y * ph3 * Fraction(1, 2),
        ph2 - x * ph3 * Fraction(1, 2),
        ph3,
    )


def _phi_heisenberg(lam, p):
    lx, ly, lz = lam
    x, y = p[0], p[1]
    return (lx - y * lz * Fraction(1, 2), ly + x * lz * Fraction(1, 2), lz)


def _build_grushin_l1() -> Model:
    Y1, Y2 = _grushin_l1_frame()
    Y3 = bracket(Y1, Y2)  # = -2 dy; relations below hold for this field
    _assert_commutes(Y3, (Y1, Y2))
    rel = _relation(
        "phi2 - phi1 = x*phi3",
        lambda phi, p: phi[1] - phi[0] - p[0] * phi[2],
    )
    return Model(
        id=ModelId.GRUSHIN_L1,
        dim=2,
        weights=(1, 2),
        frame=(Y1, Y2),
        aux_fields=(Y3,),
        structural_relations=(rel,),
        arc_bound=3,
        n_phi=3,
        phi3_rate=lambda u, consts: Fraction(0),
        flow=_flow_grushin_l1,
        covector_from_phi=_cov_grushin_l1,
        phi_from_covector=_phi_grushin_l1,
    )


def _cov_grushin_l1(phi, p):
    ph1, ph2, ph3 = phi
    return ((ph1 + ph2) * Fraction(1, 2), ph3 * Fraction(-1, 2))


def _phi_grushin_l1(lam, p):
    lx, ly = lam
    x = p[0]
    return (lx + x * ly, lx - x * ly, -2 * ly)


def _build_grushin_linf() -> Model:
    X1, X2 = _grushin_linf_frame()
    X3 = bracket(X1, X2)  # = dy
    _assert_commutes(X3, (X1, X2))
    rel = _relation("phi2 = x*phi3", lambda phi, p: phi[1] - p[0] * phi[2])
    return Model(
        id=ModelId.GRUSHIN_LINF,
        dim=2,
        weights=(1, 2),
        frame=(X1, X2),
        aux_fields=(X3,),
        structural_relations=(rel,),
        arc_bound=3,
        n_phi=3,
        phi3_rate=lambda u, consts: Fraction(0),
        flow=_flow_grushin_linf,
        covector_from_phi=_cov_grushin_linf,
        phi_from_covector=_phi_grushin_linf,
    )


def _cov_grushin_linf(phi, p):
    return (phi[0], phi[2])


def _phi_grushin_linf(lam, p):
    lx, ly = lam
    return (lx, p[0] * ly, ly)


def _build_martinet_l1() -> Model:
    Y1, Y2 = _martinet_l1_frame()
    Y3 = bracket(Y1, Y2)  # 4y dz
    Y4 = bracket(Y1, Y3)  # 4 dz
    Y5 = bracket(Y2, Y3)  # -4 dz
    _assert_commutes(Y4, (Y1, Y2))
    _assert_commutes(Y5, (Y1, Y2))
    rels = (
        _relation("phi3 = y*phi4", lambda phi, p: phi[2] - p[1] * phi[3]),
        _relation("phi5 = -phi4", lambda phi, p: phi[4] + phi[3]),
    )
    return Model(
        id=ModelId.MARTINET_L1,
        dim=3,
        weights=(1, 1, 3),
        frame=(Y1, Y2),
        aux_fields=(Y3, Y4, Y5),
        structural_relations=rels,
        arc_bound=7,
        n_phi=5,
        phi3_rate=lambda u, consts: (u.u1 - u.u2) * consts[0],
        flow=_flow_martinet_l1,
        covector_from_phi=_cov_martinet_l1,
        phi_from_covector=_phi_martinet_l1,
    )


def _cov_martinet_l1(phi, p):
    ph1, ph2, ph3, ph4, ph5 = phi
    y = p[1]
    lz = ph4 * Fraction(1, 4)
    lx = (ph1 + ph2) * Fraction(1, 2) - y * y * lz
    ly = (ph1 - ph2) * Fraction(1, 2)
    return (lx, ly, lz)


def _phi_martinet_l1(lam, p):
    lx, ly, lz = lam
    y = p[1]
    ph1 = lx + ly + y * y * lz
    ph2 = lx - ly + y * y * lz
    return (ph1, ph2, 4 * y * lz, 4 * lz, -4 * lz)


def _build_martinet_linf() -> Model:
    X1, X2 = _martinet_linf_frame()
    X3 = bracket(X1, X2)  # -2y dz
    X4 = bracket(X1, X3)  # 0
    X5 = bracket(X2, X3)  # -2 dz
    _assert_commutes(X5, (X1, X2))
    rels = (
        _relation("phi3 = y*phi5", lambda phi, p: phi[2] - p[1] * phi[4]),
        _relation("phi4 = 0", lambda phi, p: phi[3]),
    )
    return Model(
        id=ModelId.MARTINET_LINF,
        dim=3,
        weights=(1, 1, 3),
        frame=(X1, X2),
        aux_fields=(X3, X4, X5),
        structural_relations=rels,
        arc_bound=6,
        n_phi=5,
        phi3_rate=lambda u, consts: u.u2 * consts[1],
        flow=_flow_martinet_linf,
        covector_from_phi=_cov_martinet_linf,
        phi_from_covector=_phi_martinet_linf,
    )


def _cov_martinet_linf(phi, p):
    ph1, ph2, ph3, ph4, ph5 = phi
    y = p[1]
    lz = ph5 * Fraction(-1, 2)
    return (ph1 - y * y * lz, ph2, lz)


def _phi_martinet_linf(lam, p):
    lx, ly, lz = lam
    y = p[1]
    return (lx + y * y * lz, ly, -2 * y * lz, Fraction(0), -2 * lz)


def _assert_commutes(field_, frame):
    for f in frame:
        if not bracket(f, field_).is_zero():
            raise AssertionError("bracket table violates expected nilpotency")


_BUILDERS = {
    ModelId.HEISENBERG_LINF: _build_heisenberg,
    ModelId.GRUSHIN_L1: _build_grushin_l1,
    ModelId.GRUSHIN_LINF: _build_grushin_linf,
    ModelId.MARTINET_L1: _build_martinet_l1,
    ModelId.MARTINET_LINF: _build_martinet_linf,
}

_CACHE: dict[ModelId, Model] = {}


def get_model(model_id: ModelId | str) -> Model:
    if isinstance(model_id, str):
        model_id = ModelId(model_id)
    if model_id not in _CACHE:
        _CACHE[model_id] = _BUILDERS[model_id]()
    return _CACHE[model_id]


def all_models() -> list[Model]:
    return [get_model(mid) for mid in ModelId]


def bang_flow(m: Model, p: Sequence, u: Control | tuple, t):
    """Exact endpoint of the constant-control flow from p for time t.

    Works over any commutative scalars (Fractions, sympy exacts, Polys),
    which is how symbolic patch maps are produced.  Control values outside
    the rational box are rejected; symbolic values pass through unchecked.
    """
    if isinstance(u, Control):
        u1, u2 = u.u1, u.u2
    else:
        try:
            u1, u2 = Control(*u).as_tuple()
        except TypeError:
            u1, u2 = u
    if len(p) != m.dim:
        raise DimensionError("point dimension mismatch")
    return m.flow(tuple(p), u1, u2, t)


def schedule_endpoint(m: Model, schedule: ControlSchedule):
    """Composition of constant-control flows over every arc piece."""
    p = tuple(schedule.start)
    for arc in schedule.arcs:
        for control, dt in arc.pieces():
            p = bang_flow(m, p, control, dt)
    return p


def schedule_states(m: Model, schedule: ControlSchedule) -> list:
    """States at arc boundaries (length = len(arcs) + 1)."""
    states = [tuple(schedule.start)]
    p = states[0]
    for arc in schedule.arcs:
        for control, dt in arc.pieces():
            p = bang_flow(m, p, control, dt)
        states.append(p)
    return states


def schedule_to_json(schedule: ControlSchedule) -> dict:
    arcs = []
    for arc in schedule.arcs:
        if arc.kind == "bang":
            arcs.append(
                {
                    "kind": "bang",
                    "control": [int(arc.control.u1), int(arc.control.u2)],
                    "duration": scalar_str(arc.duration),
                }
            )
        else:
            arcs.append(
                {
                    "kind": "singular",
                    "fixed_index": arc.fixed_index,
                    "fixed_sign": arc.fixed_sign,
                    "profile": [
                        {"value": scalar_str(v), "duration": scalar_str(d)}
                        for v, d in arc.profile
                    ],
                    "duration": scalar_str(arc.duration),
                }
            )
    return {
        "model": schedule.model.value,
        "start": [scalar_str(c) for c in schedule.start],
        "arcs": arcs,
    }


def schedule_from_json(data: dict) -> ControlSchedule:
    model_id = ModelId(data["model"])
    start = tuple(parse_scalar(s) for s in data["start"])
    arcs = []
    for entry in data["arcs"]:
        if entry["kind"] == "bang":
            u1, u2 = entry["control"]
            arcs.append(bang_arc(u1, u2, parse_scalar(entry["duration"])))
        elif entry["kind"] == "singular":
            profile = [
                (parse_scalar(p["value"]), parse_scalar(p["duration"]))
                for p in entry["profile"]
            ]
            arcs.append(
                singular_arc(entry["fixed_index"], entry["fixed_sign"], profile)
            )
        else:
            raise ValueError(f"unknown arc kind {entry['kind']!r}")
    return ControlSchedule(model=model_id, start=start, arcs=tuple(arcs))


def schedule_dumps(schedule: ControlSchedule) -> str:
    return json.dumps(schedule_to_json(schedule), sort_keys=True, indent=2)


def schedule_loads(text: str) -> ControlSchedule:
    return schedule_from_json(json.loads(text))
