"""Switching-function transport, arc classification, and extremal synthesis.

The switching vector phi = (phi1, phi2, phi3[, phi4, phi5]) obeys, on any
interval of constant control (u1, u2),

    phi1' = -u2 phi3,   phi2' = u1 phi3,   phi3' = c,

with c = 0 for the three-component models and c = u1 phi4 + u2 phi5 for
the five-component ones (phi4, phi5 constant).  Every transported arc is
therefore an exact polynomial of degree <= 2 in arc-local time, switch
times are exact roots, and all sign decisions are tolerance-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .exact import (
    Scalar,
    is_zero,
    scalar_str,
    sign,
    smallest_root_in,
    to_fraction,
)
from .models import (
    Arc,
    Control,
    ControlSchedule,
    Model,
    bang_arc,
    bang_flow,
    singular_arc,
)


class InvalidLift(ValueError):
    """The covector data violates the model's structural relations."""


class InternalInvariantError(AssertionError):
    """A state the switching dynamics cannot reach for a valid lift."""


@dataclass(frozen=True)
class ExtremalLift:
    """Switching values at a single time, plus the Hamiltonian level."""

    phi: tuple
    lambda0: Scalar

    def scaled(self, factor) -> "ExtremalLift":
        return ExtremalLift(
            phi=tuple(v * factor for v in self.phi),
            lambda0=self.lambda0 * factor,
        )


def make_lift(m: Model, phi: Sequence) -> ExtremalLift:
    """Build a lift from switching values; lambda0 = |phi1| + |phi2|."""
    phi = tuple(phi)
    if len(phi) != m.n_phi:
        raise InvalidLift(f"{m.id} needs {m.n_phi} switching values")
    if all(is_zero(v) for v in phi):
        raise InvalidLift("switching vector is identically zero")
    lam = abs_exact(phi[0]) + abs_exact(phi[1])
    return ExtremalLift(phi=phi, lambda0=lam)


def abs_exact(x):
    s = sign(x)
    return x if s >= 0 else -x


def validate_lift(m: Model, lift: ExtremalLift, point: Sequence) -> None:
    """Raise InvalidLift unless the lift satisfies the model relations at point."""
    if len(lift.phi) != m.n_phi:
        raise InvalidLift(f"{m.id} needs {m.n_phi} switching values")
    if all(is_zero(v) for v in lift.phi):
        raise InvalidLift("switching vector is identically zero")
    if not is_zero(lift.lambda0 - abs_exact(lift.phi[0]) - abs_exact(lift.phi[1])):
        raise InvalidLift("lambda0 != |phi1| + |phi2|")
    for rel in m.structural_relations:
        if not is_zero(rel.check(lift.phi, point)):
            raise InvalidLift(f"structural relation violated: {rel.description}")


@dataclass(frozen=True)
class LiftPiece:
    """phi on one constant-control piece, as degree<=2 coefficient rows."""

    t_start: Scalar
    duration: Scalar
    control: Control
    coeffs: tuple  # n_phi rows of (c0, c1, c2) in piece-local time
    point: tuple  # state at piece start
    arc_index: int

    def phi_at_local(self, tau) -> tuple:
        return tuple(c0 + c1 * tau + c2 * tau * tau for c0, c1, c2 in self.coeffs)


@dataclass(frozen=True)
class LiftPath:
    model_id: object
    lambda0: Scalar
    pieces: tuple[LiftPiece, ...]
    end_phi: tuple
    end_point: tuple

    def phi_at(self, t) -> tuple:
        for piece in self.pieces:
            local = t - piece.t_start
            if sign(local) >= 0 and sign(piece.duration - local) >= 0:
                return piece.phi_at_local(local)
        if not self.pieces:
            return self.end_phi
        raise ValueError("time outside the transported window")


@dataclass(frozen=True)
class ArcClass:
    kind: str  # "abnormal" | "singular" | "regular" | "bang_singular_overlap"
    singular_index: int | None = None

    def __str__(self):
        if self.kind == "singular":
            return f"singular({self.singular_index})"
        return self.kind


ABNORMAL = ArcClass("abnormal")
REGULAR = ArcClass("regular")


def _phi3_rate(m: Model, u: Control, phi: tuple):
    if m.n_phi == 3:
        return Fraction(0)
    return u.u1 * phi[3] + u.u2 * phi[4]


def _piece_coeffs(m: Model, phi: tuple, u: Control) -> tuple:
    """Coefficient rows of phi on a constant-control piece starting at phi."""
    zero = Fraction(0)
    rate = _phi3_rate(m, u, phi)
    half = Fraction(1, 2)
    rows = [
        (phi[0], -u.u2 * phi[2], -u.u2 * rate * half),
        (phi[1], u.u1 * phi[2], u.u1 * rate * half),
        (phi[2], rate, zero),
    ]
    for k in range(3, m.n_phi):
        rows.append((phi[k], zero, zero))
    return tuple(rows)


def _advance_phi(rows: tuple, tau) -> tuple:
    return tuple(c0 + c1 * tau + c2 * tau * tau for c0, c1, c2 in rows)


def transport(m: Model, lift0: ExtremalLift, schedule: ControlSchedule) -> LiftPath:
    """Exact phi trajectory along a schedule; validates the lift at start."""
    validate_lift(m, lift0, schedule.start)
    phi = tuple(lift0.phi)
    point = tuple(schedule.start)
    t = Fraction(0)
    pieces = []
    for arc_index, arc in enumerate(schedule.arcs):
        for control, dt in arc.pieces():
            rows = _piece_coeffs(m, phi, control)
            pieces.append(
                LiftPiece(
                    t_start=t,
                    duration=dt,
                    control=control,
                    coeffs=rows,
                    point=point,
                    arc_index=arc_index,
                )
            )
            phi = _advance_phi(rows, dt)
            point = bang_flow(m, point, control, dt)
            t = t + dt
    return LiftPath(
        model_id=m.id,
        lambda0=lift0.lambda0,
        pieces=tuple(pieces),
        end_phi=phi,
        end_point=point,
    )


def _piece_sign(row, duration) -> int:
    """Sign of a degree<=2 polynomial on the open piece, 0 if identically 0.

    Assumes the polynomial has no interior sign change (true for pieces
    produced by transport along genuine arcs); evaluated at the midpoint.
    """
    c0, c1, c2 = row
    if is_zero(c0) and is_zero(c1) and is_zero(c2):
        return 0
    half = duration * Fraction(1, 2)
    return sign(c0 + c1 * half + c2 * half * half)


def _row_has_interior_root(row, duration) -> bool:
    root, _ = smallest_root_in(row[0], row[1], row[2], duration)
    if root is None:
        return False
    return sign(duration - root) > 0


def classify(m: Model, path: LiftPath, arc_index: int) -> ArcClass:
    """Classify one (maximal) arc of a transported lift."""
    pieces = [p for p in path.pieces if p.arc_index == arc_index]
    if not pieces:
        raise ValueError("no such arc")
    if is_zero(path.lambda0):
        return ABNORMAL
    singular = []
    for j in (0, 1):
        if all(_piece_sign(p.coeffs[j], p.duration) == 0 for p in pieces):
            singular.append(j + 1)
    if len(singular) == 2:
        raise InternalInvariantError("both switching functions vanish, lambda0 > 0")
    if singular:
        bang = all(p.control.is_bang() for p in pieces)
        if bang:
            return ArcClass("bang_singular_overlap", singular_index=singular[0])
        return ArcClass("singular", singular_index=singular[0])
    for p in pieces:
        for j in (0, 1):
            if _row_has_interior_root(p.coeffs[j], p.duration):
                raise ValueError("interval crosses a switching time; not an arc")
    return REGULAR


@dataclass(frozen=True)
class SwitchEvent:
    time: Scalar
    component: int  # 1 or 2
    new_sign: int


@dataclass(frozen=True)
class SwitchingRecord:
    switch_times: tuple
    components: tuple[int, ...]
    new_signs: tuple[int, ...]
    arc_types: tuple[ArcClass, ...]
    lambda0: Scalar
    internal_arc_length: Scalar | None = None

    def to_json(self) -> dict:
        return {
            "switch_times": [scalar_str(t) for t in self.switch_times],
            "components": list(self.components),
            "new_signs": list(self.new_signs),
            "arc_types": [str(a) for a in self.arc_types],
            "lambda0": scalar_str(self.lambda0),
            "internal_arc_length": (
                None
                if self.internal_arc_length is None
                else scalar_str(self.internal_arc_length)
            ),
        }


@dataclass(frozen=True)
class SingularPolicy:
    """Choices the sign rule leaves open.

    `tangential_length(ctx)` gives the singular-arc duration inserted at a
    tangential zero (default 0: pure bang continuation).  `free_profile(ctx,
    remaining)` supplies the free control component on an identically
    singular stretch as (value, duration) pieces.
    """

    tangential_length: Callable = field(default=lambda ctx: Fraction(0))
    free_profile: Callable = field(
        default=lambda ctx, remaining: [(Fraction(0), remaining)]
    )


DEFAULT_POLICY = SingularPolicy()


@dataclass(frozen=True)
class SingularContext:
    model: Model
    time: Scalar
    point: tuple
    phi: tuple
    singular_component: int
    forced_value: Fraction | None


def _derivative_sign(m: Model, phi: tuple, j: int, other_sign: int) -> int:
    """Sign of d(phi_j)/dt at a zero of phi_j, given the other control."""
    if j == 1:
        return sign(-other_sign * phi[2])
    return sign(other_sign * phi[2])


def _second_derivative(m: Model, phi: tuple, j: int, u1, u2):
    rate = u1 * phi[3] + u2 * phi[4] if m.n_phi == 5 else Fraction(0)
    return -u2 * rate if j == 1 else u1 * rate


def _resolve(m: Model, phi: tuple, t_remaining):
    """Decide the control (or singular continuation) at the current state.

    Returns ("bang", Control) or ("singular", j, forced_value|None).
    """
    s1, s2 = sign(phi[0]), sign(phi[1])
    if s1 != 0 and s2 != 0:
        return ("bang", Control(Fraction(s1), Fraction(s2)))
    if s1 == 0 and s2 == 0:
        raise InvalidLift("abnormal lift: synthesis requires lambda0 > 0")
    j = 1 if s1 == 0 else 2
    other = s2 if j == 1 else s1
    d = _derivative_sign(m, phi, j, other)
    if d != 0:
        u = (Fraction(d), Fraction(other)) if j == 1 else (Fraction(other), Fraction(d))
        return ("bang", Control(*u))
    # phi_j = 0 with zero derivative: singular continuation or tangential exit
    if m.n_phi == 3:
        # phi3 = 0 here, so phi_j stays zero under any control: free singular
        return ("singular", j, None)
    if m.id.value == "martinet-l1":
        ph4 = phi[3]
        if is_zero(ph4):
            return ("singular", j, None)
        # singular requires the free component to equal the bang one
        return ("singular", j, Fraction(other))
    # martinet-linf
    ph5 = phi[4]
    if is_zero(ph5):
        return ("singular", j, None)
    if j == 2:
        # free component u2 forced to 0: the arc rides the plane {y=0}
        return ("singular", j, Fraction(0))
    # phi1 tangential with phi5 != 0: no singular continuation exists
    eps = sign(-ph5)
    return ("bang", Control(Fraction(eps), Fraction(other)))


def _exit_control(m: Model, phi: tuple, j: int):
    """Bang control continuing after a singular stretch, if one exists."""
    other = sign(phi[1]) if j == 1 else sign(phi[0])
    if other == 0:
        raise InternalInvariantError("singular exit with both phi zero")
    for eps in (1, -1):
        u1, u2 = (eps, other) if j == 1 else (other, eps)
        dd = _second_derivative(m, phi, j, Fraction(u1), Fraction(u2))
        if sign(dd) == eps:
            return Control(Fraction(u1), Fraction(u2))
    return None


def synthesize_extremal(
    m: Model,
    p0: Sequence,
    lift0: ExtremalLift,
    t_max,
    singular_policy: SingularPolicy | None = None,
    max_arcs: int = 10_000,
):
    """Forward synthesis: integrate the sign rule with exact switch roots.

    Returns (ControlSchedule, SwitchingRecord).  The initial lift is
    normalized to lambda0 = 1.  Where the sign rule leaves freedom the
    policy decides; the default policy inserts zero-length singular arcs
    and drives free components with 0.
    """
    policy = singular_policy or DEFAULT_POLICY
    validate_lift(m, lift0, p0)
    if is_zero(lift0.lambda0):
        raise InvalidLift("abnormal lift: synthesis requires lambda0 > 0")
    if not is_zero(lift0.lambda0 - 1):
        lift0 = lift0.scaled(Fraction(1, 1) / lift0.lambda0)

    phi = tuple(lift0.phi)
    point = tuple(p0)
    t = Fraction(0)
    arcs: list[Arc] = []
    events: list[SwitchEvent] = []
    forced_control: Control | None = None

    for _ in range(max_arcs):
        remaining = t_max - t
        if sign(remaining) <= 0:
            break
        if forced_control is not None:
            kind = ("bang", forced_control)
            forced_control = None
        else:
            kind = _resolve(m, phi, remaining)
        if kind[0] == "singular":
            _, j, forced = kind
            ctx = SingularContext(
                model=m,
                time=t,
                point=point,
                phi=phi,
                singular_component=j,
                forced_value=forced,
            )
            if forced is not None:
                length = policy.tangential_length(ctx)
                length = _clip(length, remaining)
                exit_ctrl = _exit_control(m, phi, j)
                if exit_ctrl is None:
                    length = remaining
                if sign(length) > 0:
                    other = sign(phi[1]) if j == 1 else sign(phi[0])
                    u1, u2 = (forced, Fraction(other)) if j == 1 else (
                        Fraction(other),
                        forced,
                    )
                    if abs(forced) == 1:
                        arcs.append(bang_arc(u1, u2, length))
                    else:
                        fixed_index = 2 if j == 1 else 1
                        arcs.append(
                            singular_arc(fixed_index, other, [(forced, length)])
                        )
                    u = Control(u1, u2)
                    point = bang_flow(m, point, u, length)
                    t = t + length
                forced_control = exit_ctrl
                continue
            pieces = policy.free_profile(ctx, remaining)
            pieces = _clip_profile(pieces, remaining)
            other = sign(phi[1]) if j == 1 else sign(phi[0])
            fixed_index = 2 if j == 1 else 1
            arcs.append(singular_arc(fixed_index, other, pieces))
            for value, dt in pieces:
                u = (
                    Control(value, Fraction(other))
                    if j == 1
                    else Control(Fraction(other), value)
                )
                point = bang_flow(m, point, u, dt)
                phi = _advance_phi(_piece_coeffs(m, phi, u), dt)
                t = t + dt
            continue

        u = kind[1]
        rows = _piece_coeffs(m, phi, u)
        best = None
        best_j = None
        for j in (0, 1):
            root, _double = smallest_root_in(*rows[j], remaining)
            if root is None:
                continue
            if best is None or sign(root - best) < 0:
                best, best_j = root, j + 1
            elif is_zero(root - best):
                raise InternalInvariantError(
                    "simultaneous switching zeros with lambda0 > 0"
                )
        dur = remaining if best is None else best
        arcs.append(bang_arc(u.u1, u.u2, dur))
        phi = _advance_phi(rows, dur)
        point = bang_flow(m, point, u, dur)
        t = t + dur
        if best is not None and sign(t_max - t) > 0:
            new_sign = _post_switch_sign(m, phi, best_j, u)
            events.append(SwitchEvent(time=t, component=best_j, new_sign=new_sign))
    else:
        raise InternalInvariantError("synthesis failed to reach the horizon")

    arc_types = _record_arc_types(m, lift0, p0, arcs)
    record = SwitchingRecord(
        switch_times=tuple(e.time for e in events),
        components=tuple(e.component for e in events),
        new_signs=tuple(e.new_sign for e in events),
        arc_types=arc_types,
        lambda0=lift0.lambda0,
        internal_arc_length=_internal_length(arcs),
    )
    return ControlSchedule(model=m.id, start=tuple(p0), arcs=tuple(arcs)), record


def _post_switch_sign(m: Model, phi: tuple, component: int, u_prev: Control) -> int:
    j = component - 1
    other = sign(phi[1 - j])
    d = _derivative_sign(m, phi, component, other)
    if d != 0:
        return d
    return 0


def _clip(length, remaining):
    if sign(length) < 0:
        raise ValueError("singular length must be nonnegative")
    return length if sign(remaining - length) >= 0 else remaining


def _clip_profile(pieces, remaining):
    out = []
    left = remaining
    for value, dt in pieces:
        if sign(left) <= 0:
            break
        value = to_fraction(value)
        if abs(value) > 1:
            raise ValueError("free profile value outside [-1, 1]")
        dt = _clip(dt, left)
        if sign(dt) > 0:
            out.append((value, dt))
            left = left - dt
    if sign(left) > 0:
        out.append((Fraction(0), left))
    return out


def _record_arc_types(m, lift0, p0, arcs):
    if not arcs:
        return ()
    schedule = ControlSchedule(model=m.id, start=tuple(p0), arcs=tuple(arcs))
    path = transport(m, lift0, schedule)
    return tuple(classify(m, path, i) for i in range(len(arcs)))


def _internal_length(arcs) -> Scalar | None:
    if len(arcs) < 3:
        return None
    internal = [a.duration for a in arcs[1:-1]]
    first = internal[0]
    if all(is_zero(d - first) for d in internal[1:]):
        return first
    return None


@dataclass(frozen=True)
class PmpViolation:
    kind: str
    arc_index: int
    detail: str


@dataclass(frozen=True)
class PmpReport:
    violations: tuple[PmpViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"kind": v.kind, "arc_index": v.arc_index, "detail": v.detail}
                for v in self.violations
            ],
        }


def check_pmp_invariants(
    m: Model, path: LiftPath, schedule: ControlSchedule
) -> PmpReport:
    """Exact diagnostic: Hamiltonian level, sign rule, constancy, relations."""
    bad: list[PmpViolation] = []
    sample_fracs = (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1))
    for piece in path.pieces:
        idx = piece.arc_index
        # |phi1| + |phi2| = lambda0, checked exactly at rational sample times
        for frac in sample_fracs:
            tau = piece.duration * frac
            ph = piece.phi_at_local(tau)
            if not is_zero(abs_exact(ph[0]) + abs_exact(ph[1]) - path.lambda0):
                bad.append(
                    PmpViolation("hamiltonian_level", idx, "|phi1|+|phi2| != lambda0")
                )
                break
        # sign rule on components that do not vanish identically
        for j in (1, 2):
            row = piece.coeffs[j - 1]
            if all(is_zero(c) for c in row):
                continue
            u = piece.control.u1 if j == 1 else piece.control.u2
            if _row_has_interior_root(row, piece.duration):
                bad.append(
                    PmpViolation(
                        "sign_rule", idx, f"phi{j} changes sign inside an arc"
                    )
                )
                continue
            s = _piece_sign(row, piece.duration)
            if s != 0 and not is_zero(u - s):
                bad.append(PmpViolation("sign_rule", idx, f"u{j} != sign(phi{j})"))
        # constancy of the bracket components
        for k in range(2, m.n_phi):
            row = piece.coeffs[k]
            if k == 2 and m.n_phi == 5:
                if not is_zero(row[2]):
                    bad.append(PmpViolation("constancy", idx, "phi3 not affine"))
            elif not is_zero(row[1]) or not is_zero(row[2]):
                name = f"phi{k + 1}"
                bad.append(PmpViolation("constancy", idx, f"{name} not constant"))
        # structural relations, checked exactly at 4 times (degree <= 3)
        for rel in m.structural_relations:
            dur = piece.duration
            for frac in (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1)):
                tau = dur * frac
                phi_t = piece.phi_at_local(tau)
                pt = bang_flow(m, piece.point, piece.control, tau)
                if not is_zero(rel.check(phi_t, pt)):
                    bad.append(
                        PmpViolation("structural", idx, rel.description)
                    )
                    break
    return PmpReport(violations=tuple(bad))
