"""Second-order non-optimality certificates for bang-bang extremals.

Given a bang-bang schedule with switching times tau_1 < ... < tau_K and a
reference index j, the arc fields Y_i are pushed to tau_j through
terminating ad-exponential conjugations, producing fields Z_i.  The
quadratic form

    Q(a) = sum_{i<l} a_i a_l < lam(tau_j), [Z_i, Z_l](gamma(tau_j)) >

restricted to the space W = {a : sum a_i = 0, sum a_i Z_i(gamma(tau_j)) = 0}
certifies non-optimality whenever it takes a positive value, provided the
extremal lift is unique up to a positive scalar.

Everything on this path is exact: durations may even be formal parameters,
in which case sigma and the restricted matrix come out as polynomials and
the verdict is deferred to numeric instantiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import linalg
from .exact import is_rational, is_zero, scalar_str, sign, to_fraction
from .models import Control, ControlSchedule, Model, bang_arc, bang_flow
from .pmp import (
    ExtremalLift,
    InvalidLift,
    _advance_phi,
    _piece_coeffs,
    check_pmp_invariants,
    make_lift,
    transport,
)
from .vecfield import Poly, PolyVectorField, ad_exp, bracket, evaluate


class NotBangBang(ValueError):
    """The schedule is not a clean bang-bang concatenation."""


def _bang_controls(schedule: ControlSchedule) -> list[Control]:
    controls = []
    for arc in schedule.arcs:
        if arc.kind != "bang" or not arc.control.is_bang():
            raise NotBangBang("schedule contains a non-bang arc")
        if not is_rational(arc.duration) and not isinstance(arc.duration, Poly):
            raise NotBangBang("durations must be exact rationals or parameters")
        controls.append(arc.control)
    if len(controls) < 2:
        raise NotBangBang("need at least one switch")
    for prev, cur in zip(controls, controls[1:]):
        delta = (prev.u1 != cur.u1) + (prev.u2 != cur.u2)
        if delta != 1:
            raise NotBangBang("consecutive arcs must switch exactly one component")
    return controls


def _switch_components(controls: Sequence[Control]) -> list[int]:
    out = []
    for prev, cur in zip(controls, controls[1:]):
        out.append(1 if prev.u1 != cur.u1 else 2)
    return out


def _param_ring(m: Model, durations) -> int | None:
    """Shared ring size when any duration is a formal parameter."""
    nvars = None
    for d in durations:
        if isinstance(d, Poly):
            if d.nvars <= m.dim:
                raise NotBangBang(
                    "parameter durations must live on a ring extending the state"
                )
            if nvars is None:
                nvars = d.nvars
            elif nvars != d.nvars:
                raise NotBangBang("parameter durations over different rings")
    return nvars


def compute_Z_fields(
    m: Model, schedule: ControlSchedule, j: int
) -> list[PolyVectorField]:
    """Arc fields conjugated to the j-th switching time (1 <= j <= K)."""
    controls = _bang_controls(schedule)
    K = len(controls) - 1
    if not 1 <= j <= K:
        raise ValueError(f"switch index j={j} outside 1..{K}")
    durations = schedule.durations()
    nvars = _param_ring(m, durations)
    fields = [m.control_field(u) for u in controls]
    if nvars is not None:
        fields = [f.with_params(nvars) for f in fields]
    Z: list[PolyVectorField | None] = [None] * (K + 1)
    Z[j] = fields[j]
    Z[j - 1] = fields[j - 1]
    for i in range(j + 1, K + 1):
        w = fields[i]
        for k in range(i - 1, j - 1, -1):
            w = ad_exp(fields[k], _as_ring_scalar(durations[k], nvars), w)
        Z[i] = w
    for i in range(j - 2, -1, -1):
        w = fields[i]
        for k in range(i + 1, j):
            w = ad_exp(fields[k], -_as_ring_scalar(durations[k], nvars), w)
        Z[i] = w
    return Z


def _as_ring_scalar(d, nvars):
    if isinstance(d, Poly):
        return d
    return to_fraction(d)


def _nodes(m: Model, schedule: ControlSchedule, phi0: tuple):
    """phi values and states at every arc boundary (no sign decisions)."""
    phi = tuple(phi0)
    point = tuple(schedule.start)
    phis = [phi]
    points = [point]
    for arc in schedule.arcs:
        for control, dt in arc.pieces():
            phi = _advance_phi(_piece_coeffs(m, phi, control), dt)
            point = bang_flow(m, point, control, dt)
        phis.append(phi)
        points.append(point)
    return phis, points


@dataclass(frozen=True)
class Witness:
    coords: tuple  # coefficients on the W basis
    alpha: tuple  # the full index vector in W
    value: Fraction


@dataclass(frozen=True)
class QFormReport:
    j: int
    sigma: dict
    W_basis: tuple
    restricted_matrix: tuple
    verdict: str  # "NotOptimal" | "Inconclusive"
    witness: Witness | None
    uniqueness_established: bool
    notes: tuple[str, ...] = ()

    def q_value(self, coords) -> Fraction:
        M = self.restricted_matrix
        n = len(M)
        total = Fraction(0)
        for a in range(n):
            for b in range(n):
                total = total + M[a][b] * coords[a] * coords[b]
        return total

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "sigma": {
                f"{i},{l}": _entry_str(v) for (i, l), v in sorted(self.sigma.items())
            },
            "W_basis": [[_entry_str(x) for x in vec] for vec in self.W_basis],
            "restricted_matrix": [
                [_entry_str(x) for x in row] for row in self.restricted_matrix
            ],
            "verdict": self.verdict,
            "witness": (
                None
                if self.witness is None
                else {
                    "coords": [_entry_str(x) for x in self.witness.coords],
                    "alpha": [_entry_str(x) for x in self.witness.alpha],
                    "value": _entry_str(self.witness.value),
                }
            ),
            "uniqueness_established": self.uniqueness_established,
            "notes": list(self.notes),
        }


def _entry_str(x) -> str:
    if isinstance(x, Poly):
        return str(x)
    return scalar_str(x)


def assemble_report(
    m: Model,
    schedule: ControlSchedule,
    lift: ExtremalLift,
    j: int,
    uniqueness_established: bool,
    validate: bool = True,
) -> QFormReport:
    """Sigma pairings, the space W, the restricted form, and the verdict.

    With `validate` the lift is transported and checked against the PMP
    invariants first (rational data only).  Parameterized durations skip
    the witness search; the verdict is then decided on instantiation.
    """
    if validate:
        path = transport(m, lift, schedule)
        report = check_pmp_invariants(m, path, schedule)
        if not report.ok:
            raise InvalidLift(
                "lift fails PMP invariants: "
                + "; ".join(v.detail for v in report.violations[:3])
            )
    Z = compute_Z_fields(m, schedule, j)
    K = len(Z) - 1
    durations = schedule.durations()
    nvars = _param_ring(m, durations)
    symbolic = nvars is not None

    phis, points = _nodes(m, schedule, tuple(lift.phi))
    phi_j = phis[j]
    point_j = points[j]
    lam = m.covector_from_phi(phi_j, point_j)

    if symbolic:
        eval_point = list(point_j) + [
            Poly.var(k, nvars) for k in range(m.dim, nvars)
        ]
        eval_point = [
            p if isinstance(p, Poly) else Poly.const(p, nvars) for p in eval_point
        ]
    else:
        eval_point = list(point_j)

    sigma = {}
    for i in range(K + 1):
        for l in range(i + 1, K + 1):
            br = bracket(Z[i], Z[l])
            vals = evaluate(br, eval_point)
            total = None
            for lc, v in zip(lam, vals):
                term = lc * v
                total = term if total is None else total + term
            sigma[(i, l)] = _tidy(total)

    rows = [[Fraction(1)] * (K + 1)]
    for c in range(m.dim):
        rows.append([evaluate(Z[i], eval_point)[c] for i in range(K + 1)])
    basis = linalg.nullspace_right_pivots(rows)

    matrix = []
    half = Fraction(1, 2)
    for a in range(len(basis)):
        row = []
        for b in range(len(basis)):
            acc = None
            for (i, l), s in sigma.items():
                term = s * (basis[a][i] * basis[b][l] + basis[a][l] * basis[b][i])
                acc = term if acc is None else acc + term
            val = Fraction(0) if acc is None else acc * half
            row.append(_tidy(val))
        matrix.append(tuple(row))

    notes = []
    verdict = "Inconclusive"
    witness = None
    if symbolic:
        notes.append("parameterized durations: verdict deferred to instantiation")
    elif not uniqueness_established:
        notes.append("lift not unique: second-order verdict not applicable")
    else:
        found = linalg.positive_witness([list(r) for r in matrix])
        if found is not None:
            coords, value = found
            alpha = [Fraction(0)] * (K + 1)
            for c, vec in zip(coords, basis):
                for idx in range(K + 1):
                    alpha[idx] += c * vec[idx]
            witness = Witness(
                coords=tuple(coords), alpha=tuple(alpha), value=value
            )
            verdict = "NotOptimal"

    return QFormReport(
        j=j,
        sigma=sigma,
        W_basis=tuple(tuple(v) for v in basis),
        restricted_matrix=tuple(matrix),
        verdict=verdict,
        witness=witness,
        uniqueness_established=uniqueness_established,
        notes=tuple(notes),
    )


def _tidy(x):
    """Collapse constant Polys to Fractions."""
    if isinstance(x, Poly):
        if x.is_zero():
            return Fraction(0)
        if x.degree() == 0:
            return x.terms[(0,) * x.nvars]
    return x


def _phi0_unknowns(m: Model, start, with_relations: bool):
    """Initial phi as linear Polys in the lift unknowns.

    Returns (phi0 tuple of Polys over the unknown ring, ring size).
    With `with_relations` the structural relations at `start` are baked
    in (fewer unknowns); without, phi3 is its own unknown and the start
    point is recovered afterwards.
    """
    mid = m.id.value
    if mid == "heisenberg-linf":
        n = 3
        p = [Poly.var(k, n) for k in range(n)]
        return (p[0], p[1], p[2]), n
    if mid in ("grushin-l1", "grushin-linf"):
        if with_relations:
            n = 2
            p = [Poly.var(k, n) for k in range(n)]
            x0 = to_fraction(start[0])
            if mid == "grushin-l1":
                return (p[0], p[0] + x0 * p[1], p[1]), n
            return (p[0], x0 * p[1], p[1]), n
        n = 3
        p = [Poly.var(k, n) for k in range(n)]
        return (p[0], p[1], p[2]), n
    if mid == "martinet-l1":
        if with_relations:
            n = 3
            p = [Poly.var(k, n) for k in range(n)]
            y0 = to_fraction(start[1])
            return (p[0], p[1], y0 * p[2], p[2], -p[2]), n
        n = 4
        p = [Poly.var(k, n) for k in range(n)]
        return (p[0], p[1], p[2], p[3], -p[3]), n
    if mid == "martinet-linf":
        if with_relations:
            n = 3
            p = [Poly.var(k, n) for k in range(n)]
            y0 = to_fraction(start[1])
            zero = Poly(n)
            return (p[0], p[1], y0 * p[2], zero, p[2]), n
        n = 4
        p = [Poly.var(k, n) for k in range(n)]
        zero = Poly(n)
        return (p[0], p[1], p[2], zero, p[3]), n
    raise ValueError(f"unknown model {mid}")


def _switch_condition_rows(m: Model, schedule: ControlSchedule, phi0, ring):
    controls = _bang_controls(schedule)
    comps = _switch_components(controls)
    phis, _points = _nodes(m, schedule, phi0)
    rows = []
    for k, comp in enumerate(comps, start=1):
        value = phis[k][comp - 1]
        poly = value if isinstance(value, Poly) else Poly.const(value, ring)
        row = []
        for unk in range(ring):
            exps = tuple(1 if q == unk else 0 for q in range(ring))
            row.append(poly.terms.get(exps, Fraction(0)))
        rows.append(row)
    return rows


def _lift_space(m: Model, schedule: ControlSchedule, with_relations: bool):
    phi0, ring = _phi0_unknowns(m, schedule.start, with_relations)
    rows = _switch_condition_rows(m, schedule, phi0, ring)
    basis = linalg.nullspace_right_pivots(rows)
    return phi0, ring, basis


def _instantiate(phi0, values) -> tuple:
    out = []
    for p in phi0:
        out.append(p.evaluate(list(values)) if isinstance(p, Poly) else p)
    return tuple(out)


def _oriented_valid_lift(m: Model, schedule: ControlSchedule, phi_vec):
    """Return the sign-rule-consistent orientation of phi_vec, if any."""
    for flip in (1, -1):
        phi = tuple(v * flip for v in phi_vec)
        if all(is_zero(v) for v in phi):
            return None
        try:
            lift = make_lift(m, phi)
            path = transport(m, lift, schedule)
        except InvalidLift:
            continue
        if check_pmp_invariants(m, path, schedule).ok:
            return lift
    return None


def _normalized(m: Model, lift: ExtremalLift) -> ExtremalLift:
    """Scale so the model's constant bracket value is +-1 (else lambda0=1)."""
    anchor = {
        "heisenberg-linf": 2,
        "grushin-l1": 2,
        "grushin-linf": 2,
        "martinet-l1": 3,
        "martinet-linf": 4,
    }[m.id.value]
    ref = lift.phi[anchor]
    if not is_zero(ref):
        return lift.scaled(Fraction(1) / abs_val(ref))
    return lift.scaled(Fraction(1) / lift.lambda0)


def abs_val(x):
    return x if sign(x) >= 0 else -x


def check_unique_lift(m: Model, schedule: ControlSchedule, j: int | None = None):
    """Does the switch structure pin the lift up to a positive scalar?

    Returns (True, normalized lift at the schedule start) when the space
    of initial covectors compatible with every switching condition and the
    structural relations is one-dimensional and admits a sign-rule-valid
    orientation; (False, None) otherwise.
    """
    if not all(is_rational(c) for c in schedule.start) or not all(
        is_rational(d) for d in schedule.durations()
    ):
        raise NotBangBang("uniqueness check needs rational data")
    if len(schedule.arcs) < 2:
        return False, None
    try:
        phi0, ring, basis = _lift_space(m, schedule, with_relations=True)
    except NotBangBang:
        return False, None
    if len(basis) != 1:
        return False, None
    phi_vec = _instantiate(phi0, basis[0])
    lift = _oriented_valid_lift(m, schedule, phi_vec)
    if lift is None:
        return False, None
    return True, _normalized(m, lift)


def fit_extremal_data(m: Model, controls, durations):
    """Schedule + unique lift consistent with a control/duration pattern.

    Switching conditions constrain the covector alone; the structural
    relations then dictate which start coordinate (x for Grushin, y for
    Martinet) makes the pattern extremal.  Returns (schedule, lift) or
    None when the pattern admits no one-dimensional valid lift space.
    """
    start0 = tuple(Fraction(0) for _ in range(m.dim))
    probe = ControlSchedule(
        model=m.id,
        start=start0,
        arcs=tuple(_mk_bang(u, d) for u, d in zip(controls, durations)),
    )
    phi0, ring, basis = _lift_space(m, probe, with_relations=False)
    if len(basis) != 1:
        return None
    phi_vec = _instantiate(phi0, basis[0])
    mid = m.id.value
    start = list(start0)
    if mid in ("grushin-l1", "grushin-linf"):
        ph1, ph2, ph3 = phi_vec
        if not is_zero(ph3):
            start[0] = (ph2 - ph1) / ph3 if mid == "grushin-l1" else ph2 / ph3
        elif not is_zero(ph2 - ph1 if mid == "grushin-l1" else ph2):
            return None
    elif mid in ("martinet-l1", "martinet-linf"):
        anchor = phi_vec[3] if mid == "martinet-l1" else phi_vec[4]
        if not is_zero(anchor):
            start[1] = phi_vec[2] / anchor
        elif not is_zero(phi_vec[2]):
            return None
    schedule = ControlSchedule(
        model=m.id,
        start=tuple(start),
        arcs=tuple(_mk_bang(u, d) for u, d in zip(controls, durations)),
    )
    lift = _oriented_valid_lift(m, schedule, phi_vec)
    if lift is None:
        return None
    return schedule, _normalized(m, lift)


def _mk_bang(u, duration):
    if isinstance(u, Control):
        return bang_arc(u.u1, u.u2, duration)
    return bang_arc(u[0], u[1], duration)
