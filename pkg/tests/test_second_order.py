"""Second-order certificates: Z fields, sigma tables, W spaces, verdicts."""

from __future__ import annotations

from fractions import Fraction

import pytest

from subfinsler import (
    ControlSchedule,
    ModelId,
    assemble_report,
    bang_arc,
    check_unique_lift,
    compute_Z_fields,
    fit_extremal_data,
    get_model,
)
from subfinsler.pmp import ExtremalLift
from subfinsler.second_order import NotBangBang
from subfinsler.vecfield import Poly, PolyVectorField

F = Fraction

H_CONTROLS = [(-1, -1), (-1, 1), (1, 1), (1, -1), (-1, -1), (-1, 1)]


@pytest.fixture(scope="module")
def h_six_arc():
    h = get_model(ModelId.HEISENBERG_LINF)
    fit = fit_extremal_data(h, H_CONTROLS, [F(1)] * 6)
    assert fit is not None
    return (h,) + fit


def test_heisenberg_six_arc_z_fields(h_six_arc):
    h, sched, _lift = h_six_arc
    X1, X2 = h.frame
    X3 = h.aux_fields[0]
    Xp, Xm = X1 + X2, X1 - X2
    Z = compute_Z_fields(h, sched, 3)
    assert Z[0] == -Xp - X3.scale(2)
    assert Z[1] == -Xm - X3.scale(2)
    assert Z[2] == Xp
    assert Z[3] == Xm
    assert Z[4] == -Xp - X3.scale(2)
    assert Z[5] == -Xm - X3.scale(2)


def test_heisenberg_six_arc_sigma_table(h_six_arc):
    h, sched, _ = h_six_arc
    ok, lift = check_unique_lift(h, sched)
    assert ok
    rep = assemble_report(h, sched, lift, 3, ok)
    two = {(0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)}
    minus_two = {(0, 3), (1, 4), (2, 5)}
    for key, value in rep.sigma.items():
        if key in two:
            assert value == 2
        elif key in minus_two:
            assert value == -2
        else:
            assert value == 0


def test_heisenberg_six_arc_W_and_verdict(h_six_arc):
    h, sched, _ = h_six_arc
    ok, lift = check_unique_lift(h, sched)
    assert ok and lift.phi[2] == -1  # phi3 normalized to -1
    rep = assemble_report(h, sched, lift, 3, ok)
    assert rep.W_basis == (
        (1, 0, 0, 0, -1, 0),
        (0, 1, 0, 0, 0, -1),
        (0, 0, 1, -1, 1, -1),
    )
    assert rep.q_value((F(1), F(1), F(0))) == 4
    assert rep.verdict == "NotOptimal"
    assert rep.witness.coords == (1, 1, 0)
    assert rep.witness.value == 4
    # witness evaluates positive under Q on the full index vector too
    alpha = rep.witness.alpha
    total = sum(
        rep.sigma[(i, l)] * alpha[i] * alpha[l]
        for (i, l) in rep.sigma
    )
    assert total == 4


def test_grushin_linf_four_arc_regression():
    g = get_model(ModelId.GRUSHIN_LINF)
    controls = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    fit = fit_extremal_data(g, controls, [F(1)] * 4)
    assert fit is not None
    sched, _ = fit
    ok, lift = check_unique_lift(g, sched)
    assert ok and lift.phi[2] == 1  # phi3 normalized to +1
    rep = assemble_report(g, sched, lift, 2, ok)
    assert rep.W_basis == ((1, 0, 0, -1), (0, 1, -1, 0))
    # Q(a0, a1) = 2 a0^2 + 4 a0 a1 - 2 a1^2
    assert rep.restricted_matrix == ((2, 2), (2, -2))
    assert rep.q_value((F(1), F(0))) == 2
    assert rep.verdict == "NotOptimal"
    assert rep.witness.coords == (1, 0)


def test_z_fields_identity_at_the_pivot_arcs():
    g = get_model(ModelId.GRUSHIN_LINF)
    controls = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    sched, _ = fit_extremal_data(g, controls, [F(1)] * 4)
    for j in (1, 2, 3):
        Z = compute_Z_fields(g, sched, j)
        assert Z[j] == g.control_field(sched.arcs[j].control)
        assert Z[j - 1] == g.control_field(sched.arcs[j - 1].control)


def test_boundary_switch_indices():
    # j = 1 leaves the backward recursion empty; j = K the forward one
    h = get_model(ModelId.HEISENBERG_LINF)
    sched, lift = fit_extremal_data(h, H_CONTROLS, [F(1)] * 6)
    for j in (1, 5):
        rep = assemble_report(h, sched, lift, j, True)
        assert rep.verdict == "NotOptimal"


def test_scaling_invariance_of_verdict(h_six_arc):
    h, sched, _ = h_six_arc
    ok, lift = check_unique_lift(h, sched)
    rep1 = assemble_report(h, sched, lift, 3, ok)
    rep2 = assemble_report(h, sched, lift.scaled(F(7, 3)), 3, ok)
    assert rep1.verdict == rep2.verdict == "NotOptimal"
    factor = F(7, 3)
    for key in rep1.sigma:
        assert rep2.sigma[key] == factor * rep1.sigma[key]


def test_uniqueness_failure_downgrades_verdict():
    h = get_model(ModelId.HEISENBERG_LINF)
    sched, lift = fit_extremal_data(h, H_CONTROLS, [F(1)] * 6)
    rep = assemble_report(h, sched, lift, 3, uniqueness_established=False)
    assert rep.verdict == "Inconclusive"


def test_single_bang_has_no_unique_lift():
    h = get_model(ModelId.HEISENBERG_LINF)
    sched = ControlSchedule(
        model=h.id, start=(0, 0, 0), arcs=(bang_arc(1, 1, F(1)),)
    )
    ok, lift = check_unique_lift(h, sched)
    assert not ok and lift is None


def test_non_bang_schedule_rejected():
    from subfinsler import singular_arc

    h = get_model(ModelId.HEISENBERG_LINF)
    sched = ControlSchedule(
        model=h.id,
        start=(0, 0, 0),
        arcs=(
            singular_arc(2, 1, [(F(0), F(1))]),
            bang_arc(1, 1, F(1)),
        ),
    )
    with pytest.raises(NotBangBang):
        compute_Z_fields(h, sched, 1)


def test_martinet_ni_symbolic_regression():
    """Type-NI five-arc certificate with symbolic interior durations."""
    m = get_model(ModelId.MARTINET_L1)
    NV = 5  # x, y, z, t1, t2
    t1, t2 = Poly.var(3, NV), Poly.var(4, NV)
    half, quarter = F(1, 2), F(1, 4)
    durs = [t2 * half, t1, t2, t1, t2 * half]
    controls = [(1, -1), (1, 1), (-1, 1), (1, 1), (1, -1)]
    sched = ControlSchedule(
        model=m.id,
        start=(F(0), F(0), F(0)),
        arcs=tuple(bang_arc(u1, u2, d) for (u1, u2), d in zip(controls, durs)),
    )
    phi0 = (
        t1 * t2 - t2 * t2 * quarter,
        -(t2 * t2 * quarter),
        Poly(NV),
        Poly.const(1, NV),
        Poly.const(-1, NV),
    )
    lift = ExtremalLift(phi=phi0, lambda0=t1 * t2)
    rep = assemble_report(m, sched, lift, 2, True, validate=False)
    assert rep.W_basis == ((1, 0, 0, 0, -1), (0, 1, 0, -1, 0))
    M = rep.restricted_matrix
    assert M[0][0] == t1 * 8
    assert M[0][1] == t2 * 4 and M[1][0] == t2 * 4
    assert M[1][1] == 0


def test_martinet_ni_numeric_instance():
    m = get_model(ModelId.MARTINET_L1)
    t1v, t2v = F(2, 3), F(1, 2)
    durs = [t2v / 2, t1v, t2v, t1v, t2v / 2]
    controls = [(1, -1), (1, 1), (-1, 1), (1, 1), (1, -1)]
    fit = fit_extremal_data(m, controls, durs)
    assert fit is not None
    sched, lift = fit
    ok, ulift = check_unique_lift(m, sched)
    assert ok
    rep = assemble_report(m, sched, ulift, 2, ok)
    assert rep.verdict == "NotOptimal"
    # Q = 8(t1 a0^2 + t2 a0 a1) under phi4 = 1 normalization
    assert rep.restricted_matrix == (
        (8 * t1v, 4 * t2v),
        (4 * t2v, 0),
    )


def test_martinet_type_T_symbolic_regression():
    """Six-arc type-T concatenation: Q carries the singular length."""
    m = get_model(ModelId.MARTINET_L1)
    NV = 5  # x, y, z, a, t_sing
    a, ts = Poly.var(3, NV), Poly.var(4, NV)
    half, quarter = F(1, 2), F(1, 4)
    durs = [a * half, a * half, a, ts, a, a * quarter]
    controls = [(1, -1), (1, 1), (-1, 1), (-1, -1), (-1, 1), (1, 1)]
    sched = ControlSchedule(
        model=m.id,
        start=(Poly.const(0, NV), a, Poly.const(0, NV)),
        arcs=tuple(bang_arc(u1, u2, d) for (u1, u2), d in zip(controls, durs)),
    )
    phi0 = (
        a * a * quarter,
        -(a * a) * F(3, 4),
        a,
        Poly.const(1, NV),
        Poly.const(-1, NV),
    )
    lift = ExtremalLift(phi=phi0, lambda0=a * a)
    rep = assemble_report(m, sched, lift, 3, True, validate=False)
    assert rep.W_basis == (
        (1, 0, 0, -1, 1, -1),
        (0, 1, 0, 0, 0, -1),
        (0, 0, 1, 0, -1, 0),
    )
    M = rep.restricted_matrix
    # Q = 2(a - 2 t_sing) a0^2 + 8 a a0a1 + 8 t_sing a0a2 - 4 t_sing a2^2
    assert M[0][0] == a * 2 - ts * 4
    assert M[0][1] == a * 4
    assert M[0][2] == ts * 4
    assert M[1][1] == 0 and M[1][2] == 0
    assert M[2][2] == ts * -4


def test_martinet_type_T_numeric_and_epsilon_witness():
    m = get_model(ModelId.MARTINET_L1)
    av, tsv = F(1, 2), F(1, 3)
    durs = [av / 2, av / 2, av, tsv, av, av / 4]
    controls = [(1, -1), (1, 1), (-1, 1), (-1, -1), (-1, 1), (1, 1)]
    fit = fit_extremal_data(m, controls, durs)
    assert fit is not None
    sched, lift = fit
    ok, ulift = check_unique_lift(m, sched)
    assert ok
    rep = assemble_report(m, sched, ulift, 3, ok)
    assert rep.verdict == "NotOptimal"
    # Q(eps, 1/eps, 0) = 2 eps^2 (a - 2 t_sing) + 8 a stays positive
    for eps in (F(1, 10), F(1, 100)):
        val = rep.q_value((eps, 1 / eps, F(0)))
        assert val == 2 * eps * eps * (av - 2 * tsv) + 8 * av
        assert val > 0


def _type_I_fixture(m, r, R, q, last=F(1, 2)):
    mu = F(1)
    c = (q * q - mu * mu * (R - r) ** 2) / (4 * mu)
    tb = c / (mu * (R - r))
    tc = (q - mu * (R - r)) / (2 * mu)
    td = c / q
    controls = [(1, -1), (-1, -1), (-1, 1), (1, 1), (1, -1), (-1, -1)]
    durs = [r, tb, tc, td, tc, last]
    start = (F(0), -(r + R), F(0))
    phi0 = (mu * r * R, mu * r * R - c, -mu * (r + R), mu, -mu)
    return controls, durs, start, phi0


def test_martinet_type_I_positive_witness():
    m = get_model(ModelId.MARTINET_L1)
    for (r, R, q) in ((F(1, 2), F(3, 2), F(5, 2)), (F(1, 3), F(2), F(3))):
        controls, durs, start, phi0 = _type_I_fixture(m, r, R, q)
        sched = ControlSchedule(
            model=m.id,
            start=start,
            arcs=tuple(
                bang_arc(u1, u2, d) for (u1, u2), d in zip(controls, durs)
            ),
        )
        ok, lift = check_unique_lift(m, sched)
        assert ok
        # y at the second switch is negative: a positive witness must exist
        rep = assemble_report(m, sched, lift, 2, ok)
        assert rep.verdict == "NotOptimal"
        assert rep.q_value(rep.witness.coords) > 0


def test_martinet_type_I_matches_printed_coefficients():
    # alpha0^2: -4(t1 - t3); alpha0 alpha1: -4 y(tau2);
    # alpha0 alpha2: -4(-2 t2 + 2 t3 + y); alpha2^2: -4(2 t2 - t3 - y)
    m = get_model(ModelId.MARTINET_L1)
    r, R, q = F(1, 2), F(3, 2), F(5, 2)
    controls, durs, start, phi0 = _type_I_fixture(m, r, R, q)
    sched = ControlSchedule(
        model=m.id,
        start=start,
        arcs=tuple(bang_arc(u1, u2, d) for (u1, u2), d in zip(controls, durs)),
    )
    ok, lift = check_unique_lift(m, sched)
    rep = assemble_report(m, sched, lift, 2, ok)
    t1, t2, t3 = durs[1], durs[2], durs[3]
    y2 = r - R
    M = rep.restricted_matrix
    assert M[0][0] == -4 * (t1 - t3)
    assert 2 * M[0][1] == -4 * y2
    assert 2 * M[0][2] == -4 * (-2 * t2 + 2 * t3 + y2)
    assert M[2][2] == -4 * (2 * t2 - t3 - y2)


def test_fit_extremal_rejects_inconsistent_durations():
    h = get_model(ModelId.HEISENBERG_LINF)
    # unequal internal arcs admit no lift for a 6-arc pattern
    bad = [F(1), F(1), F(2), F(1), F(1), F(1)]
    assert fit_extremal_data(h, H_CONTROLS, bad) is None
