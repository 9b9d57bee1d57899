"""Acceptance gate: one test per criterion, at the stated tolerances.

Each test prints a single PASS line with its runtime so the suite doubles
as a checklist.  Budgets are asserted.
"""

from __future__ import annotations

import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from subfinsler import (
    Control,
    ControlSchedule,
    ModelId,
    SingularPolicy,
    all_models,
    assemble_report,
    bang_arc,
    bang_flow,
    check_pmp_invariants,
    check_unique_lift,
    get_model,
    make_lift,
    schedule_endpoint,
    singular_arc,
    synthesize_extremal,
    transport,
)
from subfinsler import export
from subfinsler.exact import scalar_to_float
from subfinsler.oracle import (
    GridConfig,
    propagate,
    refine_bang_schedule,
    _enumerate_candidates,
    _singular_search,
)
from subfinsler.pmp import ExtremalLift
from subfinsler.second_order import fit_extremal_data
from subfinsler.synthesis import minimal_time, trace_sphere
from subfinsler.vecfield import Poly, rk_integrate

F = Fraction


def _report(name: str, t0: float, budget: float, detail: str = ""):
    dt = time.time() - t0
    assert dt < budget, f"{name} exceeded its {budget}s budget: {dt:.1f}s"
    print(f"PASS {name} [{dt:.1f}s / {budget:.0f}s] {detail}")


def _alt(c0, first, k):
    out = [tuple(c0)]
    cur = list(c0)
    comp = first
    for _ in range(k - 1):
        cur[comp - 1] = -cur[comp - 1]
        out.append(tuple(cur))
        comp = 3 - comp
    return out


def _seq_controls(c0, seq):
    out = [tuple(c0)]
    cur = list(c0)
    for comp in seq:
        cur[comp - 1] = -cur[comp - 1]
        out.append(tuple(cur))
    return out


def test_criterion_1_heisenberg_qform_regression():
    t0 = time.time()
    h = get_model(ModelId.HEISENBERG_LINF)
    controls = [(-1, -1), (-1, 1), (1, 1), (1, -1), (-1, -1), (-1, 1)]
    sched, _ = fit_extremal_data(h, controls, [F(1)] * 6)
    unique, lift = check_unique_lift(h, sched)
    assert unique and lift.phi[2] == -1
    rep = assemble_report(h, sched, lift, 3, unique)
    two = {(0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)}
    minus_two = {(0, 3), (1, 4), (2, 5)}
    for key, value in rep.sigma.items():
        expected = 2 if key in two else (-2 if key in minus_two else 0)
        assert value == expected, (key, value)
    assert rep.W_basis == (
        (1, 0, 0, 0, -1, 0),
        (0, 1, 0, 0, 0, -1),
        (0, 0, 1, -1, 1, -1),
    )
    assert rep.q_value((F(1), F(1), F(0))) == 4
    assert rep.verdict == "NotOptimal"
    _report("criterion-1 heisenberg-qform", t0, 1.0, "Q(1,1,0)=4")


def test_criterion_2_grushin_qform_regression():
    t0 = time.time()
    g = get_model(ModelId.GRUSHIN_LINF)
    controls = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    sched, _ = fit_extremal_data(g, controls, [F(1)] * 4)
    unique, lift = check_unique_lift(g, sched)
    assert unique and lift.phi[2] == 1
    rep = assemble_report(g, sched, lift, 2, unique)
    assert rep.restricted_matrix == ((2, 2), (2, -2))
    assert rep.q_value((F(1), F(0))) == 2
    assert rep.verdict == "NotOptimal"
    _report("criterion-2 grushin-qform", t0, 1.0, "Q(1,0)=2")


def test_criterion_3_martinet_qform_regressions():
    t0 = time.time()
    m = get_model(ModelId.MARTINET_L1)
    # type NI, symbolic in (t1, t2)
    NV = 5
    t1, t2 = Poly.var(3, NV), Poly.var(4, NV)
    half, quarter = F(1, 2), F(1, 4)
    controls = [(1, -1), (1, 1), (-1, 1), (1, 1), (1, -1)]
    sched = ControlSchedule(
        model=m.id,
        start=(F(0), F(0), F(0)),
        arcs=tuple(
            bang_arc(u1, u2, d)
            for (u1, u2), d in zip(
                controls, [t2 * half, t1, t2, t1, t2 * half]
            )
        ),
    )
    lift = ExtremalLift(
        phi=(
            t1 * t2 - t2 * t2 * quarter,
            -(t2 * t2 * quarter),
            Poly(NV),
            Poly.const(1, NV),
            Poly.const(-1, NV),
        ),
        lambda0=t1 * t2,
    )
    rep = assemble_report(m, sched, lift, 2, True, validate=False)
    assert rep.W_basis == ((1, 0, 0, 0, -1), (0, 1, 0, -1, 0))
    M = rep.restricted_matrix
    assert M[0][0] == t1 * 8 and M[0][1] == t2 * 4 and M[1][1] == 0

    # type T, symbolic in (t2, t_sing): the alpha0^2 coefficient carries
    # -2*(2 t_sing) and the alpha0 alpha2 one +8 t_sing
    a, ts = Poly.var(3, NV), Poly.var(4, NV)
    controls_T = [(1, -1), (1, 1), (-1, 1), (-1, -1), (-1, 1), (1, 1)]
    sched_T = ControlSchedule(
        model=m.id,
        start=(Poly.const(0, NV), a, Poly.const(0, NV)),
        arcs=tuple(
            bang_arc(u1, u2, d)
            for (u1, u2), d in zip(
                controls_T,
                [a * half, a * half, a, ts, a, a * quarter],
            )
        ),
    )
    lift_T = ExtremalLift(
        phi=(
            a * a * quarter,
            -(a * a) * F(3, 4),
            a,
            Poly.const(1, NV),
            Poly.const(-1, NV),
        ),
        lambda0=a * a,
    )
    rep_T = assemble_report(m, sched_T, lift_T, 3, True, validate=False)
    assert rep_T.W_basis == (
        (1, 0, 0, -1, 1, -1),
        (0, 1, 0, 0, 0, -1),
        (0, 0, 1, 0, -1, 0),
    )
    MT = rep_T.restricted_matrix
    assert MT[0][0] == a * 2 - ts * 4  # 2*(t2 - 2 t_sing)
    assert MT[0][1] == a * 4  # 8 t2 on alpha0 alpha1
    assert MT[0][2] == ts * 4  # 8 t_sing on alpha0 alpha2
    assert MT[2][2] == ts * -4  # -4 t_sing on alpha2^2
    assert MT[1][1] == 0 and MT[1][2] == 0

    # type I: a positive witness whenever y(tau2) < 0, both concatenations
    for (r, R, q) in (
        (F(1, 2), F(3, 2), F(5, 2)),
        (F(1, 3), F(2), F(3)),
        (F(1, 4), F(1), F(7, 4)),
    ):
        mu = F(1)
        c = (q * q - (R - r) ** 2) / 4
        tb, tc, td = c / (R - r), (q - (R - r)) / 2, c / q
        controls_I = [(1, -1), (-1, -1), (-1, 1), (1, 1), (1, -1), (-1, -1)]
        durs = [r, tb, tc, td, tc, tb / 2]
        sched_I = ControlSchedule(
            model=m.id,
            start=(F(0), -(r + R), F(0)),
            arcs=tuple(
                bang_arc(u1, u2, d) for (u1, u2), d in zip(controls_I, durs)
            ),
        )
        ok, lift_I = check_unique_lift(m, sched_I)
        assert ok
        assert -(r + R) + 2 * r < 0  # y at the second switch is negative
        rep_I = assemble_report(m, sched_I, lift_I, 2, ok)
        assert rep_I.verdict == "NotOptimal"
        assert rep_I.witness is not None and rep_I.witness.value > 0
        # the shifted cycle (second listed concatenation)
        controls_I2 = _seq_controls((-1, 1), (1, 2, 1, 2, 1))
        durs2 = [tc, td, tc, tb, tc, td / 2]
        sched_I2 = ControlSchedule(
            model=m.id,
            start=(F(0), r - R, F(0)),
            arcs=tuple(
                bang_arc(u1, u2, d)
                for (u1, u2), d in zip(controls_I2, durs2)
            ),
        )
        ok2, lift_I2 = check_unique_lift(m, sched_I2)
        if ok2:
            rep_I2 = assemble_report(m, sched_I2, lift_I2, 2, ok2)
            assert rep_I2.verdict == "NotOptimal"
    _report("criterion-3 martinet-qforms", t0, 5.0, "NI/T symbolic + I witness")


def _sample_h_lift(rng):
    while True:
        phi = (
            F(rng.randint(-8, 8), rng.choice((2, 3, 4))),
            F(rng.randint(-8, 8), rng.choice((2, 3, 4))),
            F(rng.randint(-6, 6), rng.choice((1, 2, 3))),
        )
        if phi[0] != 0 or phi[1] != 0:
            return phi


def test_criterion_4_pmp_invariant_suite():
    t0 = time.time()
    rng = random.Random(20260808)
    counts = {}

    def run(m, p0, lift, horizon, policy=None):
        sched, _rec = synthesize_extremal(m, p0, lift, horizon, policy)
        norm = lift.scaled(F(1) / lift.lambda0)
        path = transport(m, norm, sched)
        rep = check_pmp_invariants(m, path, sched)
        assert rep.ok, (m.id, lift.phi, [v.detail for v in rep.violations][:3])
        counts[m.id.value] = counts.get(m.id.value, 0) + 1

    h = get_model(ModelId.HEISENBERG_LINF)
    while counts.get("heisenberg-linf", 0) < 3000:
        phi = _sample_h_lift(rng)
        p0 = tuple(F(rng.randint(-4, 4), 2) for _ in range(3))
        run(h, p0, make_lift(h, phi), F(rng.randint(2, 4)))

    for mid in (ModelId.GRUSHIN_L1, ModelId.GRUSHIN_LINF):
        g = get_model(mid)
        while counts.get(mid.value, 0) < 2000:
            x0 = F(rng.randint(-4, 4), 2)
            p0 = (x0, F(rng.randint(-4, 4), 2))
            ph1 = F(rng.randint(-8, 8), 4)
            ph3 = F(rng.randint(-6, 6), 2)
            ph2 = ph1 + x0 * ph3 if mid is ModelId.GRUSHIN_L1 else x0 * ph3
            if ph1 == 0 and ph2 == 0:
                continue
            run(g, p0, make_lift(g, (ph1, ph2, ph3)), F(rng.randint(2, 4)))

    m1 = get_model(ModelId.MARTINET_L1)
    for _ in range(400):  # flat lifts: single bang arcs
        ph = (F(rng.randint(-4, 4), 2), F(rng.randint(-4, 4), 2), F(0), F(0), F(0))
        if ph[0] == 0 and ph[1] == 0:
            ph = (F(1), F(1), F(0), F(0), F(0))
        run(m1, (0, 0, 0), make_lift(m1, ph), F(2))
    while counts["martinet-l1"] < 400 + 700:  # plane-start NI cycles
        mu = F(rng.choice((1, -1)))
        t1 = F(rng.randint(1, 8), 4)
        t2 = F(rng.randint(1, 8), 4)
        if t1 * t2 - t2 * t2 / 4 <= 0:  # keep the NI wedge (phi1 != 0)
            continue
        phi = (
            mu * (t1 * t2 - t2 * t2 / 4),
            -mu * t2 * t2 / 4,
            F(0),
            mu,
            -mu,
        )
        run(m1, (0, 0, 0), make_lift(m1, phi), t1 + 2 * t2)
    while counts["martinet-l1"] < 1100 + 300:  # I-cycles off the plane
        r = F(rng.randint(1, 4), 4)
        R = r + F(rng.randint(1, 4), 2)
        q = R + r + F(rng.randint(1, 4), 4)
        c = (q * q - (R - r) ** 2) / 4
        phi = (r * R, r * R - c, -(r + R), F(1), F(-1))
        run(m1, (0, -(r + R), 0), make_lift(m1, phi), 2 * r + c / (R - r))
    while counts["martinet-l1"] < 1400 + 200:  # T-cycles with singular inserts
        aa = F(rng.randint(1, 6), 4)
        tsv = F(rng.randint(0, 4), 4)
        phi = (aa * aa / 4, -3 * aa * aa / 4, aa, F(1), F(-1))
        pol = SingularPolicy(tangential_length=lambda ctx, tsv=tsv: tsv)
        run(m1, (0, aa, 0), make_lift(m1, phi), 3 * aa + tsv, pol)

    m2 = get_model(ModelId.MARTINET_LINF)
    for _ in range(400):  # flat lifts
        ph = (F(rng.randint(-4, 4), 2), F(rng.randint(-4, 4), 2), F(0), F(0), F(0))
        if ph[0] == 0 and ph[1] == 0:
            ph = (F(-1), F(1), F(0), F(0), F(0))
        run(m2, (0, 0, 0), make_lift(m2, ph), F(2))
    while counts["martinet-linf"] < 400 + 680:  # plane-start cycles
        nu = F(rng.choice((1, -1)))
        a = F(rng.randint(1, 6), 4)
        b = a + F(rng.randint(1, 6), 4)  # b >= a keeps switch roots rational
        lam = a * b + b * b / 2
        chi = rng.choice((1, -1))
        # sign(phi1) = sign(nu) makes phi1 the first crossing (rational at a)
        phi = (nu * a * a / 2, chi * (lam - a * a / 2), F(0), F(0), nu)
        run(m2, (0, 0, 0), make_lift(m2, phi), a + 2 * b + 2 * a)
    for _ in range(10):  # generic lifts exercising the surd branch
        nu = F(1)
        a = F(rng.randint(2, 3), 4)
        lam = a * a  # phi2 crosses first, at an irrational time
        phi = (-(a * a) / 2, lam - a * a / 2, F(0), F(0), nu)
        run(m2, (0, 0, 0), make_lift(m2, phi), a)
    while counts["martinet-linf"] < 1100 + 300:  # singular stretches
        sigma = rng.choice((1, -1))
        phi = (F(0), F(sigma), F(0), F(0), F(0))
        pieces = [
            (F(rng.randint(-2, 2), 2), F(rng.randint(1, 4), 4))
            for _ in range(3)
        ]
        pol = SingularPolicy(free_profile=lambda ctx, rem, p=pieces: p)
        run(m2, (0, 0, 0), make_lift(m2, phi), F(3, 2), pol)

    total = sum(counts.values())
    assert total >= 10_000, counts
    _report(
        "criterion-4 pmp-invariants", t0, 60.0, f"{total} extremals {counts}"
    )


def test_criterion_5_flow_exactness():
    t0 = time.time()
    rng = random.Random(5)
    models = all_models()
    checked = 0
    for _ in range(1000):
        m = rng.choice(models)
        p0 = tuple(F(rng.randint(-6, 6), 3) for _ in range(m.dim))
        u = (F(rng.choice((1, -1))), F(rng.choice((1, -1))))
        t = F(rng.randint(1, 40), 20)  # durations up to 2
        exact = [float(c) for c in bang_flow(m, p0, u, t)]
        field = m.control_field(Control(*u))
        approx = rk_integrate(field, [float(c) for c in p0], float(t), 1000)
        err = max(abs(a - b) for a, b in zip(exact, approx))
        assert err <= 1e-9, (m.id, p0, u, t, err)
        checked += 1
    assert checked == 1000
    _report("criterion-5 flow-exactness", t0, 30.0, "1e-9 across 1000 draws")


GRID6 = [F(k, 5) for k in range(1, 6)]  # 0.2 .. 1.0


def test_criterion_6_arc_count_bounds():
    t0 = time.time()
    flagged = {"heisenberg": 0, "grushin": 0, "martinet-l1": 0, "martinet-linf": 0}

    h = get_model(ModelId.HEISENBERG_LINF)
    for k in (6, 7):
        for c0 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            for first in (1, 2):
                controls = _alt(c0, first, k)
                for s in GRID6:
                    for t0_len in [g for g in GRID6 if g <= s]:
                        for tail in [g for g in GRID6 if g <= s]:
                            durs = [t0_len] + [s] * (k - 2) + [tail]
                            fit = fit_extremal_data(h, controls, durs)
                            if fit is None:
                                continue
                            sched, _ = fit
                            ok, lift = check_unique_lift(h, sched)
                            if not ok:
                                continue
                            rep = assemble_report(h, sched, lift, (k - 1) // 2 + 1, ok)
                            assert rep.verdict == "NotOptimal", (k, c0, first, durs)
                            flagged["heisenberg"] += 1
    assert flagged["heisenberg"] >= 400

    g = get_model(ModelId.GRUSHIN_LINF)
    for c0 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        controls = _alt(c0, 1, 4)  # the listed patterns: u1 switches first
        for s in GRID6:
            for t0_len in [x for x in GRID6 if x <= s]:
                for tail in [x for x in GRID6 if x <= s]:
                    durs = [t0_len, s, s, tail]
                    fit = fit_extremal_data(g, controls, durs)
                    if fit is None:
                        continue
                    sched, _ = fit
                    ok, lift = check_unique_lift(g, sched)
                    if not ok:
                        continue
                    rep = assemble_report(g, sched, lift, 2, ok)
                    assert rep.verdict == "NotOptimal", (c0, durs)
                    flagged["grushin"] += 1
    assert flagged["grushin"] >= 100

    m1 = get_model(ModelId.MARTINET_L1)
    ni_seq = (2, 1, 1, 2, 2, 1, 1)  # 8-arc NI cycle
    for c0 in ((1, -1), (-1, 1)):
        controls = _seq_controls(c0, ni_seq)
        for t1 in GRID6:
            for t2 in GRID6:
                for t0_len in [x for x in GRID6 if x <= t2]:
                    for tail in [x for x in GRID6 if x <= t1]:
                        durs = [t0_len, t1, t2, t1, t2, t1, t2, tail]
                        fit = fit_extremal_data(m1, controls, durs)
                        if fit is None:
                            continue
                        sched, _ = fit
                        ok, lift = check_unique_lift(m1, sched)
                        if not ok:
                            continue
                        rep = assemble_report(m1, sched, lift, 4, ok)
                        assert rep.verdict == "NotOptimal", (c0, durs)
                        flagged["martinet-l1"] += 1
    assert flagged["martinet-l1"] >= 25

    m2 = get_model(ModelId.MARTINET_LINF)
    m2_seq = (1, 2, 1, 1, 2, 1)  # 7-arc cycle of the quadratic dynamics
    for c0 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        controls = _seq_controls(c0, m2_seq)
        for a in GRID6:
            if 2 * a not in GRID6:
                continue
            for b in [x for x in GRID6 if 2 * x > a]:
                durs = [a, b, b, 2 * a, b, b, 2 * a]
                fit = fit_extremal_data(m2, controls, durs)
                if fit is None:
                    continue
                sched, _ = fit
                ok, lift = check_unique_lift(m2, sched)
                if not ok:
                    continue
                rep = assemble_report(m2, sched, lift, 3, ok)
                assert rep.verdict == "NotOptimal", (c0, durs)
                flagged["martinet-linf"] += 1
    assert flagged["martinet-linf"] >= 8

    _report("criterion-6 arc-bounds", t0, 300.0, str(flagged))


@pytest.fixture(scope="module")
def heisenberg_grid_35():
    h = get_model(ModelId.HEISENBERG_LINF)
    cfg = GridConfig(
        bounds=((-3.6, 3.6), (-3.6, 3.6), (-2.4, 2.4)),
        dx=0.02,
        dt=0.02,
        horizon=3.5,
    )
    return h, cfg, propagate(h, (0, 0, 0), cfg)


def test_criterion_7_oracle_agreement_heisenberg(heisenberg_grid_35):
    t0 = time.time()
    h, cfg, grid = heisenberg_grid_35
    from subfinsler.oracle import estimate

    targets = [
        (x, y, z)
        for x in (-1, 0, 1)
        for y in (-1, 0, 1)
        for z in (-1, 0, 1)
        if (x, y, z) != (0, 0, 0)
    ]
    worst = 0.0
    for tgt in targets:
        est = estimate(
            h,
            (0, 0, 0),
            tuple(float(c) for c in tgt),
            cfg,
            grid=grid,
            max_arcs=5,
            duration_grid=[F(k, 8) for k in range(0, 29)],
        )
        mt = minimal_time(h, (0, 0, 0), tgt, resolution=16)
        mid = 0.5 * (est.lower_bound + est.upper_bound)
        half = 0.5 * (est.upper_bound - est.lower_bound)
        gap = abs(float(mt.time) - mid)
        assert gap <= half + 0.05, (tgt, float(mt.time), est.lower_bound,
                                    est.upper_bound)
        worst = max(worst, gap - half)
        if tgt in ((1, 0, 0), (0, 1, 0)):
            assert est.lower_bound <= 1.0 <= est.upper_bound + 1e-9, tgt
            assert abs(mid - 1.0) <= 0.05, (tgt, mid)
    _report(
        "criterion-7 oracle-heisenberg",
        t0,
        600.0,
        f"26 targets, worst slack {worst:.3f}",
    )


def test_criterion_8_singular_optimality():
    t0 = time.time()
    rng = random.Random(88)
    h = get_model(ModelId.HEISENBERG_LINF)
    for trial in range(20):
        pieces = []
        for _ in range(rng.randint(1, 3)):
            pieces.append(
                (F(rng.randint(-4, 4), 4), F(rng.randint(1, 6), 4))
            )
        lift = make_lift(h, (F(0), F(1), F(0)))
        pol = SingularPolicy(free_profile=lambda ctx, rem, p=pieces: p)
        T = sum(d for _, d in pieces)
        sched, _rec = synthesize_extremal(h, (0, 0, 0), lift, T, pol)
        end = schedule_endpoint(h, sched)
        assert sched.total_time() == T
        assert end[1] == T  # time equals the y-displacement exactly
        # an equal-time bang-bang schedule with <= 3 arcs, solved exactly
        xbar, zbar = end[0], end[2]
        d2 = (T - xbar) / 2
        if d2 == 0:
            bb = [bang_arc(1, 1, T)]
        else:
            w = zbar / d2
            d1 = (T - d2 + w) / 2
            d3 = (T - d2 - w) / 2
            assert d1 >= 0 and d3 >= 0, (trial, xbar, zbar)
            bb = [a for a in (
                bang_arc(1, 1, d1),
                bang_arc(-1, 1, d2),
                bang_arc(1, 1, d3),
            ) if a.duration > 0]
        bsched = ControlSchedule(model=h.id, start=(0, 0, 0), arcs=tuple(bb))
        assert len(bb) <= 3
        assert schedule_endpoint(h, bsched) == end
        assert bsched.total_time() == T
        # oracle upper bound within grid tolerance
        endf = np.array([float(c) for c in end])
        sing = _singular_search(h, (0.0, 0.0, 0.0), endf, 0.05)
        sched2, time2, dist2 = refine_bang_schedule(h, (0, 0, 0), endf, bsched, 0.03)
        best_upper = min(
            [time2 + 0.03] + ([sing[0] + 0.05] if sing else [])
        )
        assert best_upper <= float(T) + 0.1, (trial, best_upper, float(T))
    _report("criterion-8 singular-optimality", t0, 300.0, "20 profiles")


def _oracle_upper_batch(m, targets, delta=0.02, max_arcs=6):
    """Independent upper bounds via pattern enumeration + refinement."""
    grid_fr = [F(k, 10) for k in range(0, 12)]
    grid = np.array([float(g) for g in grid_fr])
    uppers = np.full(len(targets), np.inf)
    tmat = np.array([[float(c) for c in t] for t in targets])
    for i, tgt in enumerate(tmat):
        best = None
        sing = _singular_search(m, tuple([0.0] * m.dim), tgt, delta)
        if sing is not None:
            best = sing[0]
        for k in range(1, max_arcs + 1):
            feas, near = _enumerate_candidates(
                m, tuple([0.0] * m.dim), tgt, k, grid, grid_fr, delta
            )
            for cand in (feas, near):
                if cand is None:
                    continue
                seed = ControlSchedule(
                    model=m.id,
                    start=tuple(F(0) for _ in range(m.dim)),
                    arcs=tuple(
                        bang_arc(c.u1, c.u2, d)
                        for c, d in zip(cand[2], cand[3])
                    ),
                )
                sched, tt, dist = refine_bang_schedule(
                    m, tuple([0.0] * m.dim), tgt, seed, delta
                )
                if dist <= delta and (best is None or tt < best):
                    best = tt
        if best is not None:
            uppers[i] = best + delta
    return uppers


_SPHERE_CFG = {
    "heisenberg-linf": dict(
        sampling=9,
        bounds=((-1.2, 1.2), (-1.2, 1.2), (-0.7, 0.7)),
        zslope=4.0,
    ),
    "grushin-l1": dict(sampling=150, bounds=((-2.3, 2.3), (-1.6, 1.6))),
    "grushin-linf": dict(sampling=150, bounds=((-1.2, 1.2), (-0.8, 0.8))),
    "martinet-l1": dict(
        sampling=8,
        bounds=((-2.4, 2.4), (-1.3, 1.3), (-0.9, 0.9)),
    ),
    "martinet-linf": dict(
        sampling=8,
        bounds=((-1.2, 1.2), (-1.2, 1.2), (-0.6, 0.6)),
    ),
}

_SYMMETRIES = {
    "heisenberg-linf": [
        lambda p: (p[1], p[0], -p[2]),
        lambda p: (-p[0], -p[1], p[2]),
    ],
    "grushin-l1": [lambda p: (-p[0], p[1]), lambda p: (p[0], -p[1])],
    "grushin-linf": [lambda p: (-p[0], p[1]), lambda p: (p[0], -p[1])],
    "martinet-l1": [lambda p: (p[0], -p[1], p[2])],
    "martinet-linf": [],
}


@pytest.mark.parametrize("mid", [m.value for m in ModelId])
def test_criterion_9_sphere_validity(mid):
    t0 = time.time()
    m = get_model(ModelId(mid))
    cfg9 = _SPHERE_CFG[mid]
    patches = trace_sphere(m, F(1), sampling=cfg9["sampling"])
    samples = [s for p in patches for s in p.samples]
    assert len(samples) >= 500, (mid, len(samples))
    rng = random.Random(9)
    chosen = rng.sample(samples, 500)

    # synthesized minimal time lies in [0.95, 1.0]
    low = 0
    for s in chosen:
        res = minimal_time(
            m, tuple(F(0) for _ in range(m.dim)),
            tuple(F(c).limit_denominator(10**9) for c in s),
            resolution=12,
        )
        t = float(res.time)
        assert t <= 1.0 + 5e-3, (mid, s, t)
        assert t >= 0.95, (mid, s, t)
        low = min(low, t)

    # oracle brackets contain 1.0 within combined tolerance 0.07
    grid_cfg = GridConfig(
        bounds=cfg9["bounds"], dx=0.015, dt=0.015, horizon=1.25
    )
    grid = propagate(m, tuple(0.0 for _ in range(m.dim)), grid_cfg)
    radius = grid_cfg.search_radii(m.weights)
    uppers = _oracle_upper_batch(m, chosen)
    for s, upper in zip(chosen, uppers):
        step = grid.earliest_near(s, radius)
        lower = 0.0 if step is None else max(
            0.0, step * grid_cfg.dt - grid_cfg.time_slack()
        )
        lower = min(lower, upper)  # bracket under the delta-ball semantics
        assert lower <= 1.0 + 0.07, (mid, s, lower)
        assert upper + 0.07 >= 1.0, (mid, s, upper)

    # symmetry invariance of the sample set
    pts = np.array(samples)
    for sym in _SYMMETRIES[mid]:
        mirrored = np.array([sym(p) for p in chosen[:120]])
        for q in mirrored:
            d = np.linalg.norm(pts - q[None, :], axis=1).min()
            assert d < 0.12, (mid, q)
    _report(f"criterion-9 sphere-{mid}", t0, 420.0, f"{len(samples)} samples")


def test_criterion_10_rectifiability_witness(tmp_path):
    t0 = time.time()
    for m in all_models():
        patches = trace_sphere(m, F(1), sampling=5)
        assert 0 < len(patches) < 200, m.id
        for p in patches:
            assert p.degree <= 3
            for poly in p.map_coefficients:
                for coeff in poly.terms.values():
                    assert isinstance(coeff, Fraction)
        blob1 = export.sphere_json(m, F(1), patches)
        svg1 = export.sphere_svg(m, patches, view="z")
        patches2 = trace_sphere(m, F(1), sampling=5)
        blob2 = export.sphere_json(m, F(1), patches2)
        svg2 = export.sphere_svg(m, patches2, view="z")
        assert blob1 == blob2, m.id
        assert svg1 == svg2, m.id
        parsed = json.loads(blob1)
        assert parsed["patches"]
    _report("criterion-10 rectifiability", t0, 600.0, "5 models exported")
