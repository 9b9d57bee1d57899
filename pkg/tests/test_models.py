"""Model catalog: frames, bracket tables, closed flows, serialization."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subfinsler import (
    Control,
    ControlSchedule,
    ModelId,
    all_models,
    bang_arc,
    bang_flow,
    get_model,
    schedule_dumps,
    schedule_endpoint,
    schedule_loads,
    singular_arc,
)
from subfinsler.vecfield import bracket, rk_integrate

F = Fraction


def test_catalog_is_complete():
    models = all_models()
    assert [m.id for m in models] == list(ModelId)
    assert [m.arc_bound for m in models] == [5, 3, 3, 7, 6]
    assert [m.dim for m in models] == [3, 2, 2, 3, 3]


def test_heisenberg_frame_fields():
    m = get_model(ModelId.HEISENBERG_LINF)
    X1, X2 = m.frame
    assert str(X1) == "(1, 0, -1/2*x2)"
    assert str(X2) == "(0, 1, 1/2*x1)"
    assert str(m.aux_fields[0]) == "(0, 0, 1)"


def test_martinet_l1_bracket_fields():
    m = get_model(ModelId.MARTINET_L1)
    Y3, Y4, Y5 = m.aux_fields
    assert str(Y3) == "(0, 0, 4*x2)"
    assert str(Y4) == "(0, 0, 4)"
    assert str(Y5) == "(0, 0, -4)"


def test_aux_fields_are_the_literal_brackets():
    for m in all_models():
        F1, F2 = m.frame
        assert m.aux_fields[0] == bracket(F1, F2)
        if m.n_phi == 5:
            assert m.aux_fields[1] == bracket(F1, m.aux_fields[0])
            assert m.aux_fields[2] == bracket(F2, m.aux_fields[0])


def test_grushin_linf_structural_relation():
    m = get_model(ModelId.GRUSHIN_LINF)
    rels = [r.description for r in m.structural_relations]
    assert rels == ["phi2 = x*phi3"]
    assert bracket(m.frame[0], m.aux_fields[0]).is_zero()
    assert bracket(m.frame[1], m.aux_fields[0]).is_zero()


def test_l1_frames_are_sum_and_difference():
    pairs = (
        (ModelId.GRUSHIN_L1, ModelId.GRUSHIN_LINF),
        (ModelId.MARTINET_L1, ModelId.MARTINET_LINF),
    )
    for l1_id, linf_id in pairs:
        l1 = get_model(l1_id)
        linf = get_model(linf_id)
        X1, X2 = linf.frame
        assert l1.frame[0] == X1 + X2
        assert l1.frame[1] == X1 - X2


def test_control_box_enforced():
    with pytest.raises(ValueError):
        Control(F(3, 2), F(0))
    assert Control(F(1), F(-1)).is_bang()
    assert not Control(F(1, 2), F(1)).is_bang()


def test_bang_flow_examples():
    h = get_model(ModelId.HEISENBERG_LINF)
    assert bang_flow(h, (0, 0, 0), (1, 1), F(1)) == (1, 1, 0)
    assert bang_flow(h, (F(1), F(1), F(0)), (-1, 1), F(1)) == (0, 2, 1)
    m2 = get_model(ModelId.MARTINET_LINF)
    assert bang_flow(m2, (0, 0, 0), (1, 1), F(1)) == (1, 1, F(1, 3))


def test_bang_flow_matches_rk_integration():
    rng = random.Random(7)
    for m in all_models():
        for _ in range(12):
            p0 = tuple(F(rng.randint(-8, 8), 4) for _ in range(m.dim))
            u = (F(rng.choice((1, -1))), F(rng.choice((1, -1))))
            t = F(rng.randint(1, 16), 8)
            exact = [float(c) for c in bang_flow(m, p0, u, t)]
            field = m.frame[0].scale(u[0]) + m.frame[1].scale(u[1])
            approx = rk_integrate(field, [float(c) for c in p0], float(t), 400)
            assert max(abs(a - b) for a, b in zip(exact, approx)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(list(ModelId)),
    st.fractions(min_value=0, max_value=2),
    st.fractions(min_value=0, max_value=2),
    st.sampled_from([(1, 1), (1, -1), (-1, 1), (-1, -1)]),
)
def test_bang_flow_semigroup(mid, s, t, u):
    m = get_model(mid)
    p0 = tuple(F(1, 3) for _ in range(m.dim))
    two_step = bang_flow(m, bang_flow(m, p0, u, s), u, t)
    one_step = bang_flow(m, p0, u, s + t)
    assert two_step == one_step


def test_schedule_endpoint_empty():
    m = get_model(ModelId.GRUSHIN_L1)
    sched = ControlSchedule(model=m.id, start=(F(2), F(3)), arcs=())
    assert schedule_endpoint(m, sched) == (2, 3)


def test_schedule_endpoint_heisenberg_square():
    # closed square of side s encloses signed area 2 s^2
    m = get_model(ModelId.HEISENBERG_LINF)
    s = F(2, 3)
    arcs = tuple(
        bang_arc(u1, u2, s)
        for u1, u2 in ((1, 1), (-1, 1), (-1, -1), (1, -1))
    )
    sched = ControlSchedule(model=m.id, start=(0, 0, 0), arcs=arcs)
    assert schedule_endpoint(m, sched) == (0, 0, 2 * s * s)
    # independent signed-area oracle on the projected square (shoelace)
    pts = [(0, 0), (float(s), float(s)), (0, 2 * float(s)),
           (-float(s), float(s)), (0, 0)]
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += 0.5 * (x0 * y1 - x1 * y0)
    assert area == pytest.approx(2 * float(s) ** 2)


def test_schedule_endpoint_singular_profile():
    m = get_model(ModelId.HEISENBERG_LINF)
    profile = [(F(1, 2), F(1)), (F(-1, 2), F(1))]
    sched = ControlSchedule(
        model=m.id,
        start=(0, 0, 0),
        arcs=(singular_arc(2, 1, profile),),
    )
    end = schedule_endpoint(m, sched)
    assert end[1] == 2  # dy/dt = u2 = 1 throughout


def test_schedule_serialization_round_trip():
    m = get_model(ModelId.MARTINET_L1)
    sched = ControlSchedule(
        model=m.id,
        start=(F(1, 3), F(0), F(-2, 7)),
        arcs=(
            bang_arc(1, -1, F(5, 4)),
            singular_arc(1, -1, [(F(0), F(1, 2)), (F(2, 3), F(1, 6))]),
            bang_arc(-1, -1, F(1, 8)),
        ),
    )
    text = schedule_dumps(sched)
    back = schedule_loads(text)
    assert back == sched
    assert schedule_endpoint(m, back) == schedule_endpoint(m, sched)
    assert schedule_dumps(back) == text


def test_flow_degree_caps_symbolically():
    # projections degree <= 1 in t (x, y for the 3-D models; x for Grushin);
    # area-type coordinates <= 2; Martinet z <= 3
    from subfinsler.vecfield import Poly

    for m in all_models():
        t = Poly.var(0, 1)
        zero = Poly.const(0, 1)
        p0 = tuple(zero for _ in range(m.dim))
        for u in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            end = bang_flow(m, p0, u, t)
            if m.dim == 3:
                assert end[0].degree() <= 1 and end[1].degree() <= 1
                cap = 2 if m.id is ModelId.HEISENBERG_LINF else 3
                assert end[2].degree() <= cap
            else:
                assert end[0].degree() <= 1
                assert end[1].degree() <= 2
