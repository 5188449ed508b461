import math

import numpy as np
import pytest

from lagflow import flow, functionals as fn, geom, lagrangian as lg, shapes, singularity as sg, verify
from lagflow.functionals import SpacetimeCenter
from lagflow.lagrangian import CycleId


def u_shape(width=0.01, length=12.0):
    """Two parallel rays joined by a tiny cap: a blown-down translator."""
    y = np.linspace(-length, 0, 1200, endpoint=False)
    th = np.linspace(np.pi, 0, 40, endpoint=False)
    left = np.column_stack([-width + 0 * y, y])
    cap = np.column_stack([width * np.cos(th), width * np.sin(th)])
    right = np.column_stack([width + 0 * y, y[::-1]])
    return lg.Planar(geom.DiscreteCurve(np.vstack([left, cap, right]), closed=False))


def test_predict_typeI_times():
    (e,) = sg.predict_typeI_times(lg.Planar(shapes.circle(radius=1.5, samples=512))).entries
    assert abs(e.T_candidate - 1.5**2 / 2) < 1e-6
    prod = lg.Product((shapes.circle(samples=512), shapes.circle(radius=2.0, samples=512)))
    times = sg.predict_typeI_times(prod).defined_times()
    assert [round(T, 6) for T, _ in times] == [0.5, 2.0]
    assert sg.predict_typeI_times(prod).first()[1] == CycleId.factor(1)
    eq = sg.predict_typeI_times(lg.Equivariant(shapes.circle(samples=512)))
    by = {x.cycle: x for x in eq.entries}
    assert abs(by[CycleId.profile()].T_candidate - 0.25) < 1e-6
    assert not by[CycleId.rotation(0)].defined
    (e,) = sg.predict_typeI_times(lg.Planar(shapes.lemniscate(samples=256))).entries
    assert e.T_candidate is None and sg.predict_typeI_times(lg.Planar(shapes.lemniscate(samples=256))).first() is None


def test_estimate_and_classify(bundled):
    _, tr = bundled("circle-unit")
    fit = sg.fit_blowup_time(tr)
    assert not fit.fallback and abs(fit.T - 0.5) < 1e-3
    cls = sg.classify_type(tr, fit.T)
    assert cls.kind == "TypeI" and cls.C_est > 0
    _, tr = bundled("equivariant-circle")
    assert abs(sg.estimate_T(tr) - 0.25) < 1e-3


def test_classify_needs_blowup_and_rows(bundled):
    _, tr = bundled("radial-ray")
    with pytest.raises(fn.DomainError):
        sg.estimate_T(tr)
    with pytest.raises(ValueError):
        sg.TypeClassification("TypeI", -1.0, (0, 1), 30)


def test_blowup_points(bundled):
    _, tr = bundled("circle-unit")
    T = sg.estimate_T(tr)
    frames = sg.blowup_points(tr, T, count=5)
    assert len(frames) == 5
    scales = [f.scale for f in frames]
    assert all(b > a for a, b in zip(scales, scales[1:]))
    # the frame point lies on the curve
    for f in frames:
        c = tr.checkpoints[f.checkpoint].config.curve
        assert np.min(np.hypot(*(c.points - f.center[0]).T)) < 1e-12
    _, tr = bundled("equivariant-circle")
    for f in sg.blowup_points(tr, sg.estimate_T(tr), count=3):
        assert np.all(f.center == 0)


def test_rescale_examples():
    state = flow.FlowState(0.0, lg.Planar(shapes.circle(samples=256)))
    same = sg.rescale(state, sg.RescaleFrame("tangent", np.zeros((1, 2)), 0.0, 1.0))
    assert np.max(np.abs(same.curve.points - state.config.curve.points)) < 1e-9
    ctr = np.array([[0.3, -0.2]])
    there = sg.rescale(state, sg.RescaleFrame("tangent", ctr, 0.0, 3.7))
    back = sg.rescale(flow.FlowState(0.0, there), sg.RescaleFrame("tangent", np.zeros((1, 2)), 0.0, 1 / 3.7))
    assert np.max(np.abs(back.curve.points + ctr - state.config.curve.points)) < 1e-12
    # tangent frame at t=0 with T=1/2 maps the unit circle to radius sqrt 2
    tangent = sg.RescaleFrame("tangent", np.zeros((1, 2)), 0.0, (0.5 - 0.0) ** -0.5)
    r = np.hypot(*sg.rescale(state, tangent).curve.points.T)
    assert np.max(np.abs(r - math.sqrt(2))) < 1e-12
    with pytest.raises(ValueError):
        sg.RescaleFrame("tangent", np.zeros((1, 2)), 0.0, 0.0)
    eq = flow.FlowState(0.0, lg.Equivariant(shapes.circle(center=(2.0, 0.0), samples=64)))
    with pytest.raises(fn.DomainError):
        sg.rescale(eq, sg.RescaleFrame("tangent", np.ones((2, 2)), 0.0, 2.0))


def test_blow_down_frames():
    T = 1.0
    times = T - np.logspace(-1, -4, 6)
    q = (T - times) ** -0.75
    ups = [sg.RescaleFrame("smooth_blowup", np.zeros((1, 2)), t, s, checkpoint=j) for j, (t, s) in enumerate(zip(times, q))]
    downs = sg.blow_down_frames(ups, T)
    for d, t in zip(downs, times):
        assert abs(d.scale - (T - t) ** 0.125) < 1e-12
        assert d.kind == "blow_down" and d.total_scale == pytest.approx(d.scale * d.base_scale)
    type_i = [sg.RescaleFrame("smooth_blowup", np.zeros((1, 2)), t, (T - t) ** -0.5) for t in times]
    with pytest.raises(fn.DomainError):
        sg.blow_down_frames(type_i, T)
    with pytest.raises(fn.DomainError):
        sg.blow_down_frames(ups[:1], T)
    late = ups[:2] + [sg.RescaleFrame("smooth_blowup", np.zeros((1, 2)), T, 1e5)]
    with pytest.raises(fn.DomainError):
        sg.blow_down_frames(late, T)


def test_tangent_frames(bundled):
    _, tr = bundled("circle-unit")
    T = sg.estimate_T(tr)
    frames = sg.tangent_frames(tr, T, count=4)
    assert len(frames) == 4 and all(f.time < T for f in frames)
    for f in frames:
        assert f.scale == pytest.approx((T - f.time) ** -0.5)


def test_fit_selfshrinker():
    unit = SpacetimeCenter(np.zeros((1, 2)), 1.0)
    circ = lg.Planar(shapes.circle(radius=math.sqrt(2), samples=512))
    assert sg.fit_selfshrinker(circ, unit, 0.0) < 1e-6
    gr = lg.Planar(shapes.grim_reaper(samples=2048, cut=30.0))
    assert sg.fit_selfshrinker(gr, unit, 0.0) > 1e-2


def test_fit_cones_perpendicular_lines():
    fit = sg.fit_cones(lg.Planar(verify.synthetic_lines([0.2, 0.2 + math.pi / 2])))
    assert len(fit.pieces) == 2 and all(p.kind == "line" and p.multiplicity == 1 for p in fit.pieces)
    assert abs(fit.pairwise_angles[0] - math.pi / 2) < 1e-6
    assert fit.residual < 1e-12


def test_fit_cones_translator_has_multiplicity_two():
    fit = sg.fit_cones(u_shape())
    (p,) = fit.pieces
    assert p.kind == "ray" and p.multiplicity == 2
    assert np.allclose(p.direction, [0.0, -1.0], atol=1e-9)
    a, b = p.beta_modes
    assert abs(abs(b - a) - math.pi) < 1e-6


def test_fit_cones_equivariant_planes():
    ray = lg.Equivariant(shapes.radial_ray(angle=0.4, r_min=1e-3, r_max=12.0, samples=1024))
    (p,) = sg.fit_cones(ray).pieces
    assert p.kind == "plane" and p.multiplicity == 1
    assert abs(math.atan2(p.direction[1], p.direction[0]) - 0.4) < 1e-9


def test_fit_cones_errors():
    far = lg.Planar(shapes.circle(center=(30.0, 0.0), samples=256))
    with pytest.raises(fn.DomainError):
        sg.fit_cones(far)
    prod = lg.Product((shapes.circle(samples=64), shapes.circle(samples=64)))
    with pytest.raises(fn.DomainError):
        sg.fit_cones(prod)


def test_grim_reaper_distance():
    gr = lg.Planar(shapes.grim_reaper(samples=2048, cut=8.0))
    assert sg.grim_reaper_distance(gr, np.zeros(2), 1.0) < 1e-4
    # rotated and shifted copies align just as well
    c, s = math.cos(0.7), math.sin(0.7)
    moved = gr.curve.points @ np.array([[c, s], [-s, c]]) + [0.4, -1.0]
    d = sg.grim_reaper_distance(lg.Planar(geom.DiscreteCurve(moved, closed=False)), [0.4, -1.0], 1.0)
    assert d < 1e-3
    circ = lg.Planar(shapes.circle(radius=0.8, samples=512))
    assert sg.grim_reaper_distance(circ, [0.0, 0.8], 1.0) > 1e-2
    with pytest.raises(fn.DomainError):
        sg.grim_reaper_distance(lg.Equivariant(shapes.circle(samples=64)), np.zeros(2), 1.0)


def test_analyze_circle(bundled):
    _, tr = bundled("circle-unit")
    rep = sg.analyze(tr)
    assert rep.classification.kind == "TypeI"
    assert rep.matched_candidate == CycleId.whole() and rep.is_first_candidate
    assert not rep.candidate_mismatch
    assert all(r < 1e-2 for _, r in rep.shrinker_fit[-3:])
    assert abs(rep.pairings_at_T["whole"]) < 1e-2


def test_analyze_product(bundled):
    _, tr = bundled("product-circles")
    rep = sg.analyze(tr)
    assert rep.classification.kind == "TypeI"
    assert rep.matched_candidate == CycleId.factor(1) and rep.is_first_candidate
    # the second factor is still large at the first blow-up
    assert rep.pairings_at_T["factor2"] > 1.0


def test_type_i_runs_match_the_first_candidate(bundled):
    for name in ("circle-unit", "ellipse", "product-circles", "equivariant-circle"):
        _, tr = bundled(name)
        rep = sg.analyze(tr)
        assert rep.classification.kind == "TypeI"
        first = rep.candidates.first()[0]
        assert abs(rep.T_est - first) <= sg.MATCH_TOLERANCE * rep.T_est
        assert not rep.candidate_mismatch
