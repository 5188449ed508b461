import json
import math
from pathlib import Path

import numpy as np
import pytest

from lagflow import flow, functionals as fn, geom, lagrangian as lg, shapes
from lagflow.functionals import SpacetimeCenter

ORACLE = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


def line(angle=0.3, half=20 * math.sqrt(2), n=4001, through=(0.0, 0.0)):
    r = np.linspace(-half, half, n)
    pts = np.column_stack([r * math.cos(angle), r * math.sin(angle)]) + np.asarray(through)
    return geom.DiscreteCurve(pts, closed=False)


def origin(m=1, T=1.0):
    return SpacetimeCenter(np.zeros((m, 2)), T)


def test_center_validation():
    with pytest.raises(ValueError):
        SpacetimeCenter(np.zeros((1, 3)), 1.0)
    with pytest.raises(ValueError):
        SpacetimeCenter(np.zeros((1, 2)), math.inf)
    with pytest.raises(fn.DomainError):
        fn.huisken_theta(lg.Planar(shapes.circle(samples=32)), origin(2), 0.0)
    with pytest.raises(fn.DomainError):
        fn.huisken_theta(lg.Planar(shapes.circle(samples=32)), origin(1, 0.5), 0.5)
    series = fn.DensitySeries(origin())
    series.append(0.5, 1.0, 0.0, 0.0)
    with pytest.raises(fn.DomainError):
        series.append(1.0, 1.0, 0.0, 0.0)


def test_theta_of_line_is_one():
    # 20 Gaussian widths of 2 sqrt(tau) on either side
    assert abs(fn.huisken_theta(lg.Planar(line(half=40.0)), origin(), 0.0) - 1) < 1e-6
    # products need closed factors, so check the factorised value of two lines directly
    w = fn.gaussian_weights(lg.Planar(line(0.3, 40.0)), origin(), 0.0)[0].sum()
    w2 = fn.gaussian_weights(lg.Planar(line(1.1, 40.0)), origin(), 0.0)[0].sum()
    assert abs(w * w2 - 1) < 1e-6


def test_shrinking_circle_density_is_constant():
    T = 1.0
    vals = []
    for t in (0.0, 0.5):
        c = lg.Planar(shapes.circle(radius=math.sqrt(2 * (T - t)), samples=2048))
        vals.append(fn.huisken_theta(c, origin(1, T), t))
    assert abs(vals[0] - vals[1]) < 1e-6
    assert abs(vals[0] - ORACLE["shrinking_circle_density"]) < 1e-5


def test_shrinker_residual_examples():
    circ = lg.Planar(shapes.circle(radius=math.sqrt(2), samples=512))
    assert fn.shrinker_residual(circ, origin(), 0.0) < 1e-8
    off = SpacetimeCenter(np.array([[1.0, 0.0]]), 1.0)
    r = fn.shrinker_residual(circ, off, 0.0)
    assert r > 0.01 and abs(r - ORACLE["off_center_circle_residual"]) < 1e-3
    ray = lg.Equivariant(shapes.radial_ray(r_min=0.01, r_max=12.0, samples=512))
    assert fn.shrinker_residual(ray, origin(2), 0.0) < 1e-8


def test_grim_reaper_is_not_a_shrinker():
    gr = lg.Planar(shapes.grim_reaper(samples=4096, cut=30.0))
    r = fn.shrinker_residual(gr, origin(), 0.0)
    assert r > 1e-2 and abs(r - ORACLE["grim_reaper_shrinker_residual"]) < 1e-3


def test_equivariant_plane_density():
    # the rotated ray is a Lagrangian plane through the origin
    ray = lg.Equivariant(shapes.radial_ray(r_min=1e-3, r_max=14.0, samples=4096))
    assert abs(fn.huisken_theta(ray, origin(2), 0.0) - 1) < 1e-3
    # a centre slightly off the axis goes through the rotation quadrature and must agree
    near = SpacetimeCenter(np.array([[1e-9, 0.0], [0.0, 0.0]]), 1.0)
    assert abs(fn.huisken_theta(ray, near, 0.0) - fn.huisken_theta(ray, origin(2), 0.0)) < 1e-8


def test_off_axis_equivariant_density_matches_direct_quadrature():
    prof = shapes.circle(center=(2.0, 0.0), radius=0.5, samples=256)
    cfg = lg.Equivariant(prof)
    x0 = np.array([[1.6, 0.2], [0.3, -0.1]])
    ctr = SpacetimeCenter(x0, 0.8)
    # brute force: 2-d sum over the (s, r) grid with area element |g| ds dr
    r = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    g = prof.points
    X = np.stack([np.cos(r)[None, :, None] * g[:, None, :], np.sin(r)[None, :, None] * g[:, None, :]], axis=2)
    d2 = np.sum((X - x0[None, None]) ** 2, axis=(2, 3))
    w = np.exp(-d2 / (4 * 0.8)) / (4 * np.pi * 0.8)
    ref = np.sum(w * (np.hypot(g[:, 0], g[:, 1]) * geom.dual_lengths(prof))[:, None]) * 2 * np.pi / 1024
    assert abs(fn.huisken_theta(cfg, ctr, 0.0) - ref) < 1e-9


def test_gaussian_factorisation():
    a, b = shapes.ellipse(1.5, 1.0, samples=256), shapes.circle(radius=0.7, samples=256, center=(0.3, 0.0))
    p = lg.Product((a, b))
    ctr = SpacetimeCenter(np.array([[0.1, 0.2], [0.0, -0.3]]), 0.9)
    ta = fn.huisken_theta(lg.Planar(a), SpacetimeCenter(ctr.x0[:1], 0.9), 0.0)
    tb = fn.huisken_theta(lg.Planar(b), SpacetimeCenter(ctr.x0[1:], 0.9), 0.0)
    assert abs(fn.huisken_theta(p, ctr, 0.0) - ta * tb) < 1e-9


def test_parabolic_rescaling_invariance():
    cfgs = [
        lg.Planar(shapes.ellipse(2.0, 1.0, samples=256, center=(0.3, 0.1))),
        lg.Product((shapes.circle(samples=128), shapes.ellipse(1.5, 0.7, samples=128))),
        lg.Equivariant(shapes.circle(center=(1.5, 0.0), radius=0.6, samples=256)),
    ]
    for cfg in cfgs:
        x0 = np.zeros((cfg.dim, 2)) if isinstance(cfg, lg.Equivariant) else 0.2 * np.ones((cfg.dim, 2))
        t, T, alpha = 0.1, 0.9, 1.7
        a = fn.huisken_theta(cfg, SpacetimeCenter(x0, T), t)
        big = lg.scale_config(cfg, alpha, x0)
        b = fn.huisken_theta(big, SpacetimeCenter(np.zeros_like(x0), alpha**2 * (T - t)), 0.0)
        assert abs(a - b) < 1e-9


def test_entropy_examples():
    ln = lg.Planar(line(0.0, 40.0, 2001))
    grid = ([np.array([[0.0, 0.0], [5.0, 5.0]])], [1.0, 0.25])
    assert fn.entropy_estimate(ln, grid).value >= 1 - 1e-6

    circ = lg.Planar(shapes.circle(samples=512))
    centres = np.array([[x, y] for x in np.linspace(-0.1, 0.1, 5) for y in np.linspace(-0.1, 0.1, 5)])
    est = fn.entropy_estimate(circ, ([centres], np.linspace(0.4, 0.6, 21)))
    assert abs(est.value - ORACLE["shrinking_circle_density"]) < 1e-3
    assert np.allclose(est.center.x0, 0.0) and abs(est.center.T - 0.5) < 1e-9

    far = ([np.array([[20.0, 20.0], [-15.0, 30.0]])], [1.0, 2.0])
    assert fn.entropy_estimate(circ, far).value < 0.1
    with pytest.raises(fn.DomainError):
        fn.entropy_estimate(circ, ([np.zeros((0, 2))], [1.0]))
    with pytest.raises(fn.DomainError):
        fn.entropy_estimate(circ, ([centres], []))


def test_default_entropy_grid_is_a_lower_bound():
    circ = lg.Planar(shapes.circle(samples=256))
    centres, taus = fn.default_entropy_grid(circ)
    assert len(centres[0]) == 121 and len(taus) == 7
    est = fn.entropy_estimate(circ)
    assert est.value <= ORACLE["shrinking_circle_density"] + 1e-6
    eq = lg.Equivariant(shapes.circle(samples=128))
    assert fn.entropy_estimate(eq).value > 0


def test_B_examples():
    ray = lg.Equivariant(shapes.radial_ray(samples=256))
    ctr = origin(2)
    beta0 = lg.lagrangian_angle(ray)[0].samples[0]
    assert abs(fn.beta_weighted_B(ray, ctr, 0.0, offset=-beta0)) < 1e-12

    hy = lg.Equivariant(shapes.truncated_hyperbola(samples=2048))
    B = fn.beta_weighted_B(hy, ctr, 0.0, offset=-fn.beta_gaussian_mean(hy, ctr, 0.0))
    assert 0 < B < math.inf
    assert abs(B - ORACLE["hyperbola_B_centre0_T1"]) < 1e-4


def test_B_offset_identity():
    cfg = lg.Planar(shapes.lemniscate(samples=256))
    ctr = SpacetimeCenter(np.array([[0.2, 0.1]]), 0.7)
    w = fn.gaussian_weights(cfg, ctr, 0.0)[0]
    beta = lg.lagrangian_angle(cfg)[0].nodes
    for c in (-1.3, 0.0, 2.5):
        direct = float(np.sum(w * (beta + c) ** 2))
        assert abs(fn.beta_weighted_B(cfg, ctr, 0.0, offset=c) - direct) < 1e-9


def test_B_product_expansion():
    # beta = beta_1 + beta_2 on a product; the moment expansion must equal the double sum
    a = shapes.lemniscate(samples=128)
    b = shapes.lemniscate(scale=0.8, samples=128)
    b = geom.DiscreteCurve(b.points + np.array([0.1, 0.0]))
    p = lg.Product((a, b))
    ctr = SpacetimeCenter(np.array([[0.0, 0.1], [0.2, 0.0]]), 0.6)
    w1, w2 = fn.gaussian_weights(p, ctr, 0.0)
    b1, b2 = (f.nodes for f in lg.lagrangian_angle(p))
    direct = float(np.sum(np.outer(w1, w2) * (b1[:, None] + b2[None, :] + 0.4) ** 2))
    assert abs(fn.beta_weighted_B(p, ctr, 0.0, offset=0.4) - direct) < 1e-9


def test_B_requires_real_lift():
    with pytest.raises(fn.DomainError):
        fn.beta_weighted_B(lg.Planar(shapes.circle(samples=64)), origin(), 0.0)


def test_monotonicity_identity():
    # dTheta/dt = -(weighted shrinker residual) for a smooth flow
    cfg = lg.Planar(shapes.ellipse(1.5, 1.0, samples=256))
    ctr = SpacetimeCenter(np.array([[0.1, 0.0]]), 1.2)
    tr = flow.run(cfg, flow.FlowParams(stop_time=0.3, checkpoint_dt=0.01, target_spacing_fraction=1 / 256),
                  tracked_centers=[ctr])
    s = tr.series
    t, th, res = s["t"], s["theta_0"], s["resid_0"]
    for k in range(len(t) - 1):
        if t[k + 1] - t[k] < 0.005:
            continue
        rate = (th[k + 1] - th[k]) / (t[k + 1] - t[k])
        mean = 0.5 * (res[k] + res[k + 1])
        assert abs(rate + mean) <= 0.2 * mean


def test_series_recorder_marks_rows_past_T():
    cfg = lg.Planar(shapes.circle(samples=128))
    rec = fn.SeriesRecorder(cfg, lg.default_cycles(cfg), [origin(1, 0.05)])
    rec.record(cfg, 0.0, 0.0)
    rec.record(cfg, 0.1, 0.0)
    out = rec.finish()
    assert math.isfinite(out["theta_0"][0]) and math.isnan(out["theta_0"][1])
    # non-zero Maslov class: B is not defined
    assert np.all(np.isnan(out["B_0"]))
    assert "length_1" in out and "area_1" in out
