import json
import math
from pathlib import Path

import numpy as np
import pytest

from lagflow import geom, lagrangian as lg, shapes
from lagflow.lagrangian import CycleId

ORACLE = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())
TWO_PI = 2 * np.pi


def ray(angle=np.pi / 8, n=128):
    return lg.Equivariant(shapes.radial_ray(angle=angle, samples=n))


def product_12(n=256):
    return lg.Product((shapes.circle(samples=n), shapes.circle(radius=2.0, samples=n)))


def test_config_validation():
    c = shapes.circle(samples=32)
    with pytest.raises(lg.ConfigError):
        lg.Product((c,))
    with pytest.raises(lg.ConfigError):
        lg.Product((c,) * 5)
    with pytest.raises(lg.ConfigError):
        lg.Product((c, shapes.radial_ray(samples=32)))
    with pytest.raises(lg.OriginProximityError):
        lg.Equivariant(shapes.radial_ray(r_min=1e-7, samples=32))
    with pytest.raises(lg.OriginProximityError):
        lg.Equivariant(shapes.radial_ray(r_min=0.01, samples=32), origin_tol=0.1)


def test_cycle_compatibility():
    planar = lg.Planar(shapes.circle(samples=32))
    with pytest.raises(lg.ConfigError):
        lg.liouville_pairing(planar, CycleId.profile())
    with pytest.raises(lg.ConfigError):
        lg.maslov_pairing(product_12(64), CycleId.whole())
    with pytest.raises(lg.ConfigError):
        lg.maslov_pairing(product_12(64), CycleId.factor(3))
    with pytest.raises(lg.ConfigError):
        lg.liouville_pairing(ray(), CycleId.profile())
    with pytest.raises(lg.ConfigError):
        lg.liouville_pairing(lg.Planar(shapes.radial_ray(samples=32)), CycleId.whole())


def test_cycle_names_round_trip():
    for cyc in (CycleId.whole(), CycleId.factor(2), CycleId.profile(), CycleId.rotation(5)):
        assert CycleId.parse(cyc.name if cyc.kind != "rotation" else f"rotation{cyc.index}") == cyc
    with pytest.raises(lg.ConfigError):
        CycleId.parse("loop")


def test_default_cycles():
    assert lg.default_cycles(lg.Planar(shapes.circle(samples=32))) == [CycleId.whole()]
    assert lg.default_cycles(product_12(32)) == [CycleId.factor(1), CycleId.factor(2)]
    assert lg.default_cycles(lg.Equivariant(shapes.circle(samples=32))) == [CycleId.profile(), CycleId.rotation(0)]
    assert lg.default_cycles(ray()) == [CycleId.rotation(0)]


def test_lagrangian_angle_examples():
    (f,) = lg.lagrangian_angle(lg.Planar(shapes.circle(samples=64)))
    assert f.winding == 1
    (f,) = lg.lagrangian_angle(ray(0.3))
    assert f.winding == 0
    assert np.max(np.abs(f.samples - 0.6)) < 1e-12
    fields = lg.lagrangian_angle(product_12(64))
    assert [x.winding for x in fields] == [1, 1]
    assert lg.maslov_pairing(product_12(64), CycleId.factor(1)) == TWO_PI


def test_liouville_examples():
    assert abs(lg.liouville_pairing(lg.Planar(shapes.circle(samples=256)), CycleId.whole()) - TWO_PI) < 1e-4
    eq = lg.Equivariant(shapes.ellipse(1.3, 0.6, samples=64, center=(2.0, 0.5)))
    for k in (0, 17, 40):
        assert abs(lg.liouville_pairing(eq, CycleId.rotation(k))) < 1e-12
    assert abs(lg.liouville_pairing(product_12(), CycleId.factor(2)) - 8 * np.pi) < 1e-3


def test_liouville_is_spectral_on_smooth_loops():
    # the circle candidate time R^2/2 needs the pairing to 1e-6 at 512 samples
    lam = lg.liouville_pairing(lg.Planar(shapes.circle(samples=512)), CycleId.whole())
    assert abs(lam - TWO_PI) < 1e-12
    e = shapes.ellipse(2.0, 1.0, samples=128)
    assert abs(lg.liouville_pairing(lg.Planar(e), CycleId.whole()) - 4 * np.pi) < 1e-12


def test_maslov_examples():
    assert lg.maslov_pairing(lg.Planar(shapes.circle(samples=64)), CycleId.whole()) == TWO_PI
    eq = lg.Equivariant(shapes.circle(samples=128))
    assert lg.maslov_pairing(eq, CycleId.profile()) == 2 * TWO_PI
    assert lg.maslov_pairing(eq, CycleId.rotation(3)) == 0.0
    assert lg.maslov_pairing(lg.Planar(shapes.lemniscate(samples=128)), CycleId.whole()) == 0.0
    # a profile loop that does not enclose the origin only winds through arg g'
    off = lg.Equivariant(shapes.circle(center=(3.0, 0.0), samples=128))
    assert lg.maslov_pairing(off, CycleId.profile()) == TWO_PI


def test_osc_examples():
    assert abs(lg.osc_beta(lg.Planar(shapes.circle(samples=64))) - TWO_PI) < 1e-12
    assert lg.osc_beta(ray()) < 1e-12
    c = shapes.fourier_curve(1.0, [(3, 0.1, 0.0)], samples=512)
    osc = lg.osc_beta(lg.Planar(c))
    assert TWO_PI - 0.5 <= osc <= TWO_PI + 0.5
    assert abs(osc - ORACLE["polar_osc_amp0.1_mode3"]) < 1e-6
    assert abs(lg.osc_beta(product_12(64)) - 2 * TWO_PI) < 1e-12


def test_second_fundamental_examples():
    assert abs(lg.second_fundamental_sup(lg.Planar(shapes.circle(radius=2.0, samples=256))) - 0.5) < 1e-3
    assert abs(lg.second_fundamental_sup(product_12()) - math.sqrt(1.25)) < 1e-3
    assert lg.second_fundamental_sup(ray()) < 1e-6


def test_mean_curvature_examples():
    (h,) = lg.mean_curvature_field(lg.Planar(shapes.circle(radius=2.0, samples=256)))
    assert np.max(np.abs(h - 0.5)) < 1e-3
    (h,) = lg.mean_curvature_field(ray())
    assert np.max(h) < 1e-10
    (h,) = lg.mean_curvature_field(lg.Equivariant(shapes.circle(radius=1.0, samples=512)))
    assert np.max(np.abs(h - ORACLE["equivariant_circle_mean_curvature"])) < 1e-3
    hs = lg.mean_curvature_field(product_12())
    assert len(hs) == 2 and abs(hs[1].mean() - 0.5) < 1e-3


def test_mean_curvature_is_angle_derivative():
    cfgs = [
        lg.Planar(shapes.fourier_curve(1.0, [(3, 0.15, 0.2)], samples=512)),
        lg.Equivariant(shapes.ellipse(1.3, 0.6, samples=512, center=(2.0, 0.5))),
    ]
    for cfg in cfgs:
        (f,) = lg.lagrangian_angle(cfg)
        c = cfg.curves[0]
        s = geom.arclengths(c)
        b, jump, total = f.nodes, f.samples[-1] - f.samples[0], s[-1]
        # centred difference over both incident edges, periodically extended
        bp, bm = np.roll(b, -1), np.roll(b, 1)
        bp[-1] += jump
        bm[0] -= jump
        sp, sm = np.roll(s[:-1], -1), np.roll(s[:-1], 1)
        sp[-1] += total
        sm[0] -= total
        db, ds = bp - bm, sp - sm
        (h,) = lg.mean_curvature_field(cfg)
        assert np.max(np.abs(np.abs(db / ds) - h)) < 5e-3 * (1 + np.max(h))


def test_scaling_degrees():
    cfgs = [
        lg.Planar(shapes.ellipse(2.0, 1.0, samples=128, center=(0.2, 0.1))),
        product_12(64),
        lg.Equivariant(shapes.ellipse(1.3, 0.6, samples=128, center=(2.0, 0.5))),
    ]
    for cfg in cfgs:
        for alpha in (0.5, 3.0):
            big = lg.scale_config(cfg, alpha)
            for cyc in lg.default_cycles(cfg):
                lam, lam_big = lg.liouville_pairing(cfg, cyc), lg.liouville_pairing(big, cyc)
                assert abs(lam_big - alpha**2 * lam) <= 1e-9 * (1 + abs(lam_big))
                assert lg.maslov_pairing(big, cyc) == lg.maslov_pairing(cfg, cyc)
            assert abs(lg.osc_beta(big) - lg.osc_beta(cfg)) < 1e-12


def test_scale_keeps_origin_tolerance_consistent():
    prof = shapes.circle(center=(3.0, 0.0), samples=64)
    eq = lg.Equivariant(prof, origin_tol=0.5)
    assert lg.scale_config(eq, 0.1).origin_tol == pytest.approx(0.05)
    assert lg.scale_config(eq, 10.0).origin_tol == 0.5
    with pytest.raises(lg.ConfigError):
        lg.scale_config(eq, 2.0, center=np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_basepoint_independence():
    cfg = lg.Planar(shapes.ellipse(2.0, 1.0, samples=128))
    a = lg.liouville_pairing(cfg, CycleId.whole())
    b = lg.liouville_pairing(cfg, CycleId.whole(), np.array([[3.0, -1.0]]))
    assert abs(a - b) < 1e-9
    p = product_12(64)
    base = np.array([[0.5, 0.5], [-1.0, 2.0]])
    for cyc in lg.default_cycles(p):
        assert abs(lg.liouville_pairing(p, cyc) - lg.liouville_pairing(p, cyc, base)) < 1e-9


def test_liouville_is_twice_area():
    for c in (shapes.ellipse(2.0, 1.0, samples=256), shapes.fourier_curve(1.0, [(2, 0.2, 0.0)], samples=256)):
        lam = lg.liouville_pairing(lg.Planar(c), CycleId.whole())
        h = np.max(geom.segment_lengths(c))
        assert abs(lam - 2 * geom.signed_area(c)) < h**2 * 10


def test_measure_weights_equivariant():
    # annulus patch of the rotated circle: area 4 pi^2 R^2 for the centred radius-R circle
    eq = lg.Equivariant(shapes.circle(radius=1.5, samples=512))
    (w,) = lg.measure_weights(eq)
    assert abs(w.sum() - 4 * np.pi**2 * 1.5**2) < 1e-3
    assert lg.ambient_points(eq, 3).shape == (2, 2)
