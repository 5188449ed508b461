"""Self-checks run by ``lagflow verify``.

Each suite returns a :class:`SuiteResult`.  The suites use reduced
resolutions so the whole set finishes in a few minutes.  ``step_cfl``
overrides the step coefficient of the stability suite, which lets tests
confirm that an unstable step is caught.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from lagflow import embedding, flow, functionals as fn, geom, lagrangian as lg, shapes, singularity as sg


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _off_center_ellipse(n=2048):
    t = np.arange(n) * 2 * np.pi / n
    pts = np.column_stack([2.0 + 1.3 * np.cos(t), 0.5 + 0.6 * np.sin(t)])
    return geom.DiscreteCurve(pts)


def embedding_oracle():
    """Reduced equivariant speed and |II| against finite differences of the surface."""
    prof = _off_center_ellipse()
    cfg = lg.Equivariant(prof)
    speed = flow.velocity(cfg)[0]
    ii = lg.second_fundamental_norms(cfg)[0]
    fn_prof, s_nodes = embedding.spline_profile(prof)
    worst = 0.0
    for k in range(0, len(prof), 256):
        ref_v, _, ref_ii = embedding.equivariant_oracle(fn_prof, s_nodes[k], r=0.4, h=1e-3)
        worst = max(worst, abs(speed[k] - ref_v) / abs(ref_v), abs(ii[k] - ref_ii) / ref_ii)
    return worst <= 1e-4, f"max relative error {worst:.3g}"


def _short_runs():
    p = dict(checkpoint_dt=0.01)
    return [
        ("circle", lg.Planar(shapes.circle(samples=128)), flow.FlowParams(stop_time=0.4, **p)),
        ("ellipse", lg.Planar(shapes.ellipse(2.0, 1.0, samples=128)), flow.FlowParams(stop_time=0.5, **p)),
        ("product", lg.Product((shapes.circle(samples=128), shapes.circle(radius=2.0, samples=128))),
         flow.FlowParams(stop_time=0.4, **p)),
        ("equivariant", lg.Equivariant(shapes.circle(samples=128)), flow.FlowParams(stop_time=0.2, **p)),
        ("figure-eight", lg.Planar(shapes.lemniscate(samples=128)), flow.FlowParams(stop_time=0.1, **p)),
    ]


def pairing_evolution():
    worst = 0.0
    for name, cfg, params in _short_runs():
        trace = flow.run(cfg, params)
        s = trace.series
        for cyc in trace.tracked_cycles:
            lam, h = s[f"lambda_{cyc.name}"], s[f"maslov_{cyc.name}"]
            if np.ptp(h) != 0:
                return False, f"{name}: Maslov pairing of {cyc.name} changed"
            dev = np.max(np.abs(lam - lam[0] + 2 * s["t"] * h)) / (1 + abs(lam[0]))
            worst = max(worst, dev)
    return worst <= 1e-3, f"max relative drift {worst:.3g}"


def monotonicity():
    """Theta and B non-increasing along short runs; osc beta bounded."""
    worst_theta = worst_b = 0.0
    for name, cfg, params in _short_runs():
        centres = [fn.SpacetimeCenter(np.zeros((cfg.dim, 2)), 1.0)]
        trace = flow.run(cfg, params, tracked_centers=centres)
        s = trace.series
        worst_theta = max(worst_theta, float(np.nanmax(np.diff(s["theta_0"]))))
        b = s["B_0"]
        if np.all(np.isfinite(b)):
            worst_b = max(worst_b, float(np.max(np.diff(b))))
        if np.max(s["osc_beta"]) > s["osc_beta"][0] + 2 * np.pi:
            return False, f"{name}: osc beta exceeded its bound"
    ok = worst_theta <= 5e-4 and worst_b <= 5e-4
    return ok, f"max Theta increase {worst_theta:.3g}, max B increase {worst_b:.3g}"


def scaling_equivariance():
    alpha = 2.0
    base = lg.Planar(shapes.ellipse(2.0, 1.0, samples=128))
    big = lg.scale_config(base, alpha)
    t1 = 0.2
    a = flow.run(base, flow.FlowParams(stop_time=t1)).checkpoints[-1]
    b = flow.run(big, flow.FlowParams(stop_time=alpha**2 * t1)).checkpoints[-1]
    back = lg.scale_config(b.config, 1 / alpha)
    d = geom.hausdorff_distance(a.config.curve, back.curve)
    return d <= 1e-3, f"Hausdorff distance {d:.3g}"


def synthetic_lines(angles, rng=None, noise=0.0, extent=14.0, samples=400):
    """Union of lines through the origin as one open polyline.

    Consecutive lines are joined end to end far outside the Gaussian window,
    so every sample carrying weight lies on one of the lines.
    """
    pts = []
    for k, th in enumerate(angles):
        r = np.linspace(-extent, extent, samples)
        if k % 2:
            r = r[::-1]
        seg = np.column_stack([r * math.cos(th), r * math.sin(th)])
        if rng is not None and noise > 0:
            d = np.array([-math.sin(th), math.cos(th)])
            seg = seg + noise * rng.standard_normal(samples)[:, None] * d
        pts.append(seg)
    return geom.DiscreteCurve(np.vstack(pts), closed=False)


def cone_fit_oracle(trials=20, seed=7):
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        k = int(rng.integers(1, 5))
        while True:
            ang = np.sort(rng.uniform(0, np.pi, k))
            gaps = np.diff(np.concatenate([ang, [ang[0] + np.pi]]))
            if k == 1 or gaps.min() > 0.4:
                break
        fit = sg.fit_cones(lg.Planar(synthetic_lines(ang, rng, 1e-3)))
        if len(fit.pieces) != k or any(p.multiplicity != 1 or p.kind != "line" for p in fit.pieces):
            return False, f"trial {trial}: expected {k} lines, got {[(p.kind, p.multiplicity) for p in fit.pieces]}"
        found = np.sort(np.mod([math.atan2(p.direction[1], p.direction[0]) for p in fit.pieces], np.pi))
        err = np.max(np.minimum(np.abs(found - ang), np.pi - np.abs(found - ang)))
        if err > 1e-2:
            return False, f"trial {trial}: direction error {err:.3g}"
    return True, f"{trials} synthetic unions recovered"


def rescale_algebra():
    cfgs = [
        lg.Planar(shapes.ellipse(2.0, 1.0, samples=128, center=(0.3, -0.2))),
        lg.Product((shapes.circle(samples=64), shapes.ellipse(1.5, 0.7, samples=64))),
        lg.Equivariant(_off_center_ellipse(256)),
    ]
    worst = 0.0
    for cfg in cfgs:
        alpha = 1.7
        centre = np.zeros((cfg.dim, 2)) if isinstance(cfg, lg.Equivariant) else 0.1 * np.ones((cfg.dim, 2))
        frame = sg.RescaleFrame("tangent", centre, 0.0, alpha)
        out = sg.rescale(flow.FlowState(0.0, cfg), frame)
        for cyc in lg.default_cycles(cfg):
            lam0 = lg.liouville_pairing(cfg, cyc, centre)
            lam1 = lg.liouville_pairing(out, cyc)
            worst = max(worst, abs(lam1 - alpha**2 * lam0) / (1 + abs(lam1)))
            if lg.maslov_pairing(cfg, cyc) != lg.maslov_pairing(out, cyc):
                return False, "Maslov pairing changed under rescaling"
        inv = sg.rescale(flow.FlowState(0.0, out), sg.RescaleFrame("tangent", np.zeros((cfg.dim, 2)), 0.0, 1 / alpha))
        for k, (c0, c1) in enumerate(zip(cfg.curves, inv.curves)):
            worst = max(worst, float(np.max(np.abs(c1.points - (c0.points - centre[k])))))
    return worst <= 1e-9, f"max pairing or round-trip error {worst:.3g}"


def shrinker_fixed_point():
    """One step of the self-shrinking circle, rescaled back, reproduces it to O(dt)."""
    tau = 1.0
    cfg = lg.Planar(shapes.circle(radius=math.sqrt(2 * tau), samples=256))
    params = flow.FlowParams(resample_every=1000)
    dt = flow.time_step(cfg, params)
    state = flow.step(flow.FlowState(0.0, cfg), params)
    back = lg.scale_config(state.config, math.sqrt(tau / (tau - state.t)))
    d = geom.hausdorff_distance(cfg.curve, back.curve)
    resid = fn.shrinker_residual(cfg, fn.SpacetimeCenter(np.zeros((1, 2)), tau), 0.0)
    ok = d <= 10 * dt**2 + 1e-12 and resid < 1e-6
    return ok, f"deviation {d:.3g} (dt {dt:.3g}), residual {resid:.3g}"


def step_stability(step_cfl=None, steps=400, seed=3):
    """High-frequency noise on a circle must decay under the explicit step."""
    cfl = flow.FlowParams().cfl if step_cfl is None else step_cfl
    rng = np.random.default_rng(seed)
    c = shapes.circle(samples=128)
    r = 1.0 + 1e-6 * rng.standard_normal(len(c))
    pts = c.points * r[:, None]
    cfg = lg.Planar(geom.DiscreteCurve(pts))
    packed, offsets, closed = flow._pack(cfg)
    flow._advance(packed, offsets, closed, False, 0.0, np.inf, steps, cfl, 0.25, np.inf, np.inf, 0.0, 0.0,
                  flow.VELOCITY_SIGN)
    if not np.all(np.isfinite(packed)):
        return False, "non-finite points"
    rad = np.hypot(packed[:, 0], packed[:, 1])
    ripple = float(np.ptp(rad) / np.mean(rad))
    return ripple <= 1e-5, f"relative ripple after {steps} steps {ripple:.3g}"


SUITES = {
    "embedding_oracle": embedding_oracle,
    "step_stability": step_stability,
    "pairing_evolution": pairing_evolution,
    "monotonicity": monotonicity,
    "scaling_equivariance": scaling_equivariance,
    "cone_fit_oracle": cone_fit_oracle,
    "rescale_algebra": rescale_algebra,
    "shrinker_fixed_point": shrinker_fixed_point,
}


def run_all(step_cfl=None, only=None) -> list[SuiteResult]:
    results = []
    for name, suite in SUITES.items():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = suite(step_cfl) if name == "step_stability" else suite()
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
