"""Explicit integration of the reduced mean curvature flow.

Every configuration class is advanced through its governing curves, moving
each node along its vertex normal with speed

* ``kappa`` for planar curves and product factors,
* ``kappa - <g, nu>/|g|^2`` for equivariant profiles.

Steps are explicit midpoint (RK2) with ``dt <= cfl * min_spacing^2`` and
``dt <= kappa_cap / sup|II|^2``.  Nodes are redistributed by spline
resampling every ``resample_every`` steps; between resamples the motion is
purely normal.  Open curves keep their endpoints pinned.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline

from lagflow import functionals, geom, lagrangian as lg

log = logging.getLogger(__name__)

# termination codes of the compiled kernel
_RUNNING, _STOP_II, _STOP_TIME, _NAN, _COLLAPSE, _ORIGIN, _CHECKPOINT, _MAXSTEP = range(8)


class StepFailure(RuntimeError):
    """Numerical breakdown: non-finite update or collapsed spacing."""


@dataclass(frozen=True)
class FlowParams:
    cfl: float = 0.25
    kappa_cap: float = 0.25
    resample_every: int = 50
    target_spacing_fraction: float = 1.0 / 512
    stop_max_ii: float = 100.0
    stop_time: float | None = None
    checkpoint_dt: float = 0.01
    growth_factor: float = 1.05
    resample_mode: str = "curvature"
    curvature_exponent: float = 1.0
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not 0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        for name in ("kappa_cap", "target_spacing_fraction", "stop_max_ii", "checkpoint_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.resample_every < 1:
            raise ValueError("resample_every must be at least 1")
        if self.stop_time is not None and not self.stop_time >= 0:
            raise ValueError("stop_time must be non-negative")
        if not self.growth_factor > 1:
            raise ValueError("growth_factor must exceed 1")

    @property
    def samples(self) -> int:
        return int(round(1.0 / self.target_spacing_fraction))


@dataclass(frozen=True)
class FlowState:
    t: float
    config: object
    steps: int = 0


@dataclass
class FlowTrace:
    checkpoints: list
    series: dict
    termination: str
    tracked_cycles: list = field(default_factory=list)
    tracked_centers: list = field(default_factory=list)
    params: FlowParams | None = None
    message: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.series["t"])

    @property
    def sup_ii(self) -> np.ndarray:
        return np.asarray(self.series["sup_II"])


# --- compiled kernel -------------------------------------------------------


@njit(cache=True)
def _velocity(pts, offsets, closed, equivariant, vel, ii):
    for f in range(len(offsets) - 1):
        a, b = offsets[f], offsets[f + 1]
        n = b - a
        for j in range(n):
            i = a + j
            if closed[f]:
                im = a + (j - 1) % n
                ip = a + (j + 1) % n
            elif j == 0 or j == n - 1:
                vel[i, 0] = 0.0
                vel[i, 1] = 0.0
                ii[i] = -1.0
                continue
            else:
                im = i - 1
                ip = i + 1
            e0x = pts[i, 0] - pts[im, 0]
            e0y = pts[i, 1] - pts[im, 1]
            e1x = pts[ip, 0] - pts[i, 0]
            e1y = pts[ip, 1] - pts[i, 1]
            turn = math.atan2(e0x * e1y - e0y * e1x, e0x * e1x + e0y * e1y)
            cx = 0.5 * (pts[ip, 0] - pts[im, 0])
            cy = 0.5 * (pts[ip, 1] - pts[im, 1])
            cl = math.hypot(cx, cy)
            k = turn / cl
            nx = -cy / cl
            ny = cx / cl
            v = k
            q = abs(k)
            if equivariant:
                r2 = pts[i, 0] ** 2 + pts[i, 1] ** 2
                av = (pts[i, 0] * nx + pts[i, 1] * ny) / r2
                v = k - av
                q = math.sqrt(k * k + 3.0 * av * av)
            vel[i, 0] = v * nx
            vel[i, 1] = v * ny
            ii[i] = q
        if not closed[f]:
            ii[a] = ii[a + 1]
            ii[b - 1] = ii[b - 2]


@njit(cache=True)
def _sup_ii(ii, offsets):
    total = 0.0
    for f in range(len(offsets) - 1):
        m = 0.0
        for i in range(offsets[f], offsets[f + 1]):
            if ii[i] > m:
                m = ii[i]
        total += m * m
    return math.sqrt(total)


@njit(cache=True)
def _min_spacing(pts, offsets, closed):
    h = np.inf
    for f in range(len(offsets) - 1):
        a, b = offsets[f], offsets[f + 1]
        n = b - a
        last = n if closed[f] else n - 1
        for j in range(last):
            i = a + j
            ip = a + (j + 1) % n
            d = math.hypot(pts[ip, 0] - pts[i, 0], pts[ip, 1] - pts[i, 1])
            if d < h:
                h = d
    return h


@njit(cache=True)
def _min_radius2(pts):
    r = np.inf
    for i in range(len(pts)):
        v = pts[i, 0] ** 2 + pts[i, 1] ** 2
        if v < r:
            r = v
    return r


@njit(cache=True)
def _advance(pts, offsets, closed, equivariant, t, t_stop, n_steps, cfl, kcap, stop_ii, ii_target,
             spacing_floor, origin_tol, sign):
    """Take up to ``n_steps`` midpoint steps; stop early on any event."""
    vel = np.empty_like(pts)
    ii = np.empty(len(pts))
    half = np.empty_like(pts)
    dt = 0.0
    q = 0.0
    for s in range(n_steps):
        _velocity(pts, offsets, closed, equivariant, vel, ii)
        q = _sup_ii(ii, offsets)
        if not math.isfinite(q):
            return t, dt, q, s, _NAN
        if q > stop_ii:
            return t, dt, q, s, _STOP_II
        if q > ii_target:
            return t, dt, q, s, _CHECKPOINT
        h = _min_spacing(pts, offsets, closed)
        if h < spacing_floor:
            return t, dt, q, s, _COLLAPSE
        if equivariant:
            r2 = _min_radius2(pts)
            if r2 <= origin_tol * origin_tol:
                return t, dt, q, s, _ORIGIN
        dt = cfl * h * h
        if q > 0:
            dt = min(dt, kcap / (q * q))
        if equivariant:
            dt = min(dt, kcap * r2)
        if t + dt >= t_stop:
            dt = t_stop - t
        for i in range(len(pts)):
            half[i, 0] = pts[i, 0] + 0.5 * dt * sign * vel[i, 0]
            half[i, 1] = pts[i, 1] + 0.5 * dt * sign * vel[i, 1]
        _velocity(half, offsets, closed, equivariant, vel, ii)
        if equivariant:
            # refuse a step that could carry a node inside the origin tolerance
            vmax = 0.0
            for i in range(len(pts)):
                vmax = max(vmax, math.hypot(vel[i, 0], vel[i, 1]))
            if math.sqrt(r2) - dt * vmax <= origin_tol:
                return t, dt, q, s, _ORIGIN
        for i in range(len(pts)):
            pts[i, 0] += dt * sign * vel[i, 0]
            pts[i, 1] += dt * sign * vel[i, 1]
            if not (math.isfinite(pts[i, 0]) and math.isfinite(pts[i, 1])):
                return t, dt, q, s + 1, _NAN
        t = t + dt
        if t >= t_stop:
            return t, dt, q, s + 1, _STOP_TIME
    return t, dt, q, n_steps, _RUNNING


# --- python layer ----------------------------------------------------------


def _pack(config):
    curves = config.curves
    pts = np.concatenate([c.points for c in curves]).copy()
    offsets = np.cumsum([0] + [len(c) for c in curves]).astype(np.int64)
    closed = np.array([c.closed for c in curves])
    return pts, offsets, closed


def _unpack(config, pts, offsets):
    curves = [
        geom.DiscreteCurve(pts[offsets[k] : offsets[k + 1]], c.closed) for k, c in enumerate(config.curves)
    ]
    return config.with_curves(curves)


# sign of the normal velocity; flipped only by mutation tests
VELOCITY_SIGN = 1.0


def velocity(config) -> tuple[np.ndarray, ...]:
    """Normal speed per node of each governing curve (along ``vertex_normals``).

    Pinned endpoints of open curves report 0.
    """
    pts, offsets, closed = _pack(config)
    vel = np.empty_like(pts)
    ii = np.empty(len(pts))
    _velocity(pts, offsets, closed, isinstance(config, lg.Equivariant), vel, ii)
    out = []
    for k, c in enumerate(config.curves):
        v = vel[offsets[k] : offsets[k + 1]]
        out.append(VELOCITY_SIGN * np.einsum("ij,ij->i", v, geom.vertex_normals(c)))
    return tuple(out)


def time_step(config, params: FlowParams) -> float:
    """Largest step allowed by both CFL bounds."""
    h = min(np.min(geom.segment_lengths(c)) for c in config.curves)
    dt = params.cfl * h * h
    q = lg.second_fundamental_sup(config)
    if q > 0:
        dt = min(dt, params.kappa_cap / q**2)
    if isinstance(config, lg.Equivariant):
        dt = min(dt, params.kappa_cap * float(np.min(np.sum(config.profile.points**2, axis=1))))
    return dt


def resample_config(config, params: FlowParams):
    curves = []
    for c in config.curves:
        spacing = geom.length(c) * params.target_spacing_fraction
        rp = geom.ResampleParams(
            min(spacing, geom.length(c) / geom.MIN_POINTS), params.resample_mode, params.curvature_exponent
        )
        weights = None
        if isinstance(config, lg.Equivariant):
            weights = lg.second_fundamental_norms(config)[0]
        curves.append(geom.resample(c, rp, count=params.samples, curvature=weights))
    return config.with_curves(curves)


def step(state: FlowState, params: FlowParams) -> FlowState:
    """One explicit midpoint step (plus resampling on its cadence)."""
    t_stop = params.stop_time if params.stop_time is not None else np.inf
    if state.t >= t_stop:
        return state
    pts, offsets, closed = _pack(state.config)
    eq = isinstance(state.config, lg.Equivariant)
    tol = state.config.origin_tol if eq else 0.0
    t, dt, q, taken, code = _advance(
        pts, offsets, closed, eq, state.t, t_stop, 1, params.cfl, params.kappa_cap, np.inf, np.inf, 0.0,
        tol, VELOCITY_SIGN,
    )
    if code == _NAN:
        raise StepFailure("non-finite values in update")
    if code == _ORIGIN:
        raise lg.OriginProximityError("profile reached the origin")
    config = _unpack(state.config, pts, offsets)
    steps = state.steps + taken
    if steps % params.resample_every == 0:
        config = resample_config(config, params)
    return FlowState(t, config, steps)


def run(initial, params: FlowParams, tracked_cycles=None, tracked_centers=None) -> FlowTrace:
    """Integrate until blow-up, ``stop_time`` or numerical failure.

    A series row and a checkpoint are emitted at t = 0, every
    ``checkpoint_dt``, whenever sup|II| has grown by ``growth_factor`` since
    the last row, and at termination.  Pairings and functionals in each row
    are recomputed from the geometry.
    """
    tracked_cycles = list(tracked_cycles if tracked_cycles is not None else lg.default_cycles(initial))
    for cyc in tracked_cycles:
        lg.check_cycle(initial, cyc)
    tracked_centers = list(tracked_centers or [])
    q0 = lg.second_fundamental_sup(initial)
    if not params.stop_max_ii > q0:
        raise ValueError(f"stop_max_ii={params.stop_max_ii:g} must exceed the initial sup|II|={q0:g}")

    recorder = functionals.SeriesRecorder(initial, tracked_cycles, tracked_centers)
    config = resample_config(initial, params)
    eq = isinstance(config, lg.Equivariant)
    tol = config.origin_tol if eq else 0.0
    t = 0.0
    steps = 0
    t_stop = params.stop_time if params.stop_time is not None else np.inf
    checkpoints = []
    last_dt = 0.0

    def emit(cfg, t_now, dt_now):
        checkpoints.append(FlowState(t_now, cfg, steps))
        recorder.record(cfg, t_now, dt_now)

    emit(config, t, 0.0)
    next_ckpt = params.checkpoint_dt
    ii_ref = lg.second_fundamental_sup(config)
    termination, message = None, ""
    spacing_ref = min(np.min(geom.segment_lengths(c)) for c in config.curves)

    while termination is None:
        pts, offsets, closed = _pack(config)
        burst = params.resample_every - steps % params.resample_every
        t_new, dt, q, taken, code = _advance(
            pts, offsets, closed, eq, t, min(t_stop, next_ckpt), burst, params.cfl, params.kappa_cap,
            params.stop_max_ii, ii_ref * params.growth_factor, 1e-3 * spacing_ref, tol, VELOCITY_SIGN,
        )
        if taken:
            last_dt = dt
        steps += taken
        t = t_new
        if code in (_NAN, _COLLAPSE):
            termination = "step-failure"
            message = "non-finite update" if code == _NAN else "spacing collapse"
            break
        try:
            config = _unpack(config, pts, offsets)
        except (geom.InvalidCurveError, lg.ConfigError) as exc:
            termination, message = "step-failure", str(exc)
            break
        if code in (_STOP_II, _ORIGIN):
            termination = "blow-up"
            message = "sup|II| above threshold" if code == _STOP_II else "profile reached the origin"
            emit(config, t, last_dt)
            break
        if code == _STOP_TIME and t >= t_stop:
            termination = "stop_time"
            emit(config, t, last_dt)
            break
        if steps >= params.max_steps:
            termination, message = "step-failure", "step budget exhausted"
            emit(config, t, last_dt)
            break
        if code == _RUNNING and steps % params.resample_every == 0:
            try:
                config = resample_config(config, params)
            except (ValueError, geom.UnderResolvedCurveError) as exc:
                termination, message = "step-failure", f"resample failed: {exc}"
                break
            spacing_ref = min(np.min(geom.segment_lengths(c)) for c in config.curves)
        if code == _CHECKPOINT or (code == _STOP_TIME and t >= next_ckpt):
            try:
                emit(config, t, last_dt)
            except (geom.UnderResolvedCurveError, lg.ConfigError) as exc:
                termination, message = "step-failure", str(exc)
                break
            ii_ref = lg.second_fundamental_sup(config)
            while next_ckpt <= t:
                next_ckpt += params.checkpoint_dt

    log.info("run finished: %s at t=%.6g after %d steps (%s)", termination, t, steps, message)
    return FlowTrace(
        checkpoints=checkpoints,
        series=recorder.finish(),
        termination=termination,
        tracked_cycles=tracked_cycles,
        tracked_centers=tracked_centers,
        params=params,
        message=message,
    )


def beta_heat_residual(trace: FlowTrace, window) -> float:
    """Sup residual of the heat equation for the Lagrangian angle.

    Angles at consecutive checkpoints are compared at equal arclength
    fractions from node 0 (node 0 moves normally), with the tangential drift
    of fixed fractions relative to normally moving points removed.  The
    residual ``d_t beta - Laplacian(beta)`` uses a three-point time difference
    (checkpoint times need not be evenly spaced) on interior checkpoints.
    """
    t0, t1 = window
    # growth-triggered checkpoints can sit a few steps apart; a time
    # difference over such a gap only amplifies rounding
    gap = 0.5 * trace.params.checkpoint_dt
    states = []
    for s in trace.checkpoints:
        if t0 <= s.t <= t1 and (not states or s.t - states[-1].t >= gap):
            states.append(s)
    if len(states) < 3:
        raise functionals.DomainError("need at least 3 checkpoints in the window")
    profiles = [_angle_profile(s.config) for s in states]
    worst = 0.0
    for k in range(1, len(states) - 1):
        u, beta, beta_s, lap, drift = profiles[k][:5]
        bm = _sample_at(profiles[k - 1], u, beta)
        bp = _sample_at(profiles[k + 1], u, beta)
        hm, hp = states[k].t - states[k - 1].t, states[k + 1].t - states[k].t
        beta_t = (hm**2 * (bp - beta) + hp**2 * (beta - bm)) / (hp * hm * (hp + hm))
        resid = beta_t - beta_s * drift - lap
        if not states[k].config.curves[0].closed:
            resid = resid[2:-2]
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def _angle_profile(config):
    if isinstance(config, lg.Product):
        raise functionals.DomainError("heat residual is computed per curve; pass planar or equivariant traces")
    c = config.curves[0]
    field_ = lg.lagrangian_angle(config)[0]
    beta = field_.nodes
    s_full = geom.arclengths(c)
    s = s_full[: len(c)]
    kv = geom.curvature(c) * velocity(config)[0]
    # arclength drift of fixed fractions relative to normally moving points
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (kv[1:] + kv[:-1]) * np.diff(s))])
    total = float(np.sum(kv * geom.dual_lengths(c))) if c.closed else cum[-1]
    u = s / s_full[-1]
    drift = cum - u * total
    if c.closed:
        jump = field_.samples[-1] - field_.samples[0]
        beta_s = _periodic_derivative(beta, s_full, jump)
        beta_ss = _periodic_derivative(beta_s, s_full, 0.0)
    else:
        jump = 0.0
        beta_s = np.gradient(beta, s)
        beta_ss = np.gradient(beta_s, s)
    lap = beta_ss
    if isinstance(config, lg.Equivariant):
        pts = c.points
        radial = np.einsum("ij,ij->i", pts, geom.vertex_tangents(c)) / np.einsum("ij,ij->i", pts, pts)
        lap = beta_ss + radial * beta_s
    return u, beta, beta_s, lap, drift, jump, c.closed


def _periodic_derivative(f, s_full, jump):
    """Centred derivative on a closed curve with non-uniform spacing; ``f`` gains ``jump`` per loop."""
    h = np.diff(s_full)
    fp = np.roll(f, -1)
    fp[-1] += jump
    fm = np.roll(f, 1)
    fm[0] -= jump
    hp, hm = h, np.roll(h, 1)
    return (hm**2 * (fp - f) + hp**2 * (f - fm)) / (hp * hm * (hp + hm))


def _sample_at(profile, u, reference):
    u_o, beta_o, jump, closed = profile[0], profile[1], profile[5], profile[6]
    # cubic interpolation: a linear one would leave an O(h^2 / dt) error in beta_t
    if closed:
        periodic = beta_o - jump * u_o
        spline = CubicSpline(np.append(u_o, 1.0), np.append(periodic, periodic[0]), bc_type="periodic")
        vals = spline(u) + jump * u
    else:
        vals = CubicSpline(u_o, beta_o)(u)
    # lifts at different times may differ by multiples of 2 pi
    shift = 2 * np.pi * np.rint(np.mean(reference - vals) / (2 * np.pi))
    return vals + shift


def scale_trace_state(state: FlowState, alpha: float) -> FlowState:
    return replace(state, t=state.t * alpha**2, config=lg.scale_config(state.config, alpha))
