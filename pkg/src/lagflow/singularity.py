"""Blow-up time estimation, type I/II classification and rescaling analysis.

Candidate singular times come from the pairings: a type I singularity can
only happen at ``T = lambda.g / (2 h.g)`` for some cycle ``g`` with
``h.g != 0``.  The three rescalings are

* tangent frames, ``alpha = (T - t)^(-1/2)`` about a fixed point,
* smooth blow-ups, ``alpha = Q_j`` about the curvature maximum,
* recovery blow-downs, ``eps_j^(-2) = Q_j (T - t_j)^(1/2)`` applied on top
  of the blow-up (total scale ``eps_j Q_j``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from lagflow import functionals, geom, lagrangian as lg
from lagflow.functionals import DomainError, SpacetimeCenter

log = logging.getLogger(__name__)

TYPE_I_BAND = (-1.15, -0.85)
TYPE_II_SLOPE = -1.3
MATCH_TOLERANCE = 0.02
MERGE_ANGLE = 0.1
MAX_PIECES = 8
MIN_CONE_SAMPLES = 32


@dataclass(frozen=True)
class CandidateEntry:
    cycle: lg.CycleId
    T_candidate: float | None
    lambda_pairing: float
    maslov_pairing: float

    @property
    def defined(self):
        return self.T_candidate is not None


@dataclass(frozen=True)
class CandidateTimes:
    entries: tuple

    def defined_times(self):
        """Positive defined candidates, earliest first."""
        return sorted((e.T_candidate, e.cycle) for e in self.entries if e.defined and e.T_candidate > 0)

    def first(self):
        times = self.defined_times()
        return times[0] if times else None


@dataclass(frozen=True)
class TimeFit:
    T: float
    fallback: bool
    r_squared: float
    window: tuple
    rows: int


@dataclass(frozen=True)
class TypeClassification:
    kind: str  # "TypeI" | "TypeII" | "Inconclusive"
    slope: float
    window: tuple
    rows: int
    C_est: float | None = None

    def __post_init__(self):
        if self.kind == "TypeI" and not (self.C_est is not None and self.C_est > 0):
            raise ValueError("a type I classification needs C_est > 0")


@dataclass(frozen=True)
class RescaleFrame:
    kind: str  # "tangent" | "smooth_blowup" | "blow_down"
    center: np.ndarray
    time: float
    scale: float
    base_scale: float = 1.0
    checkpoint: int = -1

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("frame scale must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def total_scale(self):
        """Scale applied to the original flow (blow-downs act on the blow-up)."""
        return self.scale * self.base_scale


@dataclass(frozen=True)
class ConePiece:
    direction: np.ndarray
    kind: str  # "ray" | "line" | "plane"
    multiplicity: int
    mean_beta: float
    beta_spread: float
    mass: float
    beta_modes: tuple = ()


@dataclass(frozen=True)
class ConeFit:
    pieces: tuple
    residual: float
    pairwise_angles: tuple


@dataclass
class SingularityReport:
    T_est: float
    T_fit: TimeFit
    classification: TypeClassification
    candidates: CandidateTimes
    matched_candidate: lg.CycleId | None
    frames: list
    shrinker_fit: list
    cone_fit: ConeFit | None = None
    is_first_candidate: bool | None = None
    candidate_mismatch: bool = False
    pairings_at_T: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


# --- candidate times and blow-up time --------------------------------------


def predict_typeI_times(config, cycles=None) -> CandidateTimes:
    cycles = lg.default_cycles(config) if cycles is None else list(cycles)
    entries = []
    for cyc in cycles:
        pv = lg.pairing(config, cyc)
        T = pv.lambda_pairing / (2 * pv.maslov_pairing) if pv.maslov_pairing != 0 else None
        entries.append(CandidateEntry(cyc, T, pv.lambda_pairing, pv.maslov_pairing))
    return CandidateTimes(tuple(entries))


def _require_blowup(trace):
    if trace.termination != "blow-up":
        raise DomainError(f"trace ended by {trace.termination}, not blow-up")


def final_decade(trace) -> np.ndarray:
    """Boolean mask of rows whose sup|II| is within a factor 10 of the last one."""
    q = trace.sup_ii
    return q >= q[-1] / 10.0


def fit_blowup_time(trace) -> TimeFit:
    """Zero of the least-squares line through ``1/sup|II|^2`` on the final decade.

    A fit with R^2 < 0.9, or one that puts the blow-up at or before the last
    row, is replaced by ``t_last + dt_last`` and flagged.
    """
    _require_blowup(trace)
    t, q = trace.times, trace.sup_ii
    mask = final_decade(trace)
    tt, y = t[mask], 1.0 / q[mask] ** 2
    last = t[-1] + trace.series["dt"][-1]
    window = (float(tt[0]), float(tt[-1]))
    if len(tt) < 3:
        return TimeFit(float(last), True, math.nan, window, len(tt))
    slope, icpt = np.polyfit(tt, y, 1)
    pred = slope * tt + icpt
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - pred) ** 2) / ss if ss > 0 else 1.0
    T = -icpt / slope if slope < 0 else math.inf
    if r2 < 0.9 or not math.isfinite(T) or T <= t[-1]:
        log.info("blow-up time fit rejected (R^2=%.4f, T=%.6g); using last time", r2, T)
        return TimeFit(float(last), True, float(r2), window, len(tt))
    return TimeFit(float(T), False, float(r2), window, len(tt))


def estimate_T(trace) -> float:
    return fit_blowup_time(trace).T


def classify_type(trace, T_est: float) -> TypeClassification:
    """Slope of ``log sup|II|^2`` against ``log(T_est - t)`` on the final decade."""
    _require_blowup(trace)
    t, q = trace.times, trace.sup_ii
    mask = final_decade(trace) & (t < T_est)
    if mask.sum() < 20:
        raise DomainError(f"only {mask.sum()} rows in the final decade; need 20")
    x = np.log(T_est - t[mask])
    y = np.log(q[mask] ** 2)
    slope = float(np.polyfit(x, y, 1)[0])
    window = (float(t[mask][0]), float(t[mask][-1]))
    lo, hi = TYPE_I_BAND
    if lo <= slope <= hi:
        C = float(np.median(q[mask] ** 2 * (T_est - t[mask])))
        return TypeClassification("TypeI", slope, window, int(mask.sum()), C)
    kind = "TypeII" if slope < TYPE_II_SLOPE else "Inconclusive"
    return TypeClassification(kind, slope, window, int(mask.sum()))


# --- frames -----------------------------------------------------------------


def _argmax_point(config) -> np.ndarray:
    if isinstance(config, lg.Equivariant):
        return np.zeros((2, 2))
    norms = lg.second_fundamental_norms(config)
    return lg.ambient_points(config, [int(np.argmax(n)) for n in norms])


def _checkpoint_q(trace):
    return np.array([lg.second_fundamental_sup(s.config) for s in trace.checkpoints])


def blowup_points(trace, T_est: float, count: int = 8, type_ii: bool = False) -> list:
    """Smooth blow-up frames ``alpha_j = Q_j`` at curvature-maximising checkpoints.

    ``Q_j`` is the running maximum of sup|II|.  The type II branch keeps only
    checkpoints that set a new record of ``Q_j^2 (T_est - t_j)``.  Equivariant
    frames are centred at the origin, the only centre the symmetry allows.
    """
    _require_blowup(trace)
    q = np.maximum.accumulate(_checkpoint_q(trace))
    times = np.array([s.t for s in trace.checkpoints])
    order = []
    record, best_q = -np.inf, -np.inf
    for j in range(len(times)):
        if q[j] <= best_q:
            continue
        if type_ii:
            if times[j] >= T_est:
                continue
            score = q[j] ** 2 * (T_est - times[j])
            if score < record:
                continue
            record = score
        best_q = q[j]
        order.append(j)
    if len(order) < 2 and type_ii:
        return blowup_points(trace, T_est, count, type_ii=False)
    frames = []
    for j in order[-count:]:
        state = trace.checkpoints[j]
        frames.append(RescaleFrame("smooth_blowup", _argmax_point(state.config), state.t, float(q[j]), checkpoint=j))
    return frames


def _collapse_center(config) -> np.ndarray:
    """Fixed point for tangent frames: centroid of the collapsing curve."""
    if isinstance(config, lg.Equivariant):
        return np.zeros((2, 2))
    norms = lg.second_fundamental_norms(config)
    centre = lg.ambient_points(config, [int(np.argmax(n)) for n in norms])
    worst = int(np.argmax([np.max(n) for n in norms]))
    centre[worst] = geom.centroid(config.curves[worst])
    return centre


def tangent_frames(trace, T_est: float, count: int = 8) -> list:
    last = trace.checkpoints[-1]
    centre = _collapse_center(last.config)
    idx = [j for j, s in enumerate(trace.checkpoints) if s.t < T_est]
    frames = []
    for j in idx[-count:]:
        s = trace.checkpoints[j]
        frames.append(RescaleFrame("tangent", centre, s.t, float((T_est - s.t) ** -0.5), checkpoint=j))
    return frames


def rescale(state, frame: RescaleFrame):
    """``alpha (Sigma - x_j)`` for the frame's total scale."""
    try:
        return lg.scale_config(state.config, frame.total_scale, frame.center)
    except lg.ConfigError as exc:
        raise DomainError(str(exc)) from exc


def blow_down_frames(blowups: list, T_est: float) -> list:
    """Recovery blow-downs ``eps_j = (Q_j sqrt(T - t_j))^(-1/2)`` of smooth blow-up frames.

    The scales must decrease strictly; under a type I law they are constant
    and the construction is rejected.
    """
    if len(blowups) < 2:
        raise DomainError("need at least two smooth blow-up frames")
    frames = []
    for fr in blowups:
        if fr.time >= T_est:
            raise DomainError("blow-up frame at or after T_est")
        eps = (fr.scale * math.sqrt(T_est - fr.time)) ** -0.5
        frames.append(RescaleFrame("blow_down", fr.center, fr.time, eps, base_scale=fr.scale, checkpoint=fr.checkpoint))
    eps = np.array([f.scale for f in frames])
    if not np.all(np.diff(eps) < 0):
        raise DomainError("blow-down scales are not decreasing (type I behaviour; use tangent frames)")
    return frames


def fit_selfshrinker(config, center: SpacetimeCenter, t: float) -> float:
    return functionals.shrinker_residual(config, center, t)


# --- cone fitting ------------------------------------------------------------


def _circ_dist(a, b, period):
    d = np.mod(a - b, period)
    return np.minimum(d, period - d)


def _merge_directions(angles, weights, period, threshold):
    """Centroid-linkage agglomeration of angles on a circle of given period.

    Returns a list of index arrays, one per cluster.
    """
    order = np.lexsort((angles, -weights))  # canonical sort by weight
    order = order[np.argsort(angles[order], kind="stable")]
    scale = 2 * np.pi / period
    clusters = [[int(i)] for i in order]
    vec = [weights[i] * np.exp(1j * scale * angles[i]) for i in order]
    mass = [weights[i] for i in order]

    def centre(k):
        return np.angle(vec[k]) / scale if abs(vec[k]) > 0 else angles[clusters[k][0]]

    while len(clusters) > 1:
        cents = np.array([centre(k) for k in range(len(clusters))])
        gaps = _circ_dist(cents, np.roll(cents, -1), period)
        if len(clusters) == 2:
            gaps = gaps[:1]
        k = int(np.argmin(gaps))
        if gaps[k] >= threshold:
            break
        k2 = (k + 1) % len(clusters)
        clusters[k] += clusters[k2]
        vec[k] += vec[k2]
        mass[k] += mass[k2]
        del clusters[k2], vec[k2], mass[k2]
    return [np.array(c) for c in clusters]


def _beta_stats(beta, w):
    """Circular weighted mean, spread about it, and separated modes."""
    z = np.sum(w * np.exp(1j * beta))
    mean = float(np.angle(z))
    dev = geom._wrap(beta - mean)
    spread = float(np.sqrt(np.sum(w * dev**2) / np.sum(w)))
    modes = []
    for idx in _merge_directions(np.mod(beta, 2 * np.pi), w, 2 * np.pi, 0.5):
        share = np.sum(w[idx]) / np.sum(w)
        if share > 0.1:
            modes.append(float(np.angle(np.sum(w[idx] * np.exp(1j * beta[idx])))))
    return mean, spread, tuple(sorted(modes))


def _distance_to_piece(pts, direction, kind):
    along = pts @ direction
    perp = np.abs(pts[:, 0] * direction[1] - pts[:, 1] * direction[0])
    if kind == "ray":
        return np.where(along >= 0, perp, np.hypot(pts[:, 0], pts[:, 1]))
    return perp


def _piece_angle(a, b):
    c = float(np.clip(a.direction @ b.direction, -1.0, 1.0))
    ang = math.acos(c)
    if a.kind != "ray" and b.kind != "ray":
        ang = min(ang, math.pi - ang)
    return ang


def fit_cones(config, beta=None) -> ConeFit:
    """Fit a union of lines/planes through the origin to a blow-down.

    Sample directions are clustered with Gaussian weights ``theta_(0, 1)`` at
    t = 0.  Planar curves are clustered as rays (unit Gaussian mass 1/2), and
    two opposite rays of equal multiplicity form a line.  Equivariant
    profiles give planes ``e^(i theta) R^2``, so directions are taken mod pi
    with unit mass 1.  Clusters whose multiplicity rounds to 0 are dropped.
    """
    if isinstance(config, lg.Product):
        raise DomainError("cone fitting is implemented for planar and equivariant blow-downs")
    equivariant = isinstance(config, lg.Equivariant)
    curve = config.curves[0]
    pts = curve.points
    weights = functionals.gaussian_weights(config, SpacetimeCenter(np.zeros((config.dim, 2)), 1.0), 0.0)[0]
    radius = np.hypot(pts[:, 0], pts[:, 1])
    density = np.exp(-(radius**2) / 4) / (4 * np.pi) ** (config.dim / 2)
    usable = (density > 1e-6) & (radius > 1e-12)
    if usable.sum() < MIN_CONE_SAMPLES:
        raise DomainError(f"only {usable.sum()} samples carry Gaussian weight; need {MIN_CONE_SAMPLES}")
    beta = lg.lagrangian_angle(config) if beta is None else beta
    bvals = np.asarray(beta[0].nodes if isinstance(beta, tuple) else beta.nodes)
    idx = np.flatnonzero(usable)
    ang = np.arctan2(pts[idx, 1], pts[idx, 0])
    w = weights[idx]
    period = np.pi if equivariant else 2 * np.pi
    unit = 1.0 if equivariant else 0.5
    groups = _merge_directions(np.mod(ang, period), w, period, MERGE_ANGLE)
    raw = []
    for g in groups:
        m = float(np.sum(w[g]))
        mult = int(round(m / unit))
        if mult < 1:
            continue
        theta = np.angle(np.sum(w[g] * np.exp(1j * (2 * np.pi / period) * ang[g]))) * period / (2 * np.pi)
        direction = np.array([math.cos(theta), math.sin(theta)])
        mean, spread, modes = _beta_stats(bvals[idx][g], w[g])
        raw.append(ConePiece(direction, "plane" if equivariant else "ray", mult, mean, spread, m, modes))
    raw.sort(key=lambda p: -p.mass)
    raw = raw[: 2 * MAX_PIECES if not equivariant else MAX_PIECES]
    pieces = raw if equivariant else _pair_rays(raw)
    pieces = pieces[:MAX_PIECES]
    if pieces:
        dist = np.min([_distance_to_piece(pts[idx], p.direction, p.kind) for p in pieces], axis=0)
        residual = float(np.sum(w * dist**2) / np.sum(w))
    else:
        residual = float(np.sum(w * radius[idx] ** 2) / np.sum(w))
    angles = tuple(
        _piece_angle(pieces[i], pieces[j]) for i in range(len(pieces)) for j in range(i + 1, len(pieces))
    )
    return ConeFit(tuple(pieces), residual, angles)


def _pair_rays(rays):
    used = set()
    pieces = []
    for i, a in enumerate(rays):
        if i in used:
            continue
        partner = None
        for j in range(i + 1, len(rays)):
            b = rays[j]
            if j in used or b.multiplicity != a.multiplicity:
                continue
            if math.acos(float(np.clip(-a.direction @ b.direction, -1, 1))) < MERGE_ANGLE:
                partner = j
                break
        if partner is None:
            pieces.append(a)
            continue
        b = rays[partner]
        used.add(partner)
        d = a.direction - b.direction
        d = d / np.linalg.norm(d)
        m = a.mass + b.mass
        z = a.mass * np.exp(1j * a.mean_beta) + b.mass * np.exp(1j * b.mean_beta)
        spread = math.sqrt((a.mass * a.beta_spread**2 + b.mass * b.beta_spread**2) / m)
        pieces.append(
            ConePiece(d, "line", a.multiplicity, float(np.angle(z)), spread, m, tuple(sorted(a.beta_modes + b.beta_modes)))
        )
    return pieces


# --- grim reaper comparison -----------------------------------------------


def _tip_branch(pts, half_width):
    i0 = int(np.argmin(np.hypot(pts[:, 0], pts[:, 1])))
    n = len(pts)
    keep = [i0]
    for step in (1, -1):
        k = i0
        for _ in range(n // 2):
            k = (k + step) % n
            if np.hypot(*pts[k]) > 4 * half_width:
                break
            keep.append(k)
    return pts[sorted(set(keep))]


def grim_reaper_distance(config, center, scale, half_width=1.0) -> float:
    """Sup distance from a blown-up curve to ``y = log cos x`` on ``|x| <= half_width``.

    The curve is rescaled by ``scale`` about ``center`` and rigidly aligned
    (rotation and translation) to minimise the sup distance between the
    model graph on the window and the curve branch through the tip.
    """
    if not isinstance(config, lg.Planar):
        raise DomainError("grim reaper comparison is for planar curves")
    pts = scale * (config.curve.points - np.asarray(center, dtype=float).reshape(-1, 2)[0])
    branch = _tip_branch(pts, half_width)
    x = np.linspace(-half_width, half_width, 201)
    model = np.column_stack([x, np.log(np.cos(x))])
    # start from the tip with the model tangent along the curve tangent
    i_tip = int(np.argmin(np.hypot(branch[:, 0], branch[:, 1])))
    neigh = branch[max(i_tip - 3, 0) : i_tip + 4]
    tangent = neigh[-1] - neigh[0]
    theta0 = math.atan2(tangent[1], tangent[0])

    def cost(p):
        th, dx, dy = p
        c, s = math.cos(th), math.sin(th)
        moved = model @ np.array([[c, s], [-s, c]]) + [dx, dy]
        return float(np.max(geom.point_polyline_distance(moved, branch)))

    best = None
    for flip in (0.0, math.pi):
        start = np.array([theta0 + flip, branch[i_tip, 0], branch[i_tip, 1]])
        res = minimize(cost, start, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-7, "maxiter": 4000})
        if best is None or res.fun < best:
            best = res.fun
    return float(best)


# --- orchestration -------------------------------------------------------


def analyze(trace, frame_count: int = 8) -> SingularityReport:
    fit = fit_blowup_time(trace)
    T_est = fit.T
    cls = classify_type(trace, T_est)
    initial = trace.checkpoints[0].config
    cycles = trace.tracked_cycles or lg.default_cycles(initial)
    candidates = predict_typeI_times(initial, cycles)
    notes = []
    if fit.fallback:
        notes.append("blow-up time fit rejected; T_est is the last time plus the last step")

    matched, first, violation = None, None, False
    defined = candidates.defined_times()
    if cls.kind == "TypeI":
        near = [(abs(T - T_est), T, c) for T, c in defined if abs(T - T_est) <= MATCH_TOLERANCE * T_est]
        if near:
            _, T_match, matched = min(near, key=lambda e: e[0])
            first = T_match == defined[0][0]
        else:
            violation = True
            notes.append("type I blow-up away from every candidate time")

    final = trace.checkpoints[-1].config
    pairings_at_T = {}
    for e in candidates.entries:
        pv = lg.pairing(final, e.cycle)
        t_last = trace.checkpoints[-1].t
        pairings_at_T[e.cycle.name] = pv.lambda_pairing - 2 * (T_est - t_last) * pv.maslov_pairing

    frames, shrink, cone = [], [], None
    unit = SpacetimeCenter(np.zeros((initial.dim, 2)), 1.0)
    if cls.kind != "TypeII":
        frames = tangent_frames(trace, T_est, frame_count)
        for fr in frames:
            cfg = rescale(trace.checkpoints[fr.checkpoint], fr)
            shrink.append((fr.time, fit_selfshrinker(cfg, unit, 0.0)))
    if cls.kind != "TypeI":
        blowups = blowup_points(trace, T_est, frame_count, type_ii=True)
        frames = frames + blowups
        try:
            downs = blow_down_frames(blowups, T_est)
            frames = frames + downs
            last = downs[-1]
            cone = fit_cones(rescale(trace.checkpoints[last.checkpoint], last))
        except DomainError as exc:
            notes.append(f"no cone fit: {exc}")
    return SingularityReport(
        T_est=T_est,
        T_fit=fit,
        classification=cls,
        candidates=candidates,
        matched_candidate=matched,
        frames=frames,
        shrinker_fit=shrink,
        cone_fit=cone,
        is_first_candidate=first,
        candidate_mismatch=violation,
        pairings_at_T=pairings_at_T,
        notes=notes,
    )
