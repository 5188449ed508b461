"""Gaussian-weighted functionals: Huisken density, entropy, shrinker residual, B(t).

All integrals are sums over the governing curves' samples with dual-length
weights.  A product's Gaussian factorises over factors, and an equivariant
surface's measure is ``|g| ds dr``.  For centres on the fixed plane
``x0 = (z, 0)`` with ``z = 0`` the rotation integral is done exactly.  Other
centres use a fixed rotation quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lagflow import geom, lagrangian as lg

CUTOFF_WIDTHS = 12.0


class DomainError(ValueError):
    """Functional evaluated outside its domain (t >= T, no real lift, empty grid)."""


@dataclass(frozen=True)
class SpacetimeCenter:
    x0: np.ndarray
    T: float

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0.reshape(-1, 2)
        if x0.ndim != 2 or x0.shape[1] != 2:
            raise ValueError(f"x0 must have shape (m, 2), got {x0.shape}")
        if not math.isfinite(self.T) or not np.all(np.isfinite(x0)):
            raise ValueError("center must be finite")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "T", float(self.T))

    def for_config(self, config):
        if self.x0.shape[0] != config.dim:
            raise DomainError(f"center lives in C^{self.x0.shape[0]}, config in C^{config.dim}")
        return self


@dataclass
class DensitySeries:
    center: SpacetimeCenter
    rows: list = field(default_factory=list)

    def append(self, t, theta, residual, B):
        if t >= self.center.T:
            raise DomainError("density rows must satisfy t < T")
        self.rows.append({"t": t, "theta": theta, "shrinker_residual": residual, "B": B})


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    center: SpacetimeCenter


def _tau(center, t):
    tau = center.T - t
    if not tau > 0:
        raise DomainError(f"t = {t:g} is not before T = {center.T:g}")
    return tau


def _gauss(d2, tau, m):
    g = (4 * np.pi * tau) ** (-m / 2) * np.exp(-d2 / (4 * tau))
    return np.where(d2 <= CUTOFF_WIDTHS**2 * 2 * tau, g, 0.0)


def _on_axis(config, x0):
    return isinstance(config, lg.Equivariant) and np.max(np.abs(x0)) == 0.0


def _rotation_grid():
    return np.arange(lg.ROTATION_QUADRATURE) * lg.TWO_PI / lg.ROTATION_QUADRATURE


def _equivariant_offsets(profile, x0):
    """Positions ``L(s, r) - x0`` as four real arrays of shape (n, M) plus r."""
    r = _rotation_grid()
    p, q = profile.points[:, :1], profile.points[:, 1:]
    c, s = np.cos(r)[None, :], np.sin(r)[None, :]
    return (c * p - x0[0, 0], c * q - x0[0, 1], s * p - x0[1, 0], s * q - x0[1, 1]), r


def gaussian_weights(config, center: SpacetimeCenter, t: float) -> tuple[np.ndarray, ...]:
    """Per-sample weights ``W_i`` with ``Theta = prod_i sum(W_i)``.

    Planar and equivariant configurations have one weight array, products
    one per factor (each normalised as a 1-dimensional Gaussian).
    """
    center.for_config(config)
    tau = _tau(center, t)
    x0 = center.x0
    if isinstance(config, lg.Equivariant):
        prof = config.profile
        dual = geom.dual_lengths(prof)
        radius = np.hypot(prof.points[:, 0], prof.points[:, 1])
        if _on_axis(config, x0):
            return (lg.TWO_PI * radius * dual * _gauss(radius**2, tau, 2),)
        (a, b, c, d), _ = _equivariant_offsets(prof, x0)
        g = _gauss(a * a + b * b + c * c + d * d, tau, 2)
        return ((radius * dual) * g.sum(axis=1) * (lg.TWO_PI / lg.ROTATION_QUADRATURE),)
    out = []
    for k, c in enumerate(config.curves):
        d2 = np.sum((c.points - x0[k]) ** 2, axis=1)
        out.append(geom.dual_lengths(c) * _gauss(d2, tau, 1))
    return tuple(out)


def huisken_theta(config, center: SpacetimeCenter, t: float) -> float:
    return float(np.prod([w.sum() for w in gaussian_weights(config, center, t)]))


def shrinker_residual(config, center: SpacetimeCenter, t: float) -> float:
    """Gaussian-weighted ``|H + (x - x0)^perp / (2 tau)|^2``."""
    center.for_config(config)
    tau = _tau(center, t)
    x0 = center.x0
    if isinstance(config, lg.Equivariant):
        prof = config.profile
        kappa, a_term, nu = lg.equivariant_terms(prof)
        v = kappa - a_term
        dual = geom.dual_lengths(prof)
        radius = np.hypot(prof.points[:, 0], prof.points[:, 1])
        if _on_axis(config, x0):
            n1 = np.einsum("ij,ij->i", prof.points, nu)
            w = lg.TWO_PI * radius * dual * _gauss(radius**2, tau, 2)
            return float(np.sum(w * (v + n1 / (2 * tau)) ** 2))
        (a, b, c, d), r = _equivariant_offsets(prof, x0)
        cr, sr = np.cos(r)[None, :], np.sin(r)[None, :]
        nx, ny = nu[:, :1], nu[:, 1:]
        # second normal: (-sin r, cos r) times i g/|g|
        jx = -prof.points[:, 1:] / radius[:, None]
        jy = prof.points[:, :1] / radius[:, None]
        n1 = cr * (a * nx + b * ny) + sr * (c * nx + d * ny)
        n2 = -sr * (a * jx + b * jy) + cr * (c * jx + d * jy)
        g = _gauss(a * a + b * b + c * c + d * d, tau, 2)
        integrand = (v[:, None] + n1 / (2 * tau)) ** 2 + (n2 / (2 * tau)) ** 2
        w = (radius * dual)[:, None] * g * (lg.TWO_PI / lg.ROTATION_QUADRATURE)
        return float(np.sum(w * integrand))
    weights = gaussian_weights(config, center, t)
    masses = [w.sum() for w in weights]
    total = 0.0
    for k, c in enumerate(config.curves):
        kappa = geom.curvature(c)
        nu = geom.vertex_normals(c)
        res = kappa + np.einsum("ij,ij->i", c.points - x0[k], nu) / (2 * tau)
        others = np.prod([m for j, m in enumerate(masses) if j != k])
        total += float(np.sum(weights[k] * res**2)) * others
    return total


def default_entropy_grid(config, n_centers=11, n_scales=7):
    """Centres on an ``n x n`` grid over each curve's bounding box, and scales.

    Returns ``(centers, taus)`` where ``centers[k]`` is an array of candidate
    centres for curve ``k`` (for equivariant configurations the profile plane,
    embedded as ``(z, 0)``).
    """
    centers = []
    for c in config.curves:
        lo, hi = c.points.min(axis=0), c.points.max(axis=0)
        gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], n_centers), np.linspace(lo[1], hi[1], n_centers))
        centers.append(np.column_stack([gx.ravel(), gy.ravel()]))
    radius = max(lg.bounding_radius(config), 1e-12)
    taus = radius**2 * 2.0 ** -np.arange(n_scales)
    return centers, taus


def entropy_estimate(config, grid=None) -> EntropyEstimate:
    """Grid maximum of ``Theta`` over centres and scales (a lower bound for the entropy).

    ``grid`` is ``(centers, taus)`` as returned by :func:`default_entropy_grid`.
    Products are maximised factor by factor, which is exact because the
    Gaussian factorises; equivariant centres also include the origin.
    """
    centers, taus = grid if grid is not None else default_entropy_grid(config)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if len(taus) == 0 or len(centers) == 0 or any(len(c) == 0 for c in centers):
        raise DomainError("empty entropy grid")
    if len(centers) != len(config.curves):
        raise DomainError("entropy grid needs one centre list per governing curve")
    best = (-np.inf, None)
    for tau in taus:
        if not tau > 0:
            raise DomainError("entropy scales must be positive")
        if isinstance(config, lg.Equivariant):
            cands = [np.zeros(2)] + list(np.asarray(centers[0], dtype=float))
            for z in cands:
                ctr = SpacetimeCenter(np.array([z, [0.0, 0.0]]), tau)
                val = huisken_theta(config, ctr, 0.0)
                if val > best[0]:
                    best = (val, ctr)
            continue
        value, chosen = 1.0, []
        for k, c in enumerate(config.curves):
            pts = np.asarray(centers[k], dtype=float)
            d2 = np.sum((c.points[None, :, :] - pts[:, None, :]) ** 2, axis=2)
            vals = (geom.dual_lengths(c)[None, :] * _gauss(d2, tau, 1)).sum(axis=1)
            j = int(np.argmax(vals))
            value *= vals[j]
            chosen.append(pts[j])
        if value > best[0]:
            best = (value, SpacetimeCenter(np.array(chosen), tau))
    return EntropyEstimate(float(best[0]), best[1])


def _real_lifts(config):
    fields = lg.lagrangian_angle(config)
    if any(f.winding != 0 for f in fields):
        raise DomainError("configuration has non-zero Maslov class along a cycle; beta has no real lift")
    return [f.nodes for f in fields]


def _moments(config, center, t):
    weights = gaussian_weights(config, center, t)
    lifts = _real_lifts(config)
    m0 = [w.sum() for w in weights]
    m1 = [np.dot(w, b) for w, b in zip(weights, lifts)]
    m2 = [np.dot(w, b * b) for w, b in zip(weights, lifts)]
    return m0, m1, m2


def _integrals(m0, m1, m2):
    """``(int theta, int beta theta, int beta^2 theta)`` for ``beta = sum_i beta_i``."""
    k = len(m0)
    total0 = float(np.prod(m0))

    def rest(*skip):
        return float(np.prod([m0[j] for j in range(k) if j not in skip]))

    total1 = sum(m1[i] * rest(i) for i in range(k))
    total2 = sum(m2[i] * rest(i) for i in range(k))
    total2 += 2 * sum(m1[i] * m1[j] * rest(i, j) for i in range(k) for j in range(i + 1, k))
    return total0, total1, total2


def beta_gaussian_mean(config, center: SpacetimeCenter, t: float) -> float:
    """Gaussian-weighted mean of the (anchored) real lift of beta."""
    i0, i1, _ = _integrals(*_moments(config, center, t))
    if i0 <= 0:
        raise DomainError("no Gaussian mass near the centre")
    return i1 / i0


def beta_weighted_B(config, center: SpacetimeCenter, t: float, offset: float = 0.0) -> float:
    """``int (beta + offset)^2 theta`` for the real lift anchored at sample 0."""
    i0, i1, i2 = _integrals(*_moments(config, center, t))
    return float(i2 + 2 * offset * i1 + offset * offset * i0)


class SeriesRecorder:
    """Accumulates the per-row diagnostics of a run.

    B uses one lift per centre fixed at its first row (Gaussian mean zero
    there) and continued through later rows by whole turns, so that the lift
    is continuous in time.
    """

    def __init__(self, initial, cycles, centers):
        self.cycles = list(cycles)
        self.centers = [c.for_config(initial) for c in centers]
        self.closed = [c.closed for c in initial.curves]
        try:
            _real_lifts(initial)
            self.zero_maslov = True
        except DomainError:
            self.zero_maslov = False
        self._offset = [None] * len(self.centers)
        self._mean = [None] * len(self.centers)
        self.columns = ["t", "dt", "sup_II", "osc_beta"]
        for cyc in self.cycles:
            self.columns += [f"lambda_{cyc.name}", f"maslov_{cyc.name}"]
        for k in range(len(self.centers)):
            self.columns += [f"theta_{k}", f"resid_{k}", f"B_{k}"]
        for i, closed in enumerate(self.closed):
            self.columns.append(f"length_{i + 1}")
            if closed:
                self.columns.append(f"area_{i + 1}")
        self.data = {c: [] for c in self.columns}

    def record(self, config, t, dt):
        row = {"t": float(t), "dt": float(dt)}
        row["sup_II"] = lg.second_fundamental_sup(config)
        row["osc_beta"] = lg.osc_beta(config)
        for cyc in self.cycles:
            pv = lg.pairing(config, cyc)
            row[f"lambda_{cyc.name}"] = pv.lambda_pairing
            row[f"maslov_{cyc.name}"] = pv.maslov_pairing
        for k, ctr in enumerate(self.centers):
            if t >= ctr.T:
                row[f"theta_{k}"] = row[f"resid_{k}"] = row[f"B_{k}"] = math.nan
                continue
            row[f"theta_{k}"] = huisken_theta(config, ctr, t)
            row[f"resid_{k}"] = shrinker_residual(config, ctr, t)
            row[f"B_{k}"] = self._B(k, config, ctr, t)
        for i, c in enumerate(config.curves):
            row[f"length_{i + 1}"] = geom.length(c)
            if c.closed:
                row[f"area_{i + 1}"] = geom.signed_area(c)
        if self.data["t"] and not t > self.data["t"][-1]:
            return
        for c in self.columns:
            self.data[c].append(row[c])

    def _B(self, k, config, ctr, t):
        if not self.zero_maslov:
            return math.nan
        try:
            i0, i1, i2 = _integrals(*_moments(config, ctr, t))
        except DomainError:
            return math.nan
        if i0 <= 1e-300:
            return math.nan
        mean = i1 / i0
        if self._offset[k] is None:
            self._offset[k] = -mean
        else:
            turns = np.rint((mean - self._mean[k]) / lg.TWO_PI)
            # shift the offset with the lift so the lift stays continuous
            self._offset[k] -= float(turns) * lg.TWO_PI
        self._mean[k] = mean
        off = self._offset[k]
        return float(i2 + 2 * off * i1 + off * off * i0)

    def finish(self):
        return {c: np.asarray(v, dtype=float) for c, v in self.data.items()}
