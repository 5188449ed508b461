"""Lagrangian configurations in C^m built from planar curves.

Three symmetry classes are supported:

* :class:`Planar` -- a curve in C, which is Lagrangian in C^1.
* :class:`Product` -- ``G_1 x ... x G_m`` in C^m for closed curves ``G_i``.
* :class:`Equivariant` -- ``L(r, s) = (cos r * g(s), sin r * g(s))`` in C^2.

Ambient coordinates use ``z_k = p_k + i q_k`` with ``omega = sum dp_k ^ dq_k``
and the Liouville form ``eta = sum (p_k - p0_k) dq_k - (q_k - q0_k) dp_k``.
Points of C^m are passed around as real arrays of shape ``(m, 2)``.

For the equivariant class, ordering the tangent frame as ``(d/ds, d/dr)``
gives ``Omega(L_s, L_r) = g g'``, so the Lagrangian angle is
``arg g' + arg g``.  Its arclength derivative ``kappa - <g, nu>/|g|^2`` is
both ``|H|`` and the normal speed of the profile.  Both formulas are checked
against :mod:`lagflow.embedding`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lagflow import geom

TWO_PI = 2 * np.pi
ROTATION_QUADRATURE = 128


class ConfigError(ValueError):
    """Invalid configuration or incompatible cycle."""


class OriginProximityError(ConfigError):
    """An equivariant profile passes too close to the rotation fixed point."""


@dataclass(frozen=True, eq=False)
class Planar:
    curve: geom.DiscreteCurve
    kind = "planar"

    @property
    def curves(self):
        return (self.curve,)

    @property
    def dim(self):
        return 1

    def with_curves(self, curves):
        return Planar(curves[0])


@dataclass(frozen=True, eq=False)
class Product:
    factors: tuple
    kind = "product"

    def __post_init__(self):
        factors = tuple(self.factors)
        if not 2 <= len(factors) <= 4:
            raise ConfigError(f"a product needs 2 to 4 factors, got {len(factors)}")
        if not all(f.closed for f in factors):
            raise ConfigError("product factors must be closed curves")
        object.__setattr__(self, "factors", factors)

    @property
    def curves(self):
        return self.factors

    @property
    def dim(self):
        return len(self.factors)

    def with_curves(self, curves):
        return Product(tuple(curves))


@dataclass(frozen=True, eq=False)
class Equivariant:
    profile: geom.DiscreteCurve
    origin_tol: float = 1e-6
    kind = "equivariant"

    def __post_init__(self):
        r = np.hypot(self.profile.points[:, 0], self.profile.points[:, 1])
        if r.min() <= self.origin_tol:
            raise OriginProximityError(
                f"profile comes within {r.min():.3g} of the origin (limit {self.origin_tol:g})"
            )

    @property
    def curves(self):
        return (self.profile,)

    @property
    def dim(self):
        return 2

    def with_curves(self, curves):
        return Equivariant(curves[0], self.origin_tol)


LagrangianConfig = Planar | Product | Equivariant


@dataclass(frozen=True)
class CycleId:
    """A 1-cycle of a configuration.

    ``kind`` is one of ``whole``, ``factor``, ``profile``, ``rotation``.
    Factor indices are 1-based.  ``index`` for ``rotation`` is the profile
    sample the rotation orbit passes through.
    """

    kind: str
    index: int = 0

    @classmethod
    def whole(cls):
        return cls("whole")

    @classmethod
    def factor(cls, i):
        return cls("factor", int(i))

    @classmethod
    def profile(cls):
        return cls("profile")

    @classmethod
    def rotation(cls, sample=0):
        return cls("rotation", int(sample))

    @property
    def name(self):
        if self.kind == "factor":
            return f"factor{self.index}"
        return self.kind

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        if text.startswith("factor"):
            return cls.factor(int(text[len("factor") :]))
        if text.startswith("rotation"):
            rest = text[len("rotation") :]
            return cls.rotation(int(rest) if rest else 0)
        if text in ("whole", "profile"):
            return cls(text)
        raise ConfigError(f"unknown cycle {text!r}")

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class AngleField:
    """Lifted Lagrangian angle on one governing curve.

    For closed curves ``samples`` carries one extra trailing entry, the lift
    on return to sample 0.
    """

    samples: np.ndarray
    winding: int
    closed: bool = True

    @property
    def nodes(self):
        return self.samples[:-1] if self.closed else self.samples


@dataclass(frozen=True)
class PairingValue:
    cycle: CycleId
    lambda_pairing: float
    maslov_pairing: float


def default_cycles(config) -> list[CycleId]:
    if isinstance(config, Planar):
        return [CycleId.whole()] if config.curve.closed else []
    if isinstance(config, Product):
        return [CycleId.factor(i + 1) for i in range(config.dim)]
    cycles = [CycleId.profile()] if config.profile.closed else []
    return cycles + [CycleId.rotation(0)]


def check_cycle(config, cycle: CycleId):
    if isinstance(config, Planar):
        if cycle.kind != "whole":
            raise ConfigError(f"planar configurations only carry the whole-curve cycle, not {cycle}")
        if not config.curve.closed:
            raise ConfigError("an open planar curve has no closed cycle")
    elif isinstance(config, Product):
        if cycle.kind != "factor":
            raise ConfigError(f"product cycles are factor cycles, not {cycle}")
        if not 1 <= cycle.index <= config.dim:
            raise ConfigError(f"factor index {cycle.index} out of range 1..{config.dim}")
    else:
        if cycle.kind not in ("profile", "rotation"):
            raise ConfigError(f"equivariant cycles are profile or rotation, not {cycle}")
        if cycle.kind == "profile" and not config.profile.closed:
            raise ConfigError("an open profile has no profile loop")
        if cycle.kind == "rotation" and not 0 <= cycle.index < len(config.profile):
            raise ConfigError(f"rotation sample {cycle.index} out of range")


def _complex(pts):
    return pts[:, 0] + 1j * pts[:, 1]


def profile_arg_lift(profile: geom.DiscreteCurve) -> np.ndarray:
    """Lift of ``arg g`` along the profile (closed curves get the wrap entry)."""
    z = _complex(profile.points)
    if profile.closed:
        z = np.concatenate([z, z[:1]])
    a = np.angle(z)
    return np.concatenate([[a[0]], a[0] + np.cumsum(geom._wrap(np.diff(a)))])


def _anchor(lift):
    return lift - (lift[0] - geom._wrap(lift[0]))


def lagrangian_angle(config) -> tuple[AngleField, ...]:
    """Lifted Lagrangian angle per governing curve.

    Planar and product factors use the tangent angle; a product's total angle
    is the sum over factors.  Equivariant profiles use ``arg g' + arg g``.
    """
    if isinstance(config, Equivariant):
        prof = config.profile
        beta = _anchor(geom.tangent_angle_lift(prof) + profile_arg_lift(prof))
        winding = int(round((beta[-1] - beta[0]) / TWO_PI)) if prof.closed else 0
        return (AngleField(beta, winding, prof.closed),)
    fields = []
    for c in config.curves:
        theta = geom.tangent_angle_lift(c)
        winding = geom.turning_number(c) if c.closed else 0
        fields.append(AngleField(theta, winding, c.closed))
    return tuple(fields)


def _periodic_derivative(f):
    """Derivative in the sample-index parameter u in [0, 2 pi) of the trig interpolant."""
    n = len(f)
    F = np.fft.rfft(f)
    k = np.arange(len(F))
    if n % 2 == 0:
        F[-1] = 0.0
    return np.fft.irfft(1j * k * F, n)


def _loop_liouville(pts, base):
    # periodic trapezoid rule on the trig interpolant: spectrally accurate
    # for smooth loops, where the chord polygon is only second order
    p = pts[:, 0] - base[0]
    q = pts[:, 1] - base[1]
    dp, dq = _periodic_derivative(p), _periodic_derivative(q)
    return float(np.sum(p * dq - q * dp) * TWO_PI / len(p))


def _basepoint(config, basepoint):
    if basepoint is None:
        return np.zeros((config.dim, 2))
    b = np.asarray(basepoint, dtype=float).reshape(config.dim, 2)
    return b


def rotation_orbit(g: complex, count: int = ROTATION_QUADRATURE) -> np.ndarray:
    """Points ``(cos r g, sin r g)`` as an array of shape (count, 2, 2)."""
    r = np.arange(count) * TWO_PI / count
    z1 = np.cos(r) * g
    z2 = np.sin(r) * g
    return np.stack([np.column_stack([z1.real, z1.imag]), np.column_stack([z2.real, z2.imag])], axis=1)


def liouville_pairing(config, cycle: CycleId, basepoint=None) -> float:
    """``lambda . cycle`` for the Liouville form centred at ``basepoint``."""
    check_cycle(config, cycle)
    base = _basepoint(config, basepoint)
    if isinstance(config, Planar):
        return _loop_liouville(config.curve.points, base[0])
    if isinstance(config, Product):
        return _loop_liouville(config.factors[cycle.index - 1].points, base[cycle.index - 1])
    if cycle.kind == "profile":
        return _loop_liouville(config.profile.points, base[0])
    g = complex(*config.profile.points[cycle.index])
    orbit = rotation_orbit(g)
    return sum(_loop_liouville(orbit[:, k, :], base[k]) for k in range(2))


def _snap(total):
    k = np.rint(total / TWO_PI)
    if abs(total - k * TWO_PI) > 1e-6 * TWO_PI:
        raise geom.UnderResolvedCurveError(f"Maslov pairing {total:.6g} is not a multiple of 2pi")
    return float(k * TWO_PI)


def maslov_pairing(config, cycle: CycleId) -> float:
    """``h . cycle = integral of d(beta)``, an exact multiple of 2pi."""
    check_cycle(config, cycle)
    if isinstance(config, Planar):
        return TWO_PI * geom.turning_number(config.curve)
    if isinstance(config, Product):
        return TWO_PI * geom.turning_number(config.factors[cycle.index - 1])
    if cycle.kind == "rotation":
        return 0.0
    beta = lagrangian_angle(config)[0].samples
    return _snap(beta[-1] - beta[0])


def pairing(config, cycle: CycleId, basepoint=None) -> PairingValue:
    return PairingValue(cycle, liouville_pairing(config, cycle, basepoint), maslov_pairing(config, cycle))


def osc_beta(config) -> float:
    """Oscillation of the lifted angle over one period of each curve, summed."""
    return float(sum(np.ptp(f.samples) for f in lagrangian_angle(config)))


def equivariant_terms(profile: geom.DiscreteCurve):
    """Per-sample ``(kappa, a, nu)`` with ``a = <g, nu>/|g|^2``."""
    pts = profile.points
    kappa = geom.curvature(profile)
    nu = geom.vertex_normals(profile)
    a = np.einsum("ij,ij->i", pts, nu) / np.einsum("ij,ij->i", pts, pts)
    return kappa, a, nu


def second_fundamental_norms(config) -> tuple[np.ndarray, ...]:
    """Pointwise ``|II|`` per governing curve.

    For products this is the factor's own contribution; the product norm at
    ``(x_1, ..., x_m)`` is the root sum of squares.  For equivariant surfaces
    ``|II|^2 = kappa^2 + 3 a^2``.
    """
    if isinstance(config, Equivariant):
        kappa, a, _ = equivariant_terms(config.profile)
        return (np.sqrt(kappa**2 + 3 * a**2),)
    return tuple(np.abs(geom.curvature(c)) for c in config.curves)


def second_fundamental_sup(config) -> float:
    norms = second_fundamental_norms(config)
    return float(np.sqrt(sum(np.max(n) ** 2 for n in norms)))


def mean_curvature_field(config) -> tuple[np.ndarray, ...]:
    """``|H|`` per sample of each governing curve (``|d beta/ds|``)."""
    if isinstance(config, Equivariant):
        kappa, a, _ = equivariant_terms(config.profile)
        return (np.abs(kappa - a),)
    return tuple(np.abs(geom.curvature(c)) for c in config.curves)


def measure_weights(config) -> tuple[np.ndarray, ...]:
    """Per-sample area weights of each governing curve.

    Equivariant weights include the orbit length ``2 pi |g|``.
    """
    if isinstance(config, Equivariant):
        pts = config.profile.points
        return (TWO_PI * np.hypot(pts[:, 0], pts[:, 1]) * geom.dual_lengths(config.profile),)
    return tuple(geom.dual_lengths(c) for c in config.curves)


def ambient_points(config, index) -> np.ndarray:
    """Ambient position in C^m (shape ``(m, 2)``) of a sample.

    ``index`` is one sample index per governing curve (an int is broadcast);
    equivariant points are taken on the ``r = 0`` orbit slice.
    """
    idx = np.broadcast_to(np.atleast_1d(index), (len(config.curves),))
    if isinstance(config, Equivariant):
        return np.array([config.profile.points[idx[0]], [0.0, 0.0]])
    return np.array([c.points[i] for c, i in zip(config.curves, idx)])


def scale_config(config, alpha: float, center=None):
    """``alpha * (config - center)``; equivariant centres must be the origin."""
    center = _basepoint(config, center)
    if isinstance(config, Equivariant):
        if np.max(np.abs(center)) > 1e-12:
            raise ConfigError("equivariant configurations can only be rescaled about the origin")
        return Equivariant(config.profile.scaled(alpha), config.origin_tol * alpha if alpha < 1 else config.origin_tol)
    curves = [
        geom.DiscreteCurve(alpha * (c.points - center[k]), c.closed) for k, c in enumerate(config.curves)
    ]
    return config.with_curves(curves)


def bounding_radius(config) -> float:
    return float(np.sqrt(sum(np.max(np.sum((c.points - geom.centroid(c)) ** 2, axis=1)) for c in config.curves)))


@dataclass
class Snapshot:
    """Plain container used by serialisation: variant name plus curve arrays."""

    kind: str
    curves: list = field(default_factory=list)
    closed: list = field(default_factory=list)
