"""Scenario files: schema validation, builtins, and construction of configurations.

A scenario is a YAML document::

    schema_version: 1
    name: circle-unit
    config:
      circle: {center: [0, 0], radius: 1.0, samples: 512}
    flow: {stop_max_ii: 100}
    tracked_cycles: [whole]
    tracked_centers: auto
    seed: 0

Unknown keys anywhere are errors.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, fields

import numpy as np
import yaml

from lagflow import flow, lagrangian as lg, shapes
from lagflow.functionals import SpacetimeCenter

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with the offending field path."""


@dataclass
class Scenario:
    name: str
    config_spec: dict
    flow: flow.FlowParams
    tracked_cycles: list | None
    tracked_centers: object  # "auto" or list of SpacetimeCenter
    seed: int = 0
    perturbation: float = 0.0
    raw: dict | None = None


def _fail(path, msg):
    raise ScenarioError(f"{path}: {msg}")


def _number(value, path, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        _fail(path, "must be finite")
    if integer and int(value) != value:
        _fail(path, "must be an integer")
    if positive and not value > 0:
        _fail(path, "must be positive")
    if nonneg and value < 0:
        _fail(path, "must be non-negative")
    return int(value) if integer else float(value)


def _point(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(path, "expected a pair [p, q]")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _keys(d, path, required=(), optional=()):
    if not isinstance(d, dict):
        _fail(path, f"expected a mapping, got {type(d).__name__}")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        _fail(f"{path}.{sorted(unknown)[0]}", "unknown key")
    for k in required:
        if k not in d:
            _fail(f"{path}.{k}", "missing")


_SAMPLES = {"samples": dict(positive=True, integer=True)}

CURVE_FIELDS = {
    "circle": {"center": "point", "radius": dict(positive=True), "clockwise": "bool", **_SAMPLES},
    "ellipse": {"a": dict(positive=True), "b": dict(positive=True), "center": "point", **_SAMPLES},
    "fourier_curve": {"base_radius": dict(positive=True), "coefficients": "coefficients", **_SAMPLES},
    "polygon": {"points": "points", **_SAMPLES},
    "lemniscate": {"scale": dict(positive=True), "lobe_ratio": dict(positive=True), **_SAMPLES},
    "truncated_hyperbola": {
        "asymptote_angle": dict(positive=True),
        "offset": dict(positive=True),
        "span": dict(positive=True),
        **_SAMPLES,
    },
    "radial_ray": {"angle": dict(), "r_min": dict(positive=True), "r_max": dict(positive=True), **_SAMPLES},
}
REQUIRED = {
    "circle": ("radius",),
    "ellipse": ("a", "b"),
    "fourier_curve": ("base_radius", "coefficients"),
    "polygon": ("points",),
    "lemniscate": (),
    "truncated_hyperbola": (),
    "radial_ray": (),
}


def _curve_kwargs(kind, body, path):
    spec = CURVE_FIELDS[kind]
    _keys(body, path, REQUIRED[kind], tuple(spec))
    out = {}
    for key, rule in spec.items():
        if key not in body:
            continue
        p = f"{path}.{key}"
        v = body[key]
        if rule == "point":
            out[key] = _point(v, p)
        elif rule == "bool":
            if not isinstance(v, bool):
                _fail(p, "expected true/false")
            out[key] = v
        elif rule == "points":
            if not isinstance(v, list) or len(v) < 3:
                _fail(p, "expected a list of at least 3 points")
            out[key] = [_point(x, f"{p}[{i}]") for i, x in enumerate(v)]
        elif rule == "coefficients":
            if not isinstance(v, list):
                _fail(p, "expected a list of [mode, amplitude, phase]")
            coeffs = []
            for i, c in enumerate(v):
                if not isinstance(c, (list, tuple)) or len(c) != 3:
                    _fail(f"{p}[{i}]", "expected [mode, amplitude, phase]")
                coeffs.append(
                    (_number(c[0], f"{p}[{i}][0]", integer=True), _number(c[1], f"{p}[{i}][1]"), _number(c[2], f"{p}[{i}][2]"))
                )
            out[key] = coeffs
        else:
            out[key] = _number(v, p, **rule)
    if "samples" in out and out["samples"] < 16:
        _fail(f"{path}.samples", "must be at least 16")
    return out


def _single_key(d, path):
    if not isinstance(d, dict) or len(d) != 1:
        _fail(path, "expected exactly one shape key")
    return next(iter(d.items()))


def build_curve(spec, path="config"):
    kind, body = _single_key(spec, path)
    if kind not in CURVE_FIELDS:
        _fail(f"{path}.{kind}", "unknown curve kind")
    kwargs = _curve_kwargs(kind, body or {}, f"{path}.{kind}")
    builder = getattr(shapes, kind)
    if kind == "circle" and "center" in kwargs:
        kwargs["center"] = tuple(kwargs["center"])
    try:
        return builder(**kwargs)
    except ValueError as exc:
        _fail(f"{path}.{kind}", str(exc))


def build_config(spec, path="config"):
    kind, body = _single_key(spec, path)
    try:
        if kind == "product":
            if not isinstance(body, list):
                _fail(f"{path}.product", "expected a list of curve specs")
            return lg.Product(tuple(build_curve(s, f"{path}.product[{i}]") for i, s in enumerate(body)))
        if kind == "equivariant":
            _keys(body, f"{path}.equivariant", ("profile",), ("origin_tol",))
            tol = _number(body.get("origin_tol", 1e-6), f"{path}.equivariant.origin_tol", positive=True)
            return lg.Equivariant(build_curve(body["profile"], f"{path}.equivariant.profile"), tol)
        if kind in CURVE_FIELDS:
            return lg.Planar(build_curve(spec, path))
    except lg.ConfigError as exc:
        _fail(f"{path}.{kind}", str(exc))
    _fail(f"{path}.{kind}", "unknown configuration kind")


def _flow_params(body, path="flow"):
    body = body or {}
    names = {f.name: f for f in fields(flow.FlowParams)}
    _keys(body, path, (), tuple(names))
    kwargs = {}
    for k, v in body.items():
        p = f"{path}.{k}"
        if k == "resample_mode":
            if v not in ("uniform", "curvature"):
                _fail(p, "expected 'uniform' or 'curvature'")
            kwargs[k] = v
        elif k in ("resample_every", "max_steps"):
            kwargs[k] = _number(v, p, positive=True, integer=True)
        elif k == "stop_time" and v is None:
            kwargs[k] = None
        else:
            kwargs[k] = _number(v, p, nonneg=(k in ("stop_time", "curvature_exponent")), positive=k not in (
                "stop_time", "curvature_exponent"))
    try:
        return flow.FlowParams(**kwargs)
    except ValueError as exc:
        _fail(path, str(exc))


def _centers(value, dim, path="tracked_centers"):
    if value is None or value == "auto":
        return "auto"
    if not isinstance(value, list):
        _fail(path, "expected 'auto' or a list of {x0, T}")
    out = []
    for i, c in enumerate(value):
        p = f"{path}[{i}]"
        _keys(c, p, ("x0", "T"))
        x0 = c["x0"]
        if not isinstance(x0, list) or len(x0) != dim:
            _fail(f"{p}.x0", f"expected {dim} points [p, q]")
        pts = [_point(x, f"{p}.x0[{k}]") for k, x in enumerate(x0)]
        out.append(SpacetimeCenter(np.array(pts), _number(c["T"], f"{p}.T", positive=True)))
    return out


def parse_scenario(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a mapping")
    _keys(data, "scenario", ("schema_version", "name", "config"), ("flow", "tracked_cycles", "tracked_centers", "seed", "perturbation"))
    if data["schema_version"] != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {data['schema_version']!r}; expected {SCHEMA_VERSION}")
    name = data["name"]
    if not isinstance(name, str) or not name or "/" in name:
        _fail("name", "expected a non-empty string without '/'")
    config = build_config(data["config"])
    params = _flow_params(data.get("flow"))
    cycles = data.get("tracked_cycles")
    if cycles is not None:
        if not isinstance(cycles, list):
            _fail("tracked_cycles", "expected a list")
        parsed = []
        for i, c in enumerate(cycles):
            try:
                cyc = lg.CycleId.parse(c)
                lg.check_cycle(config, cyc)
            except lg.ConfigError as exc:
                _fail(f"tracked_cycles[{i}]", str(exc))
            parsed.append(cyc)
        cycles = parsed
    seed = _number(data.get("seed", 0), "seed", nonneg=True, integer=True)
    pert = _number(data.get("perturbation", 0.0), "perturbation", nonneg=True)
    return Scenario(name, data["config"], params, cycles, _centers(data.get("tracked_centers", "auto"), config.dim), seed, pert, data)


def load_scenario(source) -> Scenario:
    """Parse a builtin name, a YAML path, or an already-loaded mapping."""
    if isinstance(source, dict):
        return parse_scenario(copy.deepcopy(source))
    if source in BUILTINS:
        return parse_scenario(copy.deepcopy(BUILTINS[source]))
    try:
        with open(source) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"scenario: cannot read {source!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario: invalid YAML: {exc}") from exc
    return parse_scenario(data)


def build(scn: Scenario):
    """Initial configuration, with the seeded perturbation applied."""
    config = build_config(scn.config_spec)
    if scn.perturbation > 0:
        rng = np.random.default_rng(scn.seed)
        curves = []
        for c in config.curves:
            pts = c.points + scn.perturbation * rng.standard_normal(c.points.shape)
            if not c.closed:
                pts[0], pts[-1] = c.points[0], c.points[-1]
            curves.append(type(c)(pts, c.closed))
        config = config.with_curves(curves)
    return config


def auto_centers(config):
    """Centroid centre at 1.1 times the first candidate time, plus the origin.

    Without a defined candidate the reference time is ``1.1 R^2 / (2 m)`` for
    the bounding radius ``R``, the vanishing time of a round sphere of that
    radius.  Open curves have pinned ends where the flow is not mean
    curvature flow, so each centre's T is further capped at ``d^2 / 64``
    (``d`` the distance to the nearest endpoint), which keeps the Gaussian
    weight at the ends below ``e^-16``.
    """
    from lagflow import geom, singularity

    first = singularity.predict_typeI_times(config).first()
    if first is not None:
        T = 1.1 * first[0]
    else:
        T = 1.1 * lg.bounding_radius(config) ** 2 / (2 * config.dim)
    if isinstance(config, lg.Equivariant):
        cen = np.array([geom.centroid(config.profile), [0.0, 0.0]])
    else:
        cen = np.array([geom.centroid(c) for c in config.curves])
    points = [cen]
    if np.max(np.abs(cen)) > 1e-12:
        points.append(np.zeros_like(cen))
    centres = []
    for x0 in points:
        T_c = T
        for k, c in enumerate(config.curves):
            if not c.closed:
                d = np.min(np.hypot(*(c.points[[0, -1]] - x0[k]).T))
                T_c = min(T_c, d * d / 64)
        centres.append(SpacetimeCenter(x0, T_c))
    return centres


def _builtin(name, config, **extra):
    doc = {"schema_version": 1, "name": name, "config": config}
    doc.update(extra)
    return doc


BUILTINS = {
    "circle-unit": _builtin("circle-unit", {"circle": {"radius": 1.0, "samples": 512}}),
    "ellipse": _builtin("ellipse", {"ellipse": {"a": 2.0, "b": 1.0, "samples": 512}}),
    "product-circles": _builtin(
        "product-circles", {"product": [{"circle": {"radius": 1.0}}, {"circle": {"radius": 2.0}}]}
    ),
    "equivariant-circle": _builtin("equivariant-circle", {"equivariant": {"profile": {"circle": {"radius": 1.0}}}}),
    "figure-eight": _builtin("figure-eight", {"lemniscate": {"scale": 1.0, "lobe_ratio": 1.0, "samples": 512}}),
    "hyperbola": _builtin(
        "hyperbola",
        {
            "equivariant": {
                "profile": {
                    "truncated_hyperbola": {"asymptote_angle": math.pi / 3, "offset": 0.5, "span": 4.0, "samples": 512}
                }
            }
        },
    ),
    "radial-ray": _builtin(
        "radial-ray",
        {"equivariant": {"profile": {"radial_ray": {"angle": math.pi / 8, "r_min": 0.5, "r_max": 3.0, "samples": 512}}}},
        flow={"stop_time": 0.05},
    ),
}
