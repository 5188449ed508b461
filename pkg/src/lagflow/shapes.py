"""Builders for the sampled curves used by scenarios and tests."""

import numpy as np
from scipy.optimize import brentq

from lagflow import geom


def _angles(samples):
    return np.arange(samples) * 2 * np.pi / samples


def circle(center=(0.0, 0.0), radius=1.0, samples=512, clockwise=False):
    if not radius > 0:
        raise ValueError("radius must be positive")
    t = _angles(samples)
    if clockwise:
        t = -t
    pts = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
    return geom.DiscreteCurve(pts)


def ellipse(a, b, samples=512, center=(0.0, 0.0)):
    if not (a > 0 and b > 0):
        raise ValueError("ellipse axes must be positive")
    t = _angles(samples)
    return geom.DiscreteCurve(np.column_stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)]))


def fourier_curve(base_radius, coefficients, samples=512):
    """Polar curve ``r(t) = base_radius * (1 + sum amp cos(mode t + phase))``."""
    t = _angles(samples)
    r = np.full(samples, 1.0)
    for mode, amp, phase in coefficients:
        r += amp * np.cos(mode * t + phase)
    if np.any(r <= 0):
        raise ValueError("fourier curve radius must stay positive")
    r *= base_radius
    return geom.DiscreteCurve(np.column_stack([r * np.cos(t), r * np.sin(t)]))


def polygon(points, samples=512):
    """Closed polygon through ``points`` sampled uniformly by arclength."""
    corners = np.asarray(points, dtype=float)
    if corners.ndim != 2 or corners.shape[1] != 2 or len(corners) < 3:
        raise ValueError("polygon needs at least 3 corners")
    loop = np.vstack([corners, corners[:1]])
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(loop, axis=0).T))])
    targets = np.arange(samples) * s[-1] / samples
    pts = np.column_stack([np.interp(targets, s, loop[:, 0]), np.interp(targets, s, loop[:, 1])])
    return geom.DiscreteCurve(pts)


def lemniscate(scale=1.0, lobe_ratio=1.0, samples=512):
    """Figure-eight ``(cos t, sin t cos t) * f(t)`` crossing itself at the origin.

    ``f`` interpolates between 1 on the right lobe and ``lobe_ratio`` on the
    left one, so ``lobe_ratio = 1`` gives equal lobes.
    """
    if not (scale > 0 and lobe_ratio > 0):
        raise ValueError("lemniscate scale and lobe_ratio must be positive")
    t = _angles(samples)
    f = scale * (0.5 * (1 + lobe_ratio) + 0.5 * (1 - lobe_ratio) * np.cos(t))
    return geom.DiscreteCurve(np.column_stack([f * np.cos(t), f * np.sin(t) * np.cos(t)]))


def truncated_hyperbola(asymptote_angle=np.pi / 3, offset=0.5, span=4.0, samples=512):
    """Open branch ``(a cosh u, a tan(phi) sinh u)`` with vertex at distance ``offset``.

    The branch is cut where it leaves the disk of radius ``span``.  Its
    asymptotes make angles ``+-phi`` with the first axis; rotating it gives an
    equivariant surface with a neck near the origin.
    """
    phi = asymptote_angle
    if not 0 < phi < np.pi / 2:
        raise ValueError("asymptote_angle must lie in (0, pi/2)")
    if not 0 < offset < span:
        raise ValueError("need 0 < offset < span")
    a, b = offset, offset * np.tan(phi)
    u_max = brentq(lambda u: np.hypot(a * np.cosh(u), b * np.sinh(u)) - span, 0.0, 50.0)
    # uniform in arclength along the branch
    u = np.linspace(-u_max, u_max, 8 * samples)
    xy = np.column_stack([a * np.cosh(u), b * np.sinh(u)])
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(xy, axis=0).T))])
    uu = np.interp(np.linspace(0, s[-1], samples), s, u)
    return geom.DiscreteCurve(np.column_stack([a * np.cosh(uu), b * np.sinh(uu)]), closed=False)


def radial_ray(angle=np.pi / 8, r_min=0.5, r_max=3.0, samples=512):
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    r = np.linspace(r_min, r_max, samples)
    return geom.DiscreteCurve(np.column_stack([r * np.cos(angle), r * np.sin(angle)]), closed=False)


def grim_reaper(samples=512, cut=6.0):
    """``y = log cos x`` down to depth ``-cut``, apex at the origin, uniform in arclength."""
    x_max = np.arccos(np.exp(-cut))
    s_max = np.arcsinh(np.tan(x_max))
    x = np.arctan(np.sinh(np.linspace(-s_max, s_max, samples)))
    return geom.DiscreteCurve(np.column_stack([x, np.log(np.cos(x))]), closed=False)
