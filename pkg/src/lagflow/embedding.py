"""Finite-difference geometry of explicit surfaces in C^2 = R^4.

This is the reference against which the reduced equivariant formulas are
checked.  A surface is any callable ``X(u, v) -> R^4``; metric, second
fundamental form and mean curvature vector come from central differences of
``X`` alone, with no knowledge of the symmetry.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from lagflow import geom


def equivariant_map(profile):
    """``(s, r) -> (cos r g(s), sin r g(s))`` flattened to ``(p1, q1, p2, q2)``.

    ``profile`` maps a parameter to a complex number.
    """

    def X(s, r):
        g = profile(s)
        z1, z2 = np.cos(r) * g, np.sin(r) * g
        return np.array([z1.real, z1.imag, z2.real, z2.imag])

    return X


def product_map(curve1, curve2):
    def X(s1, s2):
        a, b = curve1(s1), curve2(s2)
        return np.array([a.real, a.imag, b.real, b.imag])

    return X


def spline_profile(curve: geom.DiscreteCurve):
    """Cubic spline through the nodes, parametrised by chord length.

    Returns ``(fn, s_nodes)`` with ``fn(s)`` complex-valued.
    """
    s = np.concatenate([[0.0], np.cumsum(geom.segment_lengths(curve))])
    pts = curve.points
    if curve.closed:
        spline = CubicSpline(s, np.vstack([pts, pts[:1]]), bc_type="periodic")
        period = s[-1]

        def fn(x):
            xy = spline(np.mod(x, period))
            return xy[..., 0] + 1j * xy[..., 1]

        return fn, s[:-1]
    spline = CubicSpline(s, pts)

    def fn(x):
        xy = spline(x)
        return xy[..., 0] + 1j * xy[..., 1]

    return fn, s


def surface_geometry(X, u, v, h=1e-3):
    """Second-order finite-difference geometry of ``X`` at ``(u, v)``.

    Returns a dict with the metric ``g``, unit normal projector ``P``, the
    normal parts ``II[i][j]`` (vectors in R^4), the mean curvature vector
    ``H`` and ``II_norm`` = |II| in the induced metric.
    """
    x0 = X(u, v)
    xu = (X(u + h, v) - X(u - h, v)) / (2 * h)
    xv = (X(u, v + h) - X(u, v - h)) / (2 * h)
    xuu = (X(u + h, v) - 2 * x0 + X(u - h, v)) / h**2
    xvv = (X(u, v + h) - 2 * x0 + X(u, v - h)) / h**2
    xuv = (X(u + h, v + h) - X(u + h, v - h) - X(u - h, v + h) + X(u - h, v - h)) / (4 * h * h)
    E = np.column_stack([xu, xv])
    g = E.T @ E
    ginv = np.linalg.inv(g)
    P = np.eye(len(x0)) - E @ ginv @ E.T
    second = [[P @ xuu, P @ xuv], [P @ xuv, P @ xvv]]
    H = sum(ginv[i, j] * second[i][j] for i in range(2) for j in range(2))
    norm2 = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for m in range(2):
                    norm2 += ginv[i, k] * ginv[j, m] * second[i][j] @ second[k][m]
    return {"x": x0, "g": g, "P": P, "II": second, "H": H, "II_norm": float(np.sqrt(norm2)), "tangents": E}


def equivariant_oracle(profile, s, r=0.3, h=1e-3):
    """Reference mean curvature data of ``L_g`` at profile parameter ``s``.

    Returns ``(normal_speed, H_norm, II_norm)``.  ``normal_speed`` is the
    component of ``H`` along the rotated profile normal ``(cos r nu, sin r nu)``
    with ``nu`` the +pi/2 rotation of the unit tangent.
    """
    geo = surface_geometry(equivariant_map(profile), s, r, h)
    dg = (profile(s + h) - profile(s - h)) / (2 * h)
    nu = 1j * dg / abs(dg)
    n4 = np.array([np.cos(r) * nu.real, np.cos(r) * nu.imag, np.sin(r) * nu.real, np.sin(r) * nu.imag])
    H = geo["H"]
    return float(H @ n4), float(np.linalg.norm(H)), geo["II_norm"]


def lagrangian_defect(X, u, v, h=1e-3):
    """``omega(X_u, X_v)`` normalised by the area element; zero on Lagrangians."""
    xu = (X(u + h, v) - X(u - h, v)) / (2 * h)
    xv = (X(u, v + h) - X(u, v - h)) / (2 * h)
    omega = xu[0] * xv[1] - xu[1] * xv[0] + xu[2] * xv[3] - xu[3] * xv[2]
    area = np.sqrt(max((xu @ xu) * (xv @ xv) - (xu @ xv) ** 2, 1e-300))
    return float(omega / area)
