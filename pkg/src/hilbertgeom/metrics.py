"""Funk, reverse-Funk, and Hilbert distances via two independent routes.

The *body route* works on a bounded convex domain: shoot the ray from x
through y, find the boundary exit at parameter t*, and take
log(t* / (t* - |x - y|)).

The *cone route* works on a polyhedral cone through the gauge

    m_ratio(c, y, x) = inf{lambda > 0 : y <= lambda x in the cone order}
                     = max(0, max_i (a_i . y) / (a_i . x)),

with funk(x, y) = log m_ratio(x over y) and the Hilbert distance the
symmetrization funk(x, y) + funk(y, x).  On a polytope the two routes agree
through the lift of the polytope to a cone at height 1; the test suite pins
that agreement to 1e-9.

The gauge is evaluated as a max of ratios, never as a difference, so values
stay accurate arbitrarily close to the boundary -- the convergence
experiments depend on that.
"""

from __future__ import annotations

import math

import numpy as np

from ._common import EPS_GEO, GAP_CLAMP, DomainError, as_point, xlog
from .bodies import ray_exit, ray_exit_many
from .cones import PolyCone


def m_ratio(c: PolyCone, y, x):
    """Gauge M(y/x) on the cone: least lambda > 0 with y <= lambda x.

    x must be strictly inside the cone (every a_i . x > 0); y is any ambient
    point.  The value is the max of the per-normal ratios, floored at 0:
    when every ratio is nonpositive, every positive lambda is admissible and
    the infimum is 0 (funk then evaluates to -inf).
    """
    y = as_point(y, c.dim)
    x = as_point(x, c.dim)
    if c.m == 0:
        return 0.0
    ax = c.normals @ x
    if np.min(ax) <= 0.0:
        raise DomainError("gauge base point is not interior (some a_i . x <= 0)")
    return max(float(np.max((c.normals @ y) / ax)), 0.0)


def m_ratio_many(c: PolyCone, Y, x):
    """Vectorized M(y/x) over rows of Y against a fixed interior x."""
    Y = np.asarray(Y, dtype=float)
    if c.m == 0:
        return np.zeros(len(Y))
    ax = c.normals @ as_point(x, c.dim)
    if np.min(ax) <= 0.0:
        raise DomainError("gauge base point is not interior (some a_i . x <= 0)")
    return np.maximum((Y @ c.normals.T / ax).max(axis=1), 0.0)


def m_ratio_bases(c: PolyCone, y, X):
    """Vectorized M(y/x) for a fixed numerator y over rows of X as bases."""
    X = np.asarray(X, dtype=float)
    if c.m == 0:
        return np.zeros(len(X))
    AX = X @ c.normals.T
    if np.min(AX) <= 0.0:
        raise DomainError("gauge base point is not interior (some a_i . x <= 0)")
    ay = c.normals @ as_point(y, c.dim)
    return np.maximum((ay[None, :] / AX).max(axis=1), 0.0)


def funk_cone(c: PolyCone, x, y):
    """Funk distance on the cone from x to y: log M(x/y); y interior."""
    return xlog(m_ratio(c, x, y))


def reverse_funk_cone(c: PolyCone, x, y):
    """funk_cone with swapped arguments: log M(y/x); y may be boundary."""
    return xlog(m_ratio(c, y, x))


def hilbert_cone(c: PolyCone, x, y):
    """Hilbert (projective) distance on the cone; both points interior."""
    return xlog(m_ratio(c, x, y)) + xlog(m_ratio(c, y, x))


def funk_body(body, x, y):
    """Funk distance on a bounded convex body, by the boundary exit ray."""
    x = as_point(x, body.dim)
    y = as_point(y, body.dim)
    sep = float(np.linalg.norm(y - x))
    if sep <= EPS_GEO:
        return 0.0
    t_star = ray_exit(body, x, (y - x) / sep)
    return math.log(t_star / max(t_star - sep, GAP_CLAMP))


def reverse_funk_body(body, x, y):
    return funk_body(body, y, x)


def hilbert_body(body, x, y):
    return funk_body(body, x, y) + funk_body(body, y, x)


def funk_body_many(body, X, Y):
    """Row-wise funk_body over paired rows of X and Y (all interior)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    D = Y - X
    sep = np.linalg.norm(D, axis=1)
    live = sep > EPS_GEO
    out = np.zeros(len(X))
    if np.any(live):
        U = D[live] / sep[live, None]
        t = ray_exit_many(body, X[live], U)
        out[live] = np.log(t / np.maximum(t - sep[live], GAP_CLAMP))
    return out


def _is_cone(obj):
    return isinstance(obj, PolyCone)


def funk(space, x, y):
    """Funk distance on either a body or a cone (dispatch on the type)."""
    return funk_cone(space, x, y) if _is_cone(space) else funk_body(space, x, y)


def reverse_funk(space, x, y):
    return funk(space, y, x)


def hilbert(space, x, y):
    if _is_cone(space):
        return hilbert_cone(space, x, y)
    return hilbert_body(space, x, y)


def homogeneity_shift(c: PolyCone, z, x, y, alpha):
    """Funk values after sliding an endpoint along a lineality direction.

    For z in the lineality space of c and alpha > 0, returns the pair

        (funk((1-alpha) z + alpha x, y),  funk(x, (1-alpha) z + alpha y))

    and checks they equal (log alpha + funk(x,y), -log alpha + funk(x,y))
    to 1e-10, which is the scaling law the horofunction extension rests on.
    """
    z = as_point(z, c.dim)
    x = as_point(x, c.dim)
    y = as_point(y, c.dim)
    alpha = float(alpha)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    L = c.lineality()
    resid = z - L.T @ (L @ z) if L.size else z
    if np.linalg.norm(resid) > 1e-8 * max(1.0, np.linalg.norm(z)):
        raise DomainError("z is not in the lineality space of the cone")
    base = funk_cone(c, x, y)
    first = funk_cone(c, (1.0 - alpha) * z + alpha * x, y)
    second = funk_cone(c, x, (1.0 - alpha) * z + alpha * y)
    la = math.log(alpha)
    if abs(first - (la + base)) > 1e-10 or abs(second - (base - la)) > 1e-10:
        raise ArithmeticError(
            "homogeneity identity violated: "
            f"({first:.15g}, {second:.15g}) vs funk={base:.15g}, log alpha={la:.15g}")
    return first, second
