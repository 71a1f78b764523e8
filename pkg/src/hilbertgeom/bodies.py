"""Bounded convex bodies and the ray geometry used by the metric layer.

Three body kinds are supported:

* ``Polytope`` — convex hull of an explicit vertex list, with facets derived
  by brute force over d-subsets of vertices (desk scale: d <= 4, <= 64
  vertices).
* ``Ball`` — Euclidean ball, boundary hit by the quadratic formula.
* ``IntersectionBody`` — intersection of half-spaces, quadratic constraints
  x'Qx + c.x <= r, and optional black-box convex inequalities g(x) <= 0
  (black-box exits are bisected to relative width 1e-12 inside a bounding
  box).

Every body certifies an interior point at construction time.  ``ray_exit``
returns the exit parameter t* of the ray x + t*u through the boundary, which
is all the metric layer needs to form cross-ratios.
"""

from __future__ import annotations

import itertools
import json
import math

import numpy as np

from ._common import (
    BISECT_RTOL,
    EPS_GEO,
    DomainError,
    UnsupportedBodyError,
    as_point,
    canon_key,
    unit,
)

MAX_DIM = 4
MAX_VERTICES = 64


# ---------------------------------------------------------------------------
# facet enumeration


def _subset_normals(pts):
    """Normals of the hyperplanes through each row-batch of d points.

    pts has shape (M, d, d); returns (M, d) cofactor-expansion normals
    (unnormalized; ~0 for degenerate subsets).
    """
    m, d, _ = pts.shape
    if d == 1:
        return np.ones((m, 1))
    diffs = pts[:, 1:, :] - pts[:, :1, :]  # (M, d-1, d)
    normals = np.empty((m, d))
    cols = np.arange(d)
    for j in range(d):
        keep = cols[cols != j]
        normals[:, j] = ((-1.0) ** j) * np.linalg.det(diffs[:, :, keep])
    return normals


def polytope_facets(vertices):
    """Outward facet description (A, b) with unit rows, A x <= b.

    Brute force over d-subsets of the vertex list; a subset spanning a
    hyperplane with every vertex on one side contributes a facet.  Facets are
    deduplicated and lexicographically sorted, so the description is
    canonical for a given vertex list.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2:
        raise DomainError("vertices must be a 2-d array (n, d)")
    n, d = vertices.shape
    if d > MAX_DIM:
        raise DomainError(f"dimension {d} exceeds the supported bound {MAX_DIM}")
    if n > MAX_VERTICES:
        raise DomainError(f"{n} vertices exceed the supported bound {MAX_VERTICES}")
    if n < d + 1:
        raise DomainError("need at least d+1 vertices for a solid polytope")

    centroid = vertices.mean(axis=0)
    combos = np.array(list(itertools.combinations(range(n), d)), dtype=int)
    found = {}
    chunk = 20000
    for lo in range(0, len(combos), chunk):
        idx = combos[lo : lo + chunk]
        pts = vertices[idx]  # (M, d, d)
        normals = _subset_normals(pts)
        norms = np.linalg.norm(normals, axis=1)
        ok = norms > 1e-12
        if not np.any(ok):
            continue
        normals = normals[ok] / norms[ok, None]
        base = pts[ok, 0, :]
        offsets = np.einsum("md,md->m", normals, base)
        # orient outward: centroid strictly on the <= side
        side = normals @ centroid - offsets
        flip = side > 0
        normals[flip] *= -1.0
        offsets[flip] *= -1.0
        side = np.abs(side)
        # supporting hyperplane test
        slack = vertices @ normals.T - offsets[None, :]  # (n, M)
        supports = np.all(slack <= 1e-9, axis=0) & (side > 1e-12)
        for a, b in zip(normals[supports], offsets[supports]):
            found.setdefault((canon_key(a), round(float(b), 9)), (a, float(b)))

    if not found:
        raise DomainError("vertex list does not span a solid polytope")
    rows = sorted(found.values(), key=lambda ab: (canon_key(ab[0]), round(ab[1], 9)))
    A = np.array([a for a, _ in rows])
    b = np.array([off for _, off in rows])
    # post: every vertex satisfies the description
    worst = float(np.max(vertices @ A.T - b[None, :]))
    if worst > 1e-8:
        raise DomainError(f"facet derivation failed supporting-hyperplane check ({worst:.2e})")
    return A, b


# ---------------------------------------------------------------------------
# body classes


class Polytope:
    """Convex hull of a vertex list, stored with its derived facets.

    The listed vertices need not all be extreme (a point strictly inside the
    hull is tolerated and simply supports no facet); the ``convex-position``
    verify property flags such inputs.
    """

    kind = "polytope"

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2:
            raise DomainError("vertices must be a 2-d array (n, d)")
        self.dim = self.vertices.shape[1]
        self.A, self.b = polytope_facets(self.vertices)
        self.interior_point = self.vertices.mean(axis=0)
        slack = self.b - self.A @ self.interior_point
        if np.min(slack) <= EPS_GEO:
            raise DomainError("could not certify an interior point (degenerate polytope)")
        self.fixture_name = None

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def violations(self, x):
        x = as_point(x, self.dim)
        s = self.A @ x - self.b
        return [(f"facet {i}", float(v)) for i, v in enumerate(s)]

    def __repr__(self):
        return f"Polytope({len(self.vertices)} vertices, dim={self.dim})"


class Ball:
    """Euclidean ball {|x - center| < radius}."""

    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise DomainError("ball radius must be positive")
        self.dim = self.center.shape[0]
        self.interior_point = self.center.copy()
        self.fixture_name = None

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def violations(self, x):
        x = as_point(x, self.dim)
        return [("sphere", float(np.linalg.norm(x - self.center) - self.radius))]

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class IntersectionBody:
    """Intersection of half-spaces, quadratics, and black-box convex g <= 0.

    quadratics are triples (Q, c, r) encoding x'Qx + c.x <= r with Q positive
    semidefinite.  Black-box constraints must be convex, vectorized over
    leading axes, and negative at the certified interior point; their ray
    exits are found by bisection inside ``bbox``.
    """

    kind = "intersection"

    def __init__(self, halfspaces=None, quadratics=None, blackbox=None, bbox=None,
                 interior_point=None, blackbox_names=None):
        if halfspaces is None:
            A = np.zeros((0, 0))
            b = np.zeros(0)
        else:
            A, b = halfspaces
            A = np.asarray(A, dtype=float)
            b = np.asarray(b, dtype=float)
        self.quadratics = [
            (np.asarray(Q, dtype=float), np.asarray(c, dtype=float), float(r))
            for Q, c, r in (quadratics or [])
        ]
        self.blackbox = list(blackbox or [])
        self.blackbox_names = list(blackbox_names or [f"constraint {i}" for i in range(len(self.blackbox))])
        if bbox is None:
            raise DomainError("IntersectionBody requires a bounding box")
        self.bbox_lo = np.asarray(bbox[0], dtype=float)
        self.bbox_hi = np.asarray(bbox[1], dtype=float)
        self.dim = self.bbox_lo.shape[0]
        if A.size == 0:
            A = np.zeros((0, self.dim))
        self.A, self.b = A, b

        if interior_point is None:
            interior_point = 0.5 * (self.bbox_lo + self.bbox_hi)
        self.interior_point = np.asarray(interior_point, dtype=float)
        worst = max(v for _, v in self.violations(self.interior_point))
        if worst >= -EPS_GEO:
            raise DomainError("could not certify the supplied interior point")
        self.fixture_name = None

    def bbox(self):
        return self.bbox_lo.copy(), self.bbox_hi.copy()

    def violations(self, x):
        x = as_point(x, self.dim)
        out = []
        if len(self.A):
            for i, v in enumerate(self.A @ x - self.b):
                out.append((f"halfspace {i}", float(v)))
        for i, (Q, c, r) in enumerate(self.quadratics):
            out.append((f"quadratic {i}", float(x @ Q @ x + c @ x - r)))
        for name, g in zip(self.blackbox_names, self.blackbox):
            out.append((name, float(g(x))))
        if not out:
            raise DomainError("IntersectionBody has no constraints")
        return out

    def __repr__(self):
        return (f"IntersectionBody({len(self.A)} halfspaces, "
                f"{len(self.quadratics)} quadratics, {len(self.blackbox)} blackbox, dim={self.dim})")


# ---------------------------------------------------------------------------
# membership


def contains(body, x, margin=EPS_GEO):
    """True iff x is interior to the body with the given slack margin."""
    return max(v for _, v in body.violations(x)) < -margin


def worst_violation(body, x):
    """(constraint name, value) of the most violated constraint at x."""
    return max(body.violations(x), key=lambda nv: nv[1])


# ---------------------------------------------------------------------------
# ray exits


def _ray_exit_polytope_many(A, b, X, U):
    slack = b[None, :] - X @ A.T  # (N, m)
    au = U @ A.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(au > EPS_GEO, slack / au, np.inf)
    t = ratio.min(axis=1)
    if np.any(~np.isfinite(t)):
        raise DomainError("ray does not exit the polytope (unbounded direction)")
    return t


def _ray_exit_ball_many(center, radius, X, U):
    Xc = X - center[None, :]
    alpha = np.einsum("nd,nd->n", U, U)
    beta = np.einsum("nd,nd->n", U, Xc)
    gamma = np.einsum("nd,nd->n", Xc, Xc) - radius**2
    disc = beta**2 - alpha * gamma
    if np.any(disc < 0):
        raise DomainError("ray misses the sphere (start outside the ball?)")
    return (-beta + np.sqrt(disc)) / alpha


def _ray_exit_quadratic_many(Q, c, r, X, U):
    """Exit t for x'Qx + c.x <= r along rows of X, U; +inf when never binding."""
    alpha = np.einsum("nd,de,ne->n", U, Q, U)
    beta = 2.0 * np.einsum("nd,de,ne->n", X, Q, U) + U @ c
    gamma = np.einsum("nd,de,ne->n", X, Q, X) + X @ c - r
    t = np.full(len(X), np.inf)
    lin = np.abs(alpha) <= 1e-14
    pos = lin & (beta > 1e-14)
    t[pos] = -gamma[pos] / beta[pos]
    quad = ~lin
    if np.any(quad):
        disc = beta[quad] ** 2 - 4.0 * alpha[quad] * gamma[quad]
        disc = np.maximum(disc, 0.0)
        t[quad] = (-beta[quad] + np.sqrt(disc)) / (2.0 * alpha[quad])
    return t


def _bisect_exit(g, x, u, t_hi):
    """Largest t in [0, t_hi] with g(x + t u) <= 0, to relative width 1e-12."""
    if g(x + t_hi * u) < 0:
        return math.inf
    lo, hi = 0.0, t_hi
    # fixed iteration count reaches 1e-12 relative width deterministically
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if g(x + mid * u) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_RTOL * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _bbox_exit(lo, hi, x, u):
    with np.errstate(divide="ignore", invalid="ignore"):
        t_up = np.where(u > EPS_GEO, (hi - x) / u, np.inf)
        t_dn = np.where(u < -EPS_GEO, (lo - x) / u, np.inf)
    return float(min(t_up.min(), t_dn.min()))


def ray_exit_many(body, X, U):
    """Vectorized ray_exit over rows of X (interior starts) and U (directions)."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    if isinstance(body, Polytope):
        return _ray_exit_polytope_many(body.A, body.b, X, U)
    if isinstance(body, Ball):
        return _ray_exit_ball_many(body.center, body.radius, X, U)
    if isinstance(body, IntersectionBody):
        t = np.full(len(X), np.inf)
        if len(body.A):
            t = np.minimum(t, _ray_exit_polytope_many_relaxed(body.A, body.b, X, U))
        for Q, c, r in body.quadratics:
            t = np.minimum(t, _ray_exit_quadratic_many(Q, c, r, X, U))
        if body.blackbox:
            margin = 1.0 + 1e-6
            for i in range(len(X)):
                t_hi = _bbox_exit(body.bbox_lo, body.bbox_hi, X[i], U[i]) * margin
                for g in body.blackbox:
                    t[i] = min(t[i], _bisect_exit(g, X[i], U[i], t_hi))
        if np.any(~np.isfinite(t)):
            raise DomainError("ray does not exit the body (missing binding constraint)")
        return t
    raise UnsupportedBodyError(f"ray_exit not implemented for {type(body).__name__}")


def _ray_exit_polytope_many_relaxed(A, b, X, U):
    """Half-space exit that tolerates rays never binding (returns +inf)."""
    slack = b[None, :] - X @ A.T
    au = U @ A.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(au > EPS_GEO, slack / au, np.inf)
    if ratio.shape[1] == 0:
        return np.full(len(X), np.inf)
    return ratio.min(axis=1)


def ray_exit(body, x, u):
    """Exit parameter t* > 0 of the ray x + t u (x interior, u nonzero)."""
    x = as_point(x, body.dim)
    u = as_point(u, body.dim)
    if np.linalg.norm(u) <= EPS_GEO:
        raise DomainError("ray direction must be nonzero")
    if not contains(body, x):
        name, v = worst_violation(body, x)
        raise DomainError(f"ray start is not interior ({name}: violation {v:.3e})")
    t = float(ray_exit_many(body, x[None, :], u[None, :])[0])
    if not (t > 0):
        raise DomainError("ray exit degenerate (start on the boundary?)")
    return t


def line_range(body, x, u):
    """Interval [t_lo, t_hi] with x + t u in the closed body.

    Unlike ray_exit, x may lie on the boundary; black-box constraints are not
    supported here.
    """
    x = as_point(x, body.dim)
    u = as_point(u, body.dim)
    t_lo, t_hi = -math.inf, math.inf

    def clip_halfspaces(A, b):
        nonlocal t_lo, t_hi
        au = A @ u
        s = b - A @ x
        for i in range(len(A)):
            if au[i] > EPS_GEO:
                t_hi = min(t_hi, s[i] / au[i])
            elif au[i] < -EPS_GEO:
                t_lo = max(t_lo, s[i] / au[i])
            elif s[i] < -EPS_GEO:
                raise DomainError("line misses the body")

    def clip_quadratic(Q, c, r):
        nonlocal t_lo, t_hi
        alpha = u @ Q @ u
        beta = 2.0 * (x @ Q @ u) + c @ u
        gamma = x @ Q @ x + c @ x - r
        if abs(alpha) <= 1e-14:
            if beta > 1e-14:
                t_hi = min(t_hi, -gamma / beta)
            elif beta < -1e-14:
                t_lo = max(t_lo, -gamma / beta)
            elif gamma > EPS_GEO:
                raise DomainError("line misses the body")
            return
        disc = beta**2 - 4.0 * alpha * gamma
        if disc < 0:
            raise DomainError("line misses the body")
        root = math.sqrt(disc)
        t_lo = max(t_lo, (-beta - root) / (2.0 * alpha))
        t_hi = min(t_hi, (-beta + root) / (2.0 * alpha))

    if isinstance(body, Polytope):
        clip_halfspaces(body.A, body.b)
    elif isinstance(body, Ball):
        clip_quadratic(np.eye(body.dim), -2.0 * body.center,
                       body.radius**2 - body.center @ body.center)
    elif isinstance(body, IntersectionBody):
        if body.blackbox:
            raise UnsupportedBodyError("line_range does not support black-box constraints")
        if len(body.A):
            clip_halfspaces(body.A, body.b)
        for Q, c, r in body.quadratics:
            clip_quadratic(Q, c, r)
    else:
        raise UnsupportedBodyError(f"line_range not implemented for {type(body).__name__}")

    if not (t_lo <= t_hi) or not math.isfinite(t_lo) or not math.isfinite(t_hi):
        raise DomainError("line does not meet the body in a bounded interval")
    return float(t_lo), float(t_hi)


# ---------------------------------------------------------------------------
# JSON descriptions


def body_to_json(body):
    if isinstance(body, Polytope):
        return {"type": "polytope", "vertices": body.vertices.tolist()}
    if isinstance(body, Ball):
        return {"type": "ball", "center": body.center.tolist(), "radius": body.radius}
    if isinstance(body, IntersectionBody):
        if body.blackbox:
            raise UnsupportedBodyError("black-box constraints are not JSON-serializable")
        return {
            "type": "intersection",
            "halfspaces": [{"a": a.tolist(), "b": float(bi)} for a, bi in zip(body.A, body.b)],
            "quadratics": [
                {"Q": Q.tolist(), "c": c.tolist(), "r": r} for Q, c, r in body.quadratics
            ],
            "bbox": {"lo": body.bbox_lo.tolist(), "hi": body.bbox_hi.tolist()},
            "interior_point": body.interior_point.tolist(),
        }
    raise UnsupportedBodyError(f"cannot serialize {type(body).__name__}")


def body_from_json(data):
    """Build a body from its JSON description (dict or JSON string)."""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        kind = data["type"]
    except (TypeError, KeyError):
        raise DomainError("body description must be an object with a 'type' field")
    if kind == "polytope":
        return Polytope(data["vertices"])
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "intersection":
        hs = data.get("halfspaces", [])
        halfspaces = None
        if hs:
            halfspaces = (np.array([h["a"] for h in hs], dtype=float),
                          np.array([h["b"] for h in hs], dtype=float))
        quads = [(q["Q"], q["c"], q["r"]) for q in data.get("quadratics", [])]
        bbox = (data["bbox"]["lo"], data["bbox"]["hi"])
        return IntersectionBody(halfspaces=halfspaces, quadratics=quads, bbox=bbox,
                                interior_point=data.get("interior_point"))
    raise DomainError(f"unknown body type {kind!r}")
