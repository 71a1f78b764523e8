"""Polar duality for convex bodies and the (non)closedness of face families.

For a polytope with the origin interior, the polar is again a polytope and
its nonempty faces form a finite family closed under limits.  For smooth or
mixed bodies that family can fail to be closed: a convergent sequence of
exposed faces may leave the family.  ``nonclosedness_witness`` builds an
explicit certificate of this failure for the two shipped counterexample
fixtures, using exact support-function models of their polar hulls
(``PolarHull``) rather than numeric optimization.

Face sets here are realized combinatorially, as vertex-index sets
(``extreme_sets``), and metrically, as vertex arrays compared in the
vertex-set Hausdorff distance.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from ._common import DomainError, UnsupportedBodyError, as_point
from .bodies import Polytope


# ---------------------------------------------------------------------------
# polytope polarity and face combinatorics


def polar_polytope(vertices):
    """Polar body {y : y.x <= 1 on the body}, for a polytope with 0 interior.

    Accepts a vertex array or a Polytope.  With unit facet rows
    a_i . x <= b_i and all b_i > 0, the polar is the convex hull of the
    points a_i / b_i, each of which is extreme.
    """
    body = vertices if isinstance(vertices, Polytope) else Polytope(vertices)
    if np.min(body.b) <= 0.0:
        raise DomainError("polar requires the origin strictly inside the body")
    return Polytope(body.A / body.b[:, None])


class ExtremeSetFamily:
    """Nonempty faces of a polytope as vertex-index sets.

    ``sets`` holds one frozenset per face, in deterministic (size,
    lexicographic) order; the full index set (the improper face) is always a
    member.  Built as the closure of the facet incidence sets under
    intersection, which for polytopes enumerates exactly the nonempty faces.
    """

    def __init__(self, sets, facet_sets, n_vertices):
        self.sets = sorted(sets, key=lambda s: (len(s), tuple(sorted(s))))
        self.facet_sets = facet_sets
        self.n_vertices = n_vertices

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __contains__(self, s):
        return frozenset(s) in set(self.sets)

    def __repr__(self):
        return f"ExtremeSetFamily({len(self.sets)} faces on {self.n_vertices} vertices)"


def extreme_sets(body: Polytope, tol=1e-9):
    """All nonempty faces of a polytope, as vertex-index sets."""
    if not isinstance(body, Polytope):
        raise UnsupportedBodyError("face enumeration is implemented for polytopes only")
    V = body.vertices
    facet_sets = [
        frozenset(int(i) for i in np.flatnonzero(np.abs(V @ body.A[k] - body.b[k]) <= tol))
        for k in range(len(body.A))
    ]
    sets = {frozenset(range(len(V)))} | set(facet_sets)
    frontier = list(sets)
    while frontier:
        cur = frontier.pop()
        for f in facet_sets:
            s = cur & f
            if s and s not in sets:
                sets.add(s)
                frontier.append(s)
    return ExtremeSetFamily(sets, facet_sets, len(V))


def hausdorff_distance(p, q):
    """Vertex-set Hausdorff distance max(max-min, max-min).

    Computed on the vertex lists (polytopes contribute their vertex arrays).
    This upper-bounds the Hausdorff distance of the hulls and agrees with it
    whenever each vertex projects onto a vertex of the other body, which
    holds for every comparison made in this package.
    """
    P = p.vertices if isinstance(p, Polytope) else np.atleast_2d(np.asarray(p, dtype=float))
    Q = q.vertices if isinstance(q, Polytope) else np.atleast_2d(np.asarray(q, dtype=float))
    D = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=2)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


class ClosednessReport:
    """Verdict of ``closedness_check`` with the rule that decided it."""

    def __init__(self, closed, rule, detail):
        self.closed = closed
        self.rule = rule
        self.detail = detail

    def __repr__(self):
        return f"ClosednessReport(closed={self.closed}, rule={self.rule!r})"


def closedness_check(body):
    """Decide closedness of the polar face family when a rule applies.

    Polytopes: the family is finite, hence closed.  Planar bodies: face
    families of two-dimensional convex bodies are always closed (faces are
    points or segments of the boundary circle order).  Anything else is out
    of reach of these rules and raises UnsupportedBodyError — use
    ``nonclosedness_witness`` for the shipped counterexamples.
    """
    if isinstance(body, Polytope):
        return ClosednessReport(True, "finite-face-family",
                                "a polytope's polar has finitely many faces")
    if getattr(body, "dim", None) == 2:
        return ClosednessReport(True, "planar-rule",
                                "face families of planar convex bodies are closed")
    raise UnsupportedBodyError(
        "no closedness rule applies in dimension >= 3 for non-polytopal bodies")


# ---------------------------------------------------------------------------
# exact support models of polar hulls


class CircleFamily:
    """A circle center + cos(t) u + sin(t) v of hull generators.

    u, v must be orthonormal and orthogonal to any variation of interest in
    ``center``; support and argmax have closed forms.
    """

    def __init__(self, center, u, v, name):
        self.center = np.asarray(center, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.name = name

    def support(self, d):
        d = np.asarray(d, dtype=float)
        return float(d @ self.center + math.hypot(float(d @ self.u), float(d @ self.v)))

    def argmax(self, d):
        """Maximizing point; the whole circle ties when d is axial."""
        d = np.asarray(d, dtype=float)
        du, dv = float(d @ self.u), float(d @ self.v)
        r = math.hypot(du, dv)
        if r <= 1e-300:
            return self.point(0.0), False
        return self.center + (du / r) * self.u + (dv / r) * self.v, True

    def point(self, theta):
        return self.center + math.cos(theta) * self.u + math.sin(theta) * self.v

    def __repr__(self):
        return f"CircleFamily({self.name})"


class PolarHull:
    """Exact support model of a convex hull of points and circles."""

    def __init__(self, points=None, circles=(), name=""):
        self.points = (np.zeros((0, circles[0].center.shape[0]))
                       if points is None else np.asarray(points, dtype=float))
        self.circles = list(circles)
        self.name = name
        self.dim = self.points.shape[1] if self.points.size else self.circles[0].center.shape[0]

    def support(self, d):
        return max(self.support_breakdown(d).values())

    def support_breakdown(self, d):
        d = np.asarray(d, dtype=float)
        out = {}
        if len(self.points):
            out["points"] = float(np.max(self.points @ d))
        for fam in self.circles:
            out[fam.name] = fam.support(d)
        return out

    def membership_margin(self, p, n_dirs=512, seed=0):
        """max_d (d.p - h(d)) over a scrambled-Sobol sphere sample.

        Nonpositive (up to rounding) certifies consistency with membership;
        for hull boundary points the max approaches 0 from below.
        """
        p = as_point(p, self.dim)
        sob = qmc.Sobol(self.dim, scramble=True, seed=seed)
        u = np.clip(sob.random(n_dirs), 1e-12, 1.0 - 1e-12)
        dirs = norm.ppf(u)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        worst = -np.inf
        for d in dirs:
            worst = max(worst, float(p @ d) - self.support(d))
        return worst

    def __repr__(self):
        return f"PolarHull({self.name}, {len(self.points)} points, {len(self.circles)} circles)"


def _point_set_distance(m, target):
    """Distance from m to the convex hull of a small vertex array."""
    target = np.atleast_2d(target)
    if len(target) == 1:
        return float(np.linalg.norm(m - target[0]))
    # segment / simplex: project onto the affine span, then clamp to the hull
    # by brute-force convex-coefficient grid (targets here have <= 2 vertices)
    if len(target) == 2:
        a, b = target
        u = b - a
        t = float(np.clip((m - a) @ u / (u @ u), 0.0, 1.0))
        return float(np.linalg.norm(m - (a + t * u)))
    raise UnsupportedBodyError("extremeness targets with >2 vertices not needed here")


class ChordSearchResult:
    """Best chord found when hunting for a non-extremeness certificate."""

    def __init__(self, found, distance, chord):
        self.found = found
        self.distance = distance
        self.chord = chord

    def __repr__(self):
        return f"ChordSearchResult(found={self.found}, distance={self.distance:.3e})"


def chord_search(hull: PolarHull, target, n_seeds=1000, seed=0, tol=1e-9):
    """Search hull chords whose midpoint lands in ``target``.

    A convex subset is extreme exactly when no chord of the ambient body
    crosses it transversally, so a found chord — midpoint within tol of the
    target, an endpoint well outside it — certifies non-extremeness.  Chords
    run between hull generators: point-point pairs are enumerated exactly,
    and chords with endpoints on generator circles are polished by
    Nelder-Mead from seeded random angles.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    target = np.atleast_2d(np.asarray(target, dtype=float))
    best = [math.inf, None]

    def consider(u, w):
        if np.linalg.norm(u - w) < 1e-6:
            return
        dm = _point_set_distance(0.5 * (u + w), target)
        out = max(_point_set_distance(u, target), _point_set_distance(w, target))
        if out > 1e-6 and dm < best[0]:
            best[0], best[1] = dm, np.array([u, w])

    # exact pass over finite generator pairs
    pts = hull.points
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            consider(pts[i], pts[j])

    # optimized pass over circle-ended chords
    ends = ([("point", p) for p in pts]
            + [("circle", fam) for fam in hull.circles])
    variable_pairs = [(a, b) for k, a in enumerate(ends) for b in ends[k:]
                      if a[1] is not b[1] or a[0] == "circle"]
    variable_pairs = [(a, b) for a, b in variable_pairs
                      if a[0] == "circle" or b[0] == "circle"]
    if variable_pairs:
        per = max(1, n_seeds // len(variable_pairs))
        for a, b in variable_pairs:
            k = (a[0] == "circle") + (b[0] == "circle")

            def endpoints(params):
                it = iter(params)
                u = a[1].point(next(it)) if a[0] == "circle" else a[1]
                w = b[1].point(next(it)) if b[0] == "circle" else b[1]
                return u, w

            def fun(params):
                u, w = endpoints(params)
                gap = np.linalg.norm(u - w)
                penalty = 1e3 * max(0.0, 1e-3 - gap)
                return _point_set_distance(0.5 * (u + w), target) + penalty

            for _ in range(per):
                x0 = rng.uniform(0.0, 2.0 * math.pi, size=k)
                res = minimize(fun, x0, method="Nelder-Mead",
                               options={"xatol": 1e-12, "fatol": 1e-14,
                                        "maxiter": 400})
                consider(*endpoints(res.x))

    return ChordSearchResult(best[0] <= tol, best[0], best[1])


# ---------------------------------------------------------------------------
# nonclosedness certificates


class SetSequence:
    """A labeled sequence of compact sets, each a point sample (array)."""

    def __init__(self, labels, sets):
        self.labels = list(labels)
        self.sets = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sets]
        if len(self.labels) != len(self.sets):
            raise DomainError("labels and sets must pair up")

    def hausdorff_to(self, target):
        return np.array([hausdorff_distance(s, target) for s in self.sets])

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, i):
        return self.sets[i]

    def __iter__(self):
        return iter(self.sets)

    def __repr__(self):
        return f"SetSequence({len(self.sets)} sets)"


class NonclosednessWitness:
    """Certificate that a body's polar face family is not closed.

    Carries a sequence of exposed faces F_n of the polar hull (vertex arrays,
    exposure directions, strict exposure margins), the limit set E of the
    F_n, and a chord of the hull transverse to E whose midpoint lies in E's
    relative interior — so E cannot be a face, although it is a Hausdorff
    limit of faces.
    """

    def __init__(self, fixture, hull, ns, directions, faces, margins,
                 limit_face, chord, notes):
        self.fixture = fixture
        self.hull = hull
        self.ns = list(ns)
        self.directions = np.asarray(directions, dtype=float)
        self.faces = SetSequence([f"n={n}" for n in self.ns], faces)
        self.margins = np.asarray(margins, dtype=float)
        self.limit_face = np.atleast_2d(np.asarray(limit_face, dtype=float))
        self.chord = np.asarray(chord, dtype=float)
        self.chord_midpoint = 0.5 * (self.chord[0] + self.chord[1])
        self.face_distances = self.faces.hausdorff_to(self.limit_face)
        self.notes = notes

    def verify(self, n_dirs=512, seed=0, tol=1e-9):
        """Re-check every claim numerically; returns a dict of worst slacks."""
        checks = {}
        checks["exposure_margin_min"] = float(np.min(self.margins))
        if checks["exposure_margin_min"] <= 0:
            raise ArithmeticError("an exposed face lost its strict margin")
        # faces approach the limit set
        d = self.face_distances
        checks["distance_final"] = float(d[-1])
        if np.any(np.diff(d) > tol) or d[-1] >= d[0]:
            raise ArithmeticError("face distances fail to decrease toward the limit")
        # every face vertex, chord endpoint, and limit vertex sits in the hull
        worst = -np.inf
        pts = [v for f in self.faces for v in f]
        pts += list(self.limit_face) + list(self.chord)
        for p in pts:
            worst = max(worst, self.hull.membership_margin(p, n_dirs, seed))
        checks["membership_margin"] = worst
        if worst > tol:
            raise ArithmeticError("a witness point escaped the hull support function")
        # the chord is transverse: endpoints leave the limit face's affine hull
        base = self.limit_face[0]
        U = self.limit_face - base
        rank = np.linalg.matrix_rank(U, tol=1e-9)
        if rank:
            B = np.linalg.svd(U)[2][:rank]  # orthonormal basis of span(U)
            proj = (self.chord - base) @ B.T @ B + base
        else:
            proj = np.broadcast_to(base, self.chord.shape)
        gap = float(np.min(np.linalg.norm(self.chord - proj, axis=1)))
        checks["chord_transversality"] = gap
        if gap <= 1e-6:
            raise ArithmeticError("chord lies inside the limit face's affine hull")
        # midpoint sits in the limit set
        mid_err = float(np.min(np.linalg.norm(self.limit_face - self.chord_midpoint, axis=1))
                        if len(self.limit_face) == 1 else
                        np.linalg.norm(self.chord_midpoint - self.limit_face.mean(axis=0)))
        checks["midpoint_in_limit"] = mid_err
        if mid_err > tol:
            raise ArithmeticError("chord midpoint misses the limit face")
        return checks

    def summary(self):
        return {
            "fixture": self.fixture,
            "n_values": self.ns,
            "exposure_margins": self.margins.tolist(),
            "face_distances": self.face_distances.tolist(),
            "limit_face": self.limit_face.tolist(),
            "chord": self.chord.tolist(),
            "notes": self.notes,
        }

    def __repr__(self):
        return (f"NonclosednessWitness({self.fixture}, {len(self.faces)} faces, "
                f"final distance {self.face_distances[-1]:.3e})")


def _witness_planar_cap(hull, ns):
    """Faces {p_n} on the unit circle pinching onto a non-extreme point.

    p_n = (cos 1/n, sin 1/n, 0) is the unique maximizer of its own direction
    (the four corner generators trail by 1 - cos 1/n), but the limit
    (1, 0, 0) is the midpoint of the hull chord (1, 0, +-1), so the singleton
    limit is not a face.
    """
    dirs, faces, margins = [], [], []
    for n in ns:
        c, s = math.cos(1.0 / n), math.sin(1.0 / n)
        d = np.array([c, s, 0.0])
        p = np.array([c, s, 0.0])
        bd = hull.support_breakdown(d)
        margins.append(bd["equator"] - bd["points"])
        dirs.append(d)
        faces.append(p[None, :])
    chord = np.array([[1.0, 0.0, 1.0], [1.0, 0.0, -1.0]])
    return NonclosednessWitness(
        "example2", hull, ns, dirs, faces, margins,
        limit_face=np.array([[1.0, 0.0, 0.0]]), chord=chord,
        notes="singleton exposed faces on the equator converge to the midpoint "
              "of a vertical hull chord; the limit point is not extreme")


def _witness_tilted_segments(hull, ns):
    """Segment faces E_t pinching onto a chord of a disk face (4-d).

    The direction (1, t, 0, 0) exposes the segment between the two tilted
    circle points (c_t, s_t, +-1, 0) with margin sqrt(1+t^2) - 1 over the
    axis circles.  At t = 0 the support face blows up to a two-dimensional
    disk, and the limit segment is a diameter of it — not a face: its
    midpoint (1, 0, 0, 0) is the midpoint of the orthogonal chord
    (1, 0, 0, +-1).
    """
    dirs, faces, margins = [], [], []
    for n in ns:
        t = 1.0 / n
        d = np.array([1.0, t, 0.0, 0.0])
        r = math.hypot(1.0, t)
        ct, st = 1.0 / r, t / r
        seg = np.array([[ct, st, 1.0, 0.0], [ct, st, -1.0, 0.0]])
        bd = hull.support_breakdown(d)
        others = max(v for k, v in bd.items() if not k.startswith("cap"))
        margins.append(r - others)
        dirs.append(d)
        faces.append(seg)
    chord = np.array([[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, -1.0]])
    return NonclosednessWitness(
        "example4d", hull, ns, dirs, faces, margins,
        limit_face=np.array([[1.0, 0.0, 1.0, 0.0], [1.0, 0.0, -1.0, 0.0]]),
        chord=chord,
        notes="tilted segment faces converge to a diameter of the disk face "
              "exposed by (1,0,0,0); the diameter is not a face")


def nonclosedness_witness(fixture, n_max=1024):
    """Build the face-family nonclosedness certificate for a fixture.

    ``fixture`` is "example2", "example4d", or a body instance carrying an
    exact polar-hull model; anything else raises UnsupportedBodyError.  The
    face sequence runs over n = 2, 4, ..., doubling up to n_max.  Use
    ``.verify()`` on the result to re-check every numeric claim.
    """
    if isinstance(fixture, str):
        from .fixtures import make_fixture
        body = make_fixture(fixture)
    else:
        body = fixture
    hull = getattr(body, "polar_hull", None)
    name = getattr(body, "fixture_name", None)
    if hull is None or name not in ("example2", "example4d"):
        raise UnsupportedBodyError(
            "nonclosedness witnesses exist only for the example2/example4d fixtures")
    n_values, n = [], 2
    while n <= n_max:
        n_values.append(n)
        n *= 2
    if not n_values:
        raise DomainError("n_max must be at least 2")
    if name == "example2":
        return _witness_planar_cap(hull, n_values)
    return _witness_tilted_segments(hull, n_values)
