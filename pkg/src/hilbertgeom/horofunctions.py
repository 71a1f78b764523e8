"""Horofunctions of the Funk, reverse-Funk, and Hilbert geometries on cones.

Three closed forms cover the polyhedral theory:

* the reverse-Funk boundary function of a boundary ray z,
      x -> log M(z/x) - log M(z/b);
* the Funk-side function of an interior point p of a (possibly larger)
  tangent cone T,
      x -> log M(x/p) - log M(b/p);
* their sum, indexed by a BusemannDescriptor (z, chain of tangent-cone
  steps, p), which names one Busemann point of the Hilbert geometry.

``busemann_catalog`` enumerates the descriptor families of a pointed
polyhedral cone: one family per proper boundary face (z at the face's
ray barycenter), one member per cone in the tangent family of the face's
tangent cone, each with a canonical interior point (the analytic center).

All evaluators are normalized to vanish at the basepoint.
"""

from __future__ import annotations

import math

import numpy as np

from ._common import EPS_GEO, DomainError, as_point, unit, xlog
from .cones import (
    ConeChain,
    PolyCone,
    boundary_active_sets,
    cone_generators,
    open_tangent_cone,
    tangent_cone_family,
)
from .metrics import m_ratio, m_ratio_bases, m_ratio_many


class HorofunctionEvaluator:
    """A boundary function of the cone, wrapped with its provenance.

    kind is one of "reverse-funk", "funk-part", "busemann", "extension",
    "sampled"; ``cone`` is the domain the evaluator is defined on, and every
    evaluator returns 0 at its basepoint.
    """

    def __init__(self, kind, cone, basepoint, fn, fn_many=None, meta=None):
        self.kind = kind
        self.cone = cone
        self.basepoint = np.asarray(basepoint, dtype=float)
        self._fn = fn
        self._fn_many = fn_many
        self.meta = dict(meta or {})

    def __call__(self, x):
        return float(self._fn(as_point(x, self.cone.dim)))

    def eval_many(self, X):
        X = np.asarray(X, dtype=float)
        if self._fn_many is not None:
            return self._fn_many(X)
        return np.array([self._fn(row) for row in X])

    def __repr__(self):
        return f"HorofunctionEvaluator(kind={self.kind!r}, dim={self.cone.dim})"


def reverse_horofunction(c: PolyCone, z, b):
    """Reverse-Funk horofunction of the boundary ray z, vanishing at b.

    Evaluates x -> log M(z/x) - log M(z/b).  Depends on z only through its
    ray: rescaling z shifts both terms by the same constant.
    """
    z = c.boundary_ray(z)
    L = c.lineality()
    if L.size and np.linalg.norm(z - L.T @ (L @ z)) <= 1e-9:
        raise DomainError("boundary ray lies in the lineality space")
    b = as_point(b, c.dim)
    const = xlog(m_ratio(c, z, b))
    if not math.isfinite(const):
        raise DomainError("basepoint is not interior to the cone")

    def fn(x):
        return xlog(m_ratio(c, z, x)) - const

    def fn_many(X):
        with np.errstate(divide="ignore"):
            return np.log(m_ratio_bases(c, z, X)) - const

    return HorofunctionEvaluator("reverse-funk", c, b, fn, fn_many, {"z": z})


def funk_horofunction(t: PolyCone, p, b):
    """Funk-side horofunction of an interior point p of t, vanishing at b.

    Evaluates x -> log M(x/p) - log M(b/p).  For a tangent cone t of the
    ambient cone C, the restriction to C is the Funk part of a Busemann
    point; the value is -inf outside the positive part of t, finite on all
    of C.
    """
    p = as_point(p, t.dim)
    b = as_point(b, t.dim)
    const = xlog(m_ratio(t, b, p))
    if not math.isfinite(const):
        raise DomainError("basepoint has nonpositive gauge against p")

    def fn(x):
        return xlog(m_ratio(t, x, p)) - const

    def fn_many(X):
        with np.errstate(divide="ignore"):
            return np.log(m_ratio_many(t, X, p)) - const

    return HorofunctionEvaluator("funk-part", t, b, fn, fn_many, {"p": p})


class BusemannDescriptor:
    """Names one Busemann point of the Hilbert geometry on a cone.

    Fields: the ambient cone C; a unit boundary ray z; a ConeChain starting
    at the tangent cone of C at z and ending at some member T of its tangent
    family; a point p interior to T; and the basepoint b.  The function it
    names is reverse part (of z) plus Funk part (of T, p).
    """

    def __init__(self, cone: PolyCone, z, chain: ConeChain, p, basepoint):
        self.cone = cone
        self.z = cone.boundary_ray(z)
        tau = open_tangent_cone(cone, self.z)
        if chain.base != tau:
            raise DomainError("chain must start at the tangent cone of C at z")
        self.chain = chain
        self.p = as_point(p, cone.dim)
        if not chain.final.interior_contains(self.p):
            raise DomainError("p is not interior to the chain's final cone")
        self.basepoint = as_point(basepoint, cone.dim)
        if not cone.interior_contains(self.basepoint):
            raise DomainError("basepoint is not interior to the cone")

    @property
    def final(self):
        return self.chain.final

    def to_json(self):
        return {
            "z": self.z.tolist(),
            "chain": self.chain.to_json(),
            "p": self.p.tolist(),
            "basepoint": self.basepoint.tolist(),
        }

    @classmethod
    def from_json(cls, cone: PolyCone, data):
        z = np.asarray(data["z"], dtype=float)
        chain = ConeChain(open_tangent_cone(cone, z), data["chain"])
        return cls(cone, z, chain, data["p"], data["basepoint"])

    def __repr__(self):
        return (f"BusemannDescriptor(z={np.round(self.z, 6).tolist()}, "
                f"chain_len={len(self.chain)}, final_m={self.final.m})")


def busemann_evaluator(d: BusemannDescriptor):
    """Evaluator for the horofunction named by a descriptor."""
    rev = reverse_horofunction(d.cone, d.z, d.basepoint)
    fwd = funk_horofunction(d.final, d.p, d.basepoint)

    def fn(x):
        return rev(x) + fwd(x)

    def fn_many(X):
        return rev.eval_many(X) + fwd.eval_many(X)

    return HorofunctionEvaluator("busemann", d.cone, d.basepoint, fn, fn_many,
                                 {"descriptor": d})


def busemann_eval(d: BusemannDescriptor, x):
    """Value at x of the horofunction named by the descriptor."""
    return busemann_evaluator(d)(x)


def analytic_center(cone: PolyCone):
    """The maximizer of sum_i log(a_i . x) - (m/2)|x|^2 over the open cone.

    Strictly concave with a unique optimum, which lands exactly on the unit
    sphere (multiply the gradient condition by x).  Solved by a damped
    Newton iteration from the max-slack interior point; deterministic, so
    catalogs are reproducible.
    """
    A = cone.normals
    m = cone.m
    if m == 0:
        raise DomainError("analytic center is undefined for the whole space")
    x = cone.interior_point()

    def objective(v):
        s = A @ v
        if np.min(s) <= 0.0:
            return np.inf
        return 0.5 * m * float(v @ v) - float(np.sum(np.log(s)))

    for _ in range(100):
        s = A @ x
        grad = m * x - A.T @ (1.0 / s)
        if np.linalg.norm(grad) < 1e-12:
            break
        H = m * np.eye(cone.dim) + (A.T * (1.0 / s**2)) @ A
        dx = -np.linalg.solve(H, grad)
        f0 = objective(x)
        slope = float(grad @ dx)
        step = 1.0
        while objective(x + step * dx) > f0 + 1e-4 * step * slope:
            step *= 0.5
            if step < 1e-20:
                raise ArithmeticError("analytic-center line search stalled")
        x = x + step * dx
    if abs(np.linalg.norm(x) - 1.0) > 1e-8:
        raise ArithmeticError("analytic center failed its unit-norm certificate")
    return x


class CatalogFamily:
    """Descriptors sharing one boundary face: the face's active normal
    indices, the representative ray z, and one descriptor per tangent-family
    member of the tangent cone at z."""

    def __init__(self, face_active, z, descriptors, p_samples=None):
        self.face_active = frozenset(face_active)
        self.z = z
        self.descriptors = descriptors
        self.p_samples = p_samples or {}
        self.label = "face(" + ",".join(str(i) for i in sorted(self.face_active)) + ")"

    def __len__(self):
        return len(self.descriptors)

    def __repr__(self):
        return f"CatalogFamily({self.label}, members={len(self.descriptors)})"


def busemann_catalog(c: PolyCone, basepoint, p_grid=0, seed=0):
    """All Busemann-point families of a pointed polyhedral cone.

    One family per proper boundary face of c.  The face's ray z is the unit
    barycenter of its extreme rays; the family's members run over the
    tangent family of the tangent cone at z, each with the analytic center
    as its canonical p.  With p_grid > 0, each member also carries that many
    extra interior p samples (seeded), since the full Busemann set is a
    continuum in p and the catalog names its strata.
    """
    if not c.is_solid():
        raise DomainError("catalog requires a solid cone")
    if not c.is_pointed():
        raise DomainError("catalog requires a cone containing no lines")
    b = as_point(basepoint, c.dim)
    if not c.interior_contains(b):
        raise DomainError("basepoint is not interior to the cone")
    gens = cone_generators(c)
    rng = np.random.default_rng(seed)

    families = []
    for active, witness in boundary_active_sets(c):
        rows = c.normals[sorted(active)]
        face_rays = [g for g in gens if np.max(np.abs(rows @ g)) <= 1e-9]
        z = unit(np.mean(face_rays, axis=0)) if face_rays else witness
        if frozenset(c.active_set(z)) != active:
            z = witness  # barycenter drifted onto a smaller face; use the LP point
        tau = open_tangent_cone(c, z)
        descriptors = []
        p_samples = {}
        for idx, member in enumerate(tangent_cone_family(tau)):
            p = analytic_center(member.cone)
            descriptors.append(BusemannDescriptor(c, z, member.chain, p, b))
            if p_grid:
                p_samples[idx] = _sample_interior(member.cone, p_grid, rng)
        families.append(CatalogFamily(active, z, descriptors, p_samples))
    families.sort(key=lambda fam: (len(fam.face_active), tuple(sorted(fam.face_active))))
    return families


def _sample_interior(cone, count, rng):
    """Seeded rejection sampling of unit interior points of a solid cone."""
    out = []
    guard = 0
    while len(out) < count:
        v = unit(rng.normal(size=cone.dim))
        if cone.interior_contains(v, margin=1e-6):
            out.append(v)
        guard += 1
        if guard > 10000 * count:
            raise ArithmeticError("interior sampling stalled; cone too thin")
    return np.array(out)


def extend_homogeneous(h: HorofunctionEvaluator, x, check_points=None):
    """Extend h from its cone T to the tangent cone of T at boundary point x.

    Requires the scaling law h((1-lam) x + lam y) = log lam + h(y) along
    x-directions, which is spot-checked on sample points to 1e-8 before the
    evaluator is built.  The extension picks, for each query y, a lambda
    small enough that (1-lambda) x + lambda y falls in T, and returns
    -log lambda + h there; a second evaluation at lambda/2 certifies the
    choice does not matter (to 1e-10).
    """
    T = h.cone
    x = T.boundary_ray(x)
    if check_points is None:
        center = analytic_center(T)
        check_points = [center]
        if T.interior_contains(h.basepoint):
            check_points.append(h.basepoint)
    for y in check_points:
        y = as_point(y, T.dim)
        for lam in (0.5, 0.25):
            lhs = h((1.0 - lam) * x + lam * y)
            rhs = math.log(lam) + h(y)
            if abs(lhs - rhs) > 1e-8:
                raise DomainError(
                    f"homogeneity precondition fails along x (residual {abs(lhs - rhs):.2e})")

    target = open_tangent_cone(T, x)

    def admissible(y):
        lam = 1.0
        for _ in range(200):
            if T.interior_contains((1.0 - lam) * x + lam * y, margin=0.0):
                return lam
            lam *= 0.5
        raise DomainError("no admissible scaling found; y may be outside the tangent cone")

    def fn(y):
        lam = admissible(y)
        v = -math.log(lam) + h((1.0 - lam) * x + lam * y)
        # well-definedness: halving the admissible scaling must not move the value
        half = lam / 2.0
        v2 = -math.log(half) + h((1.0 - half) * x + half * y)
        if abs(v - v2) > 1e-10:
            raise ArithmeticError("extension value depends on the scaling choice")
        return v

    return HorofunctionEvaluator("extension", target, h.basepoint, fn, None,
                                 {"x": x, "parent": h})


class ZSet:
    """The conjugacy polytope of (t, x, b): the dual cone of t sliced by
    M(b/x) <z, x> <= 1.  For solid t the slice is bounded with vertex set
    {0} union {a_i / (M(b/x) (a_i . x))}."""

    def __init__(self, cone, x, basepoint, gauge, vertices):
        self.cone = cone
        self.x = x
        self.basepoint = basepoint
        self.gauge = gauge
        self.vertices = vertices

    def __repr__(self):
        return f"ZSet({len(self.vertices)} vertices, gauge={self.gauge:.6g})"


def z_set(t: PolyCone, x, b):
    """Slice of the dual cone conjugate to the Funk-side function of x."""
    x = as_point(x, t.dim)
    b = as_point(b, t.dim)
    if not t.is_solid():
        raise DomainError("conjugacy slice needs a solid cone")
    gauge = m_ratio(t, b, x)  # raises if x is not interior (unbounded slice)
    if gauge <= 0.0:
        raise DomainError("basepoint has nonpositive gauge against x")
    ax = t.normals @ x
    vertices = np.vstack([np.zeros(t.dim), t.normals / (gauge * ax)[:, None]])
    if np.max(vertices @ b) > 1.0 + 1e-9:
        raise ArithmeticError("conjugacy slice escaped the basepoint cap")
    return ZSet(t, x, b, gauge, vertices)


def conjugate_check(t: PolyCone, x, b, probes):
    """Max deviation of exp(Funk-side value) from the support function of
    the conjugacy slice over the probe points; the two agree exactly in
    theory, so the return should sit at rounding level (contract 1e-8)."""
    probes = np.asarray(probes, dtype=float)
    zs = z_set(t, x, b)
    lhs = m_ratio_many(t, probes, as_point(x, t.dim)) / zs.gauge
    rhs = np.maximum((probes @ zs.vertices.T).max(axis=1), 0.0)
    return float(np.max(np.abs(lhs - rhs)))


def lambda_map(q):
    """(x, y) -> (x/y, 1/y - 1) for y in (0, 1]: unrolls the unit slice."""
    q = np.asarray(q, dtype=float)
    y = q[-1]
    if not (0.0 < y <= 1.0 + 1e-12):
        raise DomainError("last coordinate must lie in (0, 1]")
    return np.append(q[:-1] / y, 1.0 / y - 1.0)


def lambda_inv(q):
    """(x, y) -> (x/(1+y), 1/(1+y)) for y >= 0: inverse of lambda_map."""
    q = np.asarray(q, dtype=float)
    y = q[-1]
    if y < -1e-12:
        raise DomainError("last coordinate must be nonnegative")
    return np.append(q[:-1] / (1.0 + y), 1.0 / (1.0 + y))
