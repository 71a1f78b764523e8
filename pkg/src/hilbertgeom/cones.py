"""Polyhedral cones in canonical facet-normal form, with duality and the
iterated tangent-cone family.

A cone is stored through its facet normals: the closed cone is
{x : a_i . x >= 0 for all i} and the open cone is its interior (empty normal
list means the whole space).  Normals are canonicalized -- unit length,
deduplicated, redundant rows dropped by linear programming, sorted -- so two
equal cones have identical normal arrays.  That makes the tangent-cone family
a plain set computation: every tangent cone of a polyhedral cone is the cone
of an *active subset* of its normals, and iterating the tangent-cone map only
ever selects further subsets.

Duality uses the representation swap: the dual cone's facet normals are this
cone's generators (extreme rays plus a +/- basis of the lineality space), and
conversely.  Applying the swap twice recovers the canonical original, which
the test suite checks as an involution.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from ._common import (
    EPS_GEO,
    DomainError,
    UnsupportedBodyError,
    as_point,
    canon_key,
    unit,
)

# LP-based decisions (redundancy, achievability, solidity) use a coarser
# threshold than EPS_GEO: HiGHS reports optima to ~1e-9 and the quantities
# compared are O(1) for unit normals.
LP_TOL = 1e-7
MAX_FAMILY_NORMALS = 12


def _solve_lp(c, A_ub=None, b_ub=None, bounds=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise DomainError(f"cone LP did not solve (status {res.status}): {res.message}")
    return res


def _is_redundant(a, others):
    """True iff a.x >= 0 holds on the cone cut out by the other normals."""
    if len(others) == 0:
        return False
    res = _solve_lp(a, A_ub=-np.asarray(others), b_ub=np.zeros(len(others)),
                    bounds=[(-1.0, 1.0)] * len(a))
    return res.fun >= -1e-9


class PolyCone:
    """Polyhedral cone {x : a_i . x >= 0}, canonicalized at construction.

    Parameters
    ----------
    dim : int
        Ambient dimension.
    normals : array-like of shape (m, dim), optional
        Facet normals; rows are unit-normalized, deduplicated, stripped of
        redundant inequalities, and sorted.  Omitted or empty means the
        whole space.

    Notes
    -----
    Construction never requires the cone to be solid; operations that do
    (interior points, tangent families) check lazily and raise
    ``DomainError``.  Instances are immutable and hash by the canonical
    normal array, so they can key sets and dicts.
    """

    kind = "cone"

    def __init__(self, dim, normals=None):
        self.dim = int(dim)
        rows = []
        seen = set()
        if normals is not None:
            arr = np.asarray(normals, dtype=float)
            if arr.size == 0:
                arr = arr.reshape(0, self.dim)
            if arr.ndim != 2 or arr.shape[1] != self.dim:
                raise DomainError("normals must have shape (m, dim)")
            for row in arr:
                u = unit(row)
                k = canon_key(u)
                if k not in seen:
                    seen.add(k)
                    rows.append(u)
        # drop redundant inequalities, re-testing against the surviving set
        i = 0
        while i < len(rows):
            if _is_redundant(rows[i], rows[:i] + rows[i + 1 :]):
                del rows[i]
            else:
                i += 1
        rows.sort(key=canon_key)
        self.normals = np.array(rows) if rows else np.zeros((0, self.dim))
        self._key = (self.dim, tuple(canon_key(r) for r in self.normals))
        self._lineality = None
        self._interior = None

    @property
    def m(self):
        return len(self.normals)

    def key(self):
        """Canonical signature; equal cones have equal keys."""
        return self._key

    def __eq__(self, other):
        return isinstance(other, PolyCone) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"PolyCone(dim={self.dim}, m={self.m})"

    # -- membership ---------------------------------------------------------

    def contains(self, x, margin=None):
        """Closed-cone membership, tolerance-scaled to |x|."""
        x = as_point(x, self.dim)
        if self.m == 0:
            return True
        tol = (EPS_GEO if margin is None else margin) * max(1.0, float(np.linalg.norm(x)))
        return bool(np.min(self.normals @ x) >= -tol)

    def interior_contains(self, x, margin=EPS_GEO):
        """Open-cone membership; pass margin=0.0 for bare strict positivity."""
        x = as_point(x, self.dim)
        if self.m == 0:
            return True
        tol = margin * max(1.0, float(np.linalg.norm(x)))
        return bool(np.min(self.normals @ x) > tol)

    def active_set(self, x, tol=EPS_GEO):
        """Indices of normals vanishing at x (|a_i . x| <= tol, |x|-scaled)."""
        x = as_point(x, self.dim)
        s = self.normals @ x
        bound = tol * max(1.0, float(np.linalg.norm(x)))
        return tuple(int(i) for i in np.flatnonzero(np.abs(s) <= bound))

    def boundary_ray(self, x):
        """Validate x as a boundary point and return it unit-normalized."""
        x = unit(as_point(x, self.dim))
        if self.m == 0:
            raise DomainError("the whole space has no boundary rays")
        s = self.normals @ x
        if np.min(s) < -EPS_GEO:
            raise DomainError("point is outside the closed cone")
        if np.min(np.abs(s)) > EPS_GEO:
            raise DomainError("point is interior to the cone (no active normal)")
        return x

    # -- structure ----------------------------------------------------------

    def lineality(self):
        """Orthonormal basis (rows) of the common kernel of the normals."""
        if self._lineality is None:
            if self.m == 0:
                self._lineality = np.eye(self.dim)
            else:
                ns = null_space(self.normals)
                self._lineality = ns.T if ns.size else np.zeros((0, self.dim))
        return self._lineality

    def is_pointed(self):
        return self.lineality().shape[0] == 0

    def _solve_interior(self):
        if self._interior is None:
            if self.m == 0:
                self._interior = (np.zeros(self.dim), 1.0)
            else:
                # maximize the minimum slack s over the unit box
                c = np.zeros(self.dim + 1)
                c[-1] = -1.0
                A_ub = np.hstack([-self.normals, np.ones((self.m, 1))])
                res = _solve_lp(c, A_ub=A_ub, b_ub=np.zeros(self.m),
                                bounds=[(-1.0, 1.0)] * self.dim + [(0.0, 1.0)])
                self._interior = (res.x[:-1].copy(), float(res.x[-1]))
        return self._interior

    def is_solid(self):
        return self._solve_interior()[1] > LP_TOL

    def interior_point(self):
        x, slack = self._solve_interior()
        if slack <= LP_TOL:
            raise DomainError("cone is not solid (no interior point)")
        return x.copy()


def lineality(c: PolyCone):
    """Basis of the lineality space {x : x and -x both in the closed cone}."""
    return c.lineality()


def lift_polytope_to_cone(body):
    """Cone over a polytope placed at height 1.

    Each facet a.x <= b homogenizes to the cone inequality (-a, b).(x, s) >= 0;
    for a bounded polytope these rows already force s >= 0, so the cone over
    {(v, 1)} needs no extra normal.  The cross-section at last coordinate 1
    recovers the polytope.
    """
    A, b = body.A, body.b
    normals = np.hstack([-A, b[:, None]])
    cone = PolyCone(body.dim + 1, normals)
    if not cone.is_solid():
        raise DomainError("degenerate polytope: lifted cone is not solid")
    return cone


def open_tangent_cone(c: PolyCone, x):
    """Tangent cone of c at a boundary point: the cone of active normals."""
    x = c.boundary_ray(x)
    active = c.active_set(x)
    return PolyCone(c.dim, c.normals[list(active)])


def body_tangent_cone(body, x, fd_step=1e-7):
    """Single-step tangent cone of a convex body at a boundary point x.

    Directions u with g'(x).u < 0 for every active constraint g; returned as
    the PolyCone with normals -grad g_i(x).  Gradients of black-box
    constraints are central finite differences.  No family iteration is
    attempted for non-polyhedral bodies.
    """
    x = as_point(x, body.dim)
    grads = []
    for name, value in body.violations(x):
        if abs(value) > EPS_GEO * 10:
            continue
        if name.startswith("facet") or name.startswith("halfspace"):
            idx = int(name.split()[1])
            grads.append(body.A[idx])
        elif name.startswith("quadratic"):
            idx = int(name.split()[1])
            Q, cvec, _ = body.quadratics[idx]
            grads.append(2.0 * Q @ x + cvec)
        elif name == "sphere":
            grads.append(unit(x - body.center))
        else:
            g = dict(zip(body.blackbox_names, body.blackbox))[name]
            grad = np.zeros(body.dim)
            for j in range(body.dim):
                e = np.zeros(body.dim)
                e[j] = fd_step
                grad[j] = (g(x + e) - g(x - e)) / (2.0 * fd_step)
            grads.append(grad)
    if not grads:
        raise DomainError("point is not on the boundary (no active constraint)")
    return PolyCone(body.dim, -np.array(grads))


# ---------------------------------------------------------------------------
# duality


def cone_generators(c: PolyCone):
    """Generators of the closed cone: extreme rays plus +/- lineality basis.

    Extreme rays are found by brute force over (d'-1)-subsets of the normals
    expressed in lineality-quotient coordinates (d' = dim minus lineality
    dimension): a subset whose kernel is a line yields a candidate ray, kept
    when it is feasible and its active normals have rank d'-1.

    Returns an array of shape (g, dim); empty when the cone is {0}.
    """
    L = c.lineality()
    k = L.shape[0]
    gens = [row.copy() for row in L] + [-row.copy() for row in L]
    d_eff = c.dim - k
    if d_eff == 0:
        return np.array(gens) if gens else np.zeros((0, c.dim))

    Q = null_space(L) if k else np.eye(c.dim)  # columns span the quotient
    Ap = c.normals @ Q  # (m, d_eff); full column-relevant since kernel removed
    rays = {}
    for S in itertools.combinations(range(c.m), d_eff - 1):
        if S:
            K = null_space(Ap[list(S)])
            if K.shape[1] != 1:
                continue
            v = K[:, 0]
        else:
            v = np.ones(1)
        for cand in (v, -v):
            slack = Ap @ cand
            if np.min(slack) < -1e-9:
                continue
            active = np.abs(slack) <= 1e-9
            rank = np.linalg.matrix_rank(Ap[active]) if active.any() else 0
            if rank != d_eff - 1:
                continue
            g = unit(Q @ cand)
            rays.setdefault(canon_key(g), g)
    gens.extend(rays.values())
    return np.array(gens) if gens else np.zeros((0, c.dim))


def dual_cone(c: PolyCone):
    """Dual cone {y : y.x >= 0 on c}, via the normals/generators swap."""
    return PolyCone(c.dim, cone_generators(c))


# ---------------------------------------------------------------------------
# tangent-cone family


class ConeChain:
    """A cone with a sequence of boundary points, each step taking the
    tangent cone of its predecessor.

    ``cones[0]`` is the base; ``cones[i+1] = open_tangent_cone(cones[i],
    steps[i])``.  Step points are validated and unit-normalized.
    """

    def __init__(self, base: PolyCone, steps=()):
        self.base = base
        cones = [base]
        pts = []
        for x in steps:
            x = cones[-1].boundary_ray(x)
            pts.append(x)
            cones.append(open_tangent_cone(cones[-1], x))
        self.steps = pts
        self.cones = cones

    @property
    def final(self):
        return self.cones[-1]

    def __len__(self):
        return len(self.cones)

    def to_json(self):
        return [p.tolist() for p in self.steps]

    def __repr__(self):
        return f"ConeChain({len(self.steps)} steps from {self.base!r})"


class TangentFamilyMember:
    """One cone of the family, with its provenance.

    Attributes
    ----------
    cone : PolyCone
    active : frozenset of int
        Indices into the base cone's canonical normals whose rows make up
        this member (the full index set for the base itself).
    witness : ndarray or None
        A unit boundary point of the parent cone realizing the step, None
        for the base.
    chain : ConeChain
        Boundary-point path from the base down to this member.
    """

    def __init__(self, cone, active, witness, chain):
        self.cone = cone
        self.active = frozenset(active)
        self.witness = witness
        self.chain = chain

    def __repr__(self):
        return f"TangentFamilyMember(active={sorted(self.active)}, m={self.cone.m})"


def boundary_active_sets(c: PolyCone):
    """Achievable exact active sets of c, with witnesses.

    A nonempty index set A is achievable when some nonzero x has a_i.x = 0
    exactly for i in A and a_j.x > 0 strictly otherwise.  Feasibility is
    decided in the kernel coordinates of the A-rows by maximizing the
    minimum strict margin (an LP).  Returns [(frozenset, unit witness)] in
    deterministic (size, lexicographic) order.
    """
    m = c.m
    if m == 0:
        return []
    if m > MAX_FAMILY_NORMALS:
        raise UnsupportedBodyError(
            f"active-set enumeration supports at most {MAX_FAMILY_NORMALS} normals, got {m}")
    out = []
    for size in range(1, m + 1):
        for A in itertools.combinations(range(m), size):
            K = null_space(c.normals[list(A)])
            if K.shape[1] == 0:
                continue
            rest = [j for j in range(m) if j not in A]
            if not rest:
                witness = unit(K[:, 0])
                out.append((frozenset(A), witness))
                continue
            G = c.normals[rest] @ K  # (r, k)
            r, kdim = G.shape
            # maximize s subject to G y >= s, |y| box-bounded
            cvec = np.zeros(kdim + 1)
            cvec[-1] = -1.0
            A_ub = np.hstack([-G, np.ones((r, 1))])
            res = _solve_lp(cvec, A_ub=A_ub, b_ub=np.zeros(r),
                            bounds=[(-1.0, 1.0)] * kdim + [(0.0, 1.0)])
            if res.x[-1] > LP_TOL:
                witness = unit(K @ res.x[:-1])
                out.append((frozenset(A), witness))
    return out


def tangent_cone_family(c: PolyCone):
    """Closure of {c} under taking open tangent cones at boundary points.

    Breadth-first search over achievable active subsets, deduplicated by
    canonical normal signature.  The base cone is a member by definition.
    Each polyhedral tangent cone is the cone of a subset of the base
    normals, so membership records carry that subset (``active``) along with
    a witness point and a ConeChain.
    """
    if not c.is_solid():
        raise DomainError("tangent-cone family requires a solid cone")
    index_of = {canon_key(row): i for i, row in enumerate(c.normals)}

    def base_indices(cone):
        return frozenset(index_of[canon_key(row)] for row in cone.normals)

    seed = TangentFamilyMember(c, range(c.m), None, ConeChain(c, []))
    members = {c.key(): seed}
    queue = [seed]
    while queue:
        cur = queue.pop(0)
        for _, witness in boundary_active_sets(cur.cone):
            tau = open_tangent_cone(cur.cone, witness)
            if tau.key() in members:
                continue
            member = TangentFamilyMember(
                tau, base_indices(tau), witness,
                ConeChain(c, list(cur.chain.steps) + [witness]))
            members[tau.key()] = member
            queue.append(member)
    return list(members.values())
