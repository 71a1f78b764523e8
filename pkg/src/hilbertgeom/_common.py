"""Shared tolerances, error types, and small numeric helpers.

Every geometric predicate in the package goes through the single tolerance
EPS_GEO; metric formulas clamp denominators at GAP_CLAMP before taking logs so
that boundary-degenerate inputs produce -inf/+inf instead of exceptions.
Extended-real arithmetic is plain IEEE-754: log(0) is -inf, inf - finite is
inf, and comparisons follow the usual float ordering.
"""

from __future__ import annotations

import math

import numpy as np

# Single geometry tolerance used by interiority, boundary and activity tests.
EPS_GEO = 1e-10

# Clamp for the cross-ratio gap t* - |x - y| before dividing.
GAP_CLAMP = 1e-300

# Relative width target for black-box bisection in ray_exit.
BISECT_RTOL = 1e-12

# Canonical rounding used when hashing normals / rays for deduplication.
CANON_DECIMALS = 9


class DomainError(ValueError):
    """An input violates a documented precondition (CLI exit code 2)."""


class UnsupportedBodyError(ValueError):
    """The requested computation is not available for this body (exit 3)."""


def xlog(v: float) -> float:
    """log on [0, inf]: xlog(0) = -inf, xlog(inf) = inf."""
    if v == 0.0:
        return -math.inf
    if v == math.inf:
        return math.inf
    return math.log(v)


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n <= EPS_GEO:
        raise DomainError("zero-length vector where a direction was expected")
    return v / n


def as_point(x, dim=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"expected a point (1-d array), got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DomainError(f"expected a point in R^{dim}, got dimension {x.shape[0]}")
    return x


def canon_key(row) -> tuple:
    """Hashable key for a vector, stable under tiny numeric noise."""
    r = np.round(np.asarray(row, dtype=float), CANON_DECIMALS)
    # fold -0.0 into 0.0 so keys are stable
    r = r + 0.0
    return tuple(r.tolist())
