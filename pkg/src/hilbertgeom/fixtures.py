"""The named example bodies shared by the tests, the verifier, and the CLI.

All six fixtures contain the origin well inside, and all use it as their
basepoint:

* ``disk``     — unit disk in the plane;
* ``square``   — [-1, 1]^2;
* ``triangle`` — equilateral triangle with circumradius 1;
* ``cube``     — [-1, 1]^3;
* ``example2`` — 3-d intersection of a vertical cylinder with four tilted
  half-spaces; its polar hull (four corner points plus the equator circle)
  has a non-closed face family;
* ``example4d`` — 4-d body polar to the hull of four unit circles (two
  horizontal caps, two axis circles); the higher-dimensional non-closedness
  counterexample.

The two counterexample fixtures carry exact ``PolarHull`` support models on
``body.polar_hull`` for the witness machinery in :mod:`.polar`.
"""

from __future__ import annotations

import math

import numpy as np

from ._common import DomainError
from .bodies import Ball, IntersectionBody, Polytope
from .polar import CircleFamily, PolarHull

FIXTURE_NAMES = ("disk", "square", "triangle", "cube", "example2", "example4d")


def disk():
    body = Ball([0.0, 0.0], 1.0)
    body.fixture_name = "disk"
    return body


def square():
    body = Polytope([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    body.fixture_name = "square"
    return body


def triangle():
    s = math.sqrt(3.0) / 2.0
    body = Polytope([[0.0, 1.0], [-s, -0.5], [s, -0.5]])
    body.fixture_name = "triangle"
    return body


def cube():
    corners = [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
    body = Polytope(corners)
    body.fixture_name = "cube"
    return body


def example2():
    """Cylinder x^2 + y^2 <= 1 cut by the four planes +-x +- z <= 1.

    Polar to the hull of the corner points (+-1, 0, +-1) and the equator
    circle {(cos t, sin t, 0)}.  Smooth and flat boundary pieces meet along
    curves, which is what breaks the closedness of the polar face family.
    """
    A = np.array([
        [1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0],
        [-1.0, 0.0, 1.0],
        [-1.0, 0.0, -1.0],
    ])
    b = np.ones(4)
    quadratic = (np.diag([1.0, 1.0, 0.0]), np.zeros(3), 1.0)
    body = IntersectionBody(
        halfspaces=(A, b),
        quadratics=[quadratic],
        bbox=(-np.ones(3), np.ones(3)),
        interior_point=np.zeros(3),
    )
    body.fixture_name = "example2"
    body.polar_hull = PolarHull(
        points=np.array([
            [1.0, 0.0, 1.0],
            [1.0, 0.0, -1.0],
            [-1.0, 0.0, 1.0],
            [-1.0, 0.0, -1.0],
        ]),
        circles=[CircleFamily([0.0, 0.0, 0.0],
                              [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], "equator")],
        name="example2-polar",
    )
    return body


def example4d():
    """4-d body polar to the hull of four unit circles.

    The generating circles are the two caps {(cos t, sin t, +-1, 0)} and the
    two axis circles {(+-1, 0, cos t, sin t)}; membership in the polar is
    the four support inequalities below, supplied as black-box constraints
    (their boundary is neither polyhedral nor quadratic).
    """

    def cap_plus(x):
        x = np.asarray(x, dtype=float)
        return np.hypot(x[..., 0], x[..., 1]) + x[..., 2] - 1.0

    def cap_minus(x):
        x = np.asarray(x, dtype=float)
        return np.hypot(x[..., 0], x[..., 1]) - x[..., 2] - 1.0

    def side_plus(x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] + np.hypot(x[..., 2], x[..., 3]) - 1.0

    def side_minus(x):
        x = np.asarray(x, dtype=float)
        return -x[..., 0] + np.hypot(x[..., 2], x[..., 3]) - 1.0

    body = IntersectionBody(
        blackbox=[cap_plus, cap_minus, side_plus, side_minus],
        blackbox_names=["cap+", "cap-", "side+", "side-"],
        bbox=(-np.ones(4), np.ones(4)),
        interior_point=np.zeros(4),
    )
    body.fixture_name = "example4d"
    e0, e1, e2, e3 = np.eye(4)
    body.polar_hull = PolarHull(
        points=None,
        circles=[
            CircleFamily(e2, e0, e1, "cap+"),
            CircleFamily(-e2, e0, e1, "cap-"),
            CircleFamily(e0, e2, e3, "side+"),
            CircleFamily(-e0, e2, e3, "side-"),
        ],
        name="example4d-polar",
    )
    return body


_BUILDERS = {
    "disk": disk,
    "square": square,
    "triangle": triangle,
    "cube": cube,
    "example2": example2,
    "example4d": example4d,
}


def make_fixture(name):
    """Fresh instance of a named fixture, with its basepoint attached."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise DomainError(
            f"unknown fixture {name!r}; choose from {', '.join(FIXTURE_NAMES)}") from None
    body = builder()
    body.basepoint = np.zeros(body.dim)
    return body


def all_fixtures():
    return [make_fixture(name) for name in FIXTURE_NAMES]
