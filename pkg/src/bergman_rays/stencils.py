"""Wide-stencil second differences on uniform grids.

A second difference along an integer lattice direction v,
F(p + v) - 2 F(p) + F(p - v), is non-negative for every convex F.  Minimizing
the normalized version over a set of directions therefore gives a convexity
test with no false alarms, and products over orthogonal pairs of directions
give a Monge-Ampere discretization that is exact for potentials that are
affine along one of the stencil directions.
"""
import itertools

import numpy as np

DIRECTIONS_2D = ((1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1))
FRAMES_2D = (((1, 0), (0, 1)), ((1, 1), (1, -1)), ((1, 2), (2, -1)), ((2, 1), (1, -2)))


def directions(dim):
    if dim == 2:
        return DIRECTIONS_2D
    out = []
    for v in itertools.product((-1, 0, 1), repeat=dim):
        if any(v) and next(c for c in v if c) > 0:
            out.append(v)
    return tuple(out)


def stencil_margin(dim):
    return max(max(abs(c) for c in v) for v in directions(dim))


def interior_slices(shape, margin):
    return tuple(slice(margin, s - margin) for s in shape)


def second_difference(values, v, margin):
    """F(p+v) - 2F(p) + F(p-v) on the interior (nodes at least ``margin`` from the edge)."""
    shape = values.shape
    centre = interior_slices(shape, margin)

    def shifted(sign):
        return tuple(slice(margin + sign * c, s - margin + sign * c) for c, s in zip(v, shape))

    return values[shifted(1)] - 2.0 * values[centre] + values[shifted(-1)]


def directional_curvatures(values, spacings, margin=None):
    """Physical second derivatives along each stencil direction, stacked on axis 0."""
    dim = values.ndim
    margin = stencil_margin(dim) if margin is None else margin
    out = []
    for v in directions(dim):
        length2 = sum((c * h) ** 2 for c, h in zip(v, spacings))
        out.append(second_difference(values, v, margin) / length2)
    return np.stack(out)


def min_curvature(values, spacings):
    """Smallest directional second derivative at each interior node.

    This is the discrete stand-in for the minimum Hessian eigenvalue: it is
    >= 0 (up to rounding) exactly when F is convex along all stencil lines.
    """
    return directional_curvatures(values, spacings).min(axis=0)
