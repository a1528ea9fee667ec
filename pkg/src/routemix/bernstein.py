"""Bernstein basis polynomials and Bezier curves.

A degree ``P`` Bezier curve is a weighted sum of the ``P + 1`` Bernstein
polynomials, the weights being the control points. Control points are held
as plain ``(P + 1, 2)`` float arrays, row ``p`` being the ``p``-th control
point in (downfield, lateral) yards.
"""

import numpy as np

from .errors import DomainError, SingularSystemError, UnderdeterminedFitError

DEFAULT_DEGREE = 5


def binomial(n, k):
    """Binomial coefficient as a float, via the multiplicative recurrence.

    Every partial product is itself an integer, so the result is exact as
    long as it stays below 2**53 (true for ``n <= 50``).
    """
    if k < 0 or k > n:
        return 0.0
    k = min(k, n - k)
    c = 1.0
    for i in range(k):
        c = c * (n - i) / (i + 1)
    return c


def _check_degree(degree):
    if int(degree) != degree or degree < 0:
        raise DomainError(f"degree must be a non-negative integer, got {degree!r}")
    return int(degree)


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any((t < 0.0) | (t > 1.0)):
        raise DomainError("times must lie in [0, 1]")
    return t


def basis(p, degree, t):
    """Value of the ``p``-th Bernstein polynomial of the given degree at ``t``."""
    degree = _check_degree(degree)
    if int(p) != p or not 0 <= p <= degree:
        raise DomainError(f"basis index {p!r} outside [0, {degree}]")
    t = float(_check_times(t))
    return binomial(degree, p) * t**p * (1.0 - t) ** (degree - p)


def design_matrix(times, degree):
    """Regression matrix of Bernstein values, shape ``(m, degree + 1)``.

    Entry ``(j, p)`` is the ``p``-th basis polynomial evaluated at ``times[j]``.
    Each row sums to one.
    """
    degree = _check_degree(degree)
    t = _check_times(times)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("times must be a non-empty 1-D sequence")
    p = np.arange(degree + 1)
    coef = np.array([binomial(degree, k) for k in p])
    # numpy defines 0.0**0 == 1, which gives the endpoint rows exactly
    return coef * t[:, None] ** p * (1.0 - t[:, None]) ** (degree - p)


def as_control_points(theta):
    """Validate and return control points as a ``(P + 1, 2)`` float array."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[1] != 2 or theta.shape[0] < 1:
        raise DomainError(f"control points must have shape (P+1, 2), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise DomainError("control points must be finite")
    return theta


def evaluate_bezier(theta, t):
    """Point(s) on the Bezier curve with control points ``theta``.

    A scalar ``t`` returns a length-2 array; an array of times returns an
    ``(m, 2)`` array.
    """
    theta = as_control_points(theta)
    degree = theta.shape[0] - 1
    if np.ndim(t) == 0:
        return (design_matrix([t], degree) @ theta)[0]
    return design_matrix(t, degree) @ theta


def fit_points(times, points, degree):
    """Ordinary least-squares control points for samples ``points`` at ``times``.

    Solved with an SVD-based least-squares routine rather than by forming the
    normal equations.
    """
    degree = _check_degree(degree)
    points = np.asarray(points, dtype=float)
    T = design_matrix(times, degree)
    if points.shape != (T.shape[0], 2):
        raise DomainError(f"points shape {points.shape} does not match {T.shape[0]} times")
    if T.shape[0] < degree + 1:
        raise UnderdeterminedFitError(
            f"{T.shape[0]} points cannot determine {degree + 1} control points"
        )
    theta, _, rank, _ = np.linalg.lstsq(T, points, rcond=None)
    if rank < degree + 1:
        raise SingularSystemError(
            f"design matrix has rank {rank} < {degree + 1} (repeated times?)"
        )
    return theta


def fit_control_points(curve, degree=DEFAULT_DEGREE):
    """Least-squares Bezier fit of a single normalized curve."""
    return fit_points(curve.times, curve.points, degree)
