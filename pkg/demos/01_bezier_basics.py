"""
Bezier curves and their control points
======================================

A route mean is a degree-5 Bezier curve. Fitting one to tracked points
is an ordinary least-squares problem in the Bernstein basis.
"""

import numpy as np

from routemix.bernstein import design_matrix, evaluate_bezier, fit_points

# the basis values at any t are non-negative and sum to one
t = np.linspace(0, 1, 7)
T = design_matrix(t, 5)
print("basis rows sum to", T.sum(axis=1))

# a curl-like shape: ten yards upfield, then back toward the ball
theta = np.array([[0, 0], [5, 0], [10, 0], [13, 0.5], [11, 1.5], [9, 2.0]])
print("curve at t=0.5:", evaluate_bezier(theta, 0.5))

# sample it irregularly, add a little noise, and recover the control points
rng = np.random.default_rng(0)
times = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, 38)), [1.0]])
points = evaluate_bezier(theta, times) + rng.normal(0, 0.1, (40, 2))
estimate = fit_points(times, points, 5)
# control points wander more than the curve they define
dense = np.linspace(0, 1, 200)
gap = np.abs(evaluate_bezier(estimate, dense) - evaluate_bezier(theta, dense)).max()
print("largest control-point error (yd):", np.abs(estimate - theta).max().round(3))
print("largest curve error (yd):", gap.round(3))
