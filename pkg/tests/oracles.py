"""Slow, direct reference computations used to check the fast paths."""

import itertools

import mpmath
import numpy as np

from routemix.bernstein import design_matrix


def naive_memberships(curves, thetas, sigma2s, alphas, dps=50):
    """Posterior memberships as a plain product of Gaussian densities.

    No log-space tricks: densities are multiplied out in ``dps``-digit
    arithmetic, then normalized. Returns ``(pi, log_likelihood)`` as floats.
    """
    with mpmath.workdps(dps):
        K = len(alphas)
        pi = np.empty((len(curves), K))
        total = mpmath.mpf(0)
        for i, c in enumerate(curves):
            T = design_matrix(c.times, thetas[0].shape[0] - 1)
            joint = []
            for k in range(K):
                mu = T @ thetas[k]
                dens = mpmath.mpf(alphas[k])
                for j in range(len(c.times)):
                    for d in range(2):
                        s2 = mpmath.mpf(sigma2s[k][d])
                        r = mpmath.mpf(c.points[j, d]) - mpmath.mpf(mu[j, d])
                        dens *= mpmath.exp(-r * r / (2 * s2)) / mpmath.sqrt(2 * mpmath.pi * s2)
                joint.append(dens)
            z = mpmath.fsum(joint)
            pi[i] = [float(v / z) for v in joint]
            total += mpmath.log(z)
        return pi, float(total)


def dense_weighted_solve(curves, memberships, degree):
    """Control points per cluster from explicitly assembled W_k, T and Y."""
    T = np.vstack([design_matrix(c.times, degree) for c in curves])
    Y = np.vstack([c.points for c in curves])
    out = []
    for k in range(memberships.shape[1]):
        w = np.concatenate([np.full(len(c.times), memberships[i, k])
                            for i, c in enumerate(curves)])
        W = np.diag(w)
        out.append(np.linalg.solve(T.T @ W @ T, T.T @ W @ Y))
    return np.array(out)


def best_two_partition(points):
    """Minimum within-cluster sum of squares over every split into two nonempty groups."""
    n = len(points)
    best, best_sse = None, np.inf
    for mask in itertools.product([0, 1], repeat=n - 1):
        labels = np.array((0,) + mask)
        if labels.min() == labels.max():
            continue
        sse = sum(np.sum((points[labels == g] - points[labels == g].mean(axis=0)) ** 2)
                  for g in (0, 1))
        if sse < best_sse:
            best, best_sse = labels, sse
    return best


def brute_force_ari(truth, predicted):
    """ARI from an explicit loop over all unordered pairs."""
    n = len(truth)
    a = b = c = d = 0  # same/same, same/diff, diff/same, diff/diff
    for i in range(n):
        for j in range(i + 1, n):
            st, sp = truth[i] == truth[j], predicted[i] == predicted[j]
            a += st and sp
            b += st and not sp
            c += sp and not st
            d += not st and not sp
    pairs = a + b + c + d
    expected = (a + b) * (a + c) / pairs
    maximum = ((a + b) + (a + c)) / 2
    if maximum == expected:
        return 1.0
    return (a - expected) / (maximum - expected)
