"""Random tiny mixture problems for oracle comparisons."""

import numpy as np

from routemix.ingest import NormalizedCurve
from routemix.mixture import ClusterComponent, ClusterModel


def random_curve(rng, m, scale=5.0, name="0"):
    t = np.concatenate([[0.0], np.sort(rng.uniform(0.01, 0.99, m - 2)), [1.0]])
    pts = rng.normal(0.0, scale, (m, 2))
    pts[0] = 0.0
    return NormalizedCurve("g", name, "1", "WR", pts, t)


def tiny_instance(seed):
    """n <= 5 curves of m <= 6 points, K <= 3 components, degree <= 3.

    Returns ``(curves, model, memberships)``; memberships are strictly
    positive and well above the collapse threshold.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    K = int(rng.integers(1, 4))
    curves = [random_curve(rng, int(rng.integers(3, 7)), name=str(i)) for i in range(n)]
    total = sum(len(c) for c in curves)
    degree = int(rng.integers(1, min(3, total - 1) + 1))
    comps = [ClusterComponent(rng.normal(0, 5, (degree + 1, 2)),
                              rng.uniform(0.5, 20.0, 2), 1.0) for _ in range(K)]
    alphas = rng.dirichlet(np.full(K, 2.0))
    for c, a in zip(comps, alphas):
        c.alpha = float(a)
    pi = 0.8 * rng.dirichlet(np.full(K, 1.0), size=n) + 0.2 / K
    pi /= pi.sum(axis=1, keepdims=True)
    return curves, ClusterModel(comps), pi
