"""Gaussian mixture of curves with Bezier-curve component means, fitted by EM.

Component ``k`` models a curve as its Bezier mean ``theta_k`` evaluated at
the curve's own normalized times plus independent Gaussian noise with a
per-axis variance ``sigma2_k``. Curves of any length are handled without
resampling; each contributes one design matrix built from its times.

Internally all curves are stacked into one long point array
(:class:`CurveStack`). Per-curve sums are taken with ``np.add.reduceat``
over the stack, and the point weights of the M-step are only ever held as
a vector, never as a dense diagonal matrix.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .bernstein import DEFAULT_DEGREE, as_control_points, design_matrix
from .errors import (
    ClusterCollapseError,
    ConsistencyError,
    DegenerateClusterError,
    DomainError,
    InitializationError,
    InsufficientDataError,
    NumericalFailure,
    UnderdeterminedFitError,
)

logger = logging.getLogger(__name__)

DEFAULT_K = 30
_LOG_2PI = np.log(2.0 * np.pi)
_CHUNK_POINTS = 1 << 16


@dataclass(frozen=True)
class MixtureConfig:
    """Knobs for initialization and the EM loop.

    ``steps``, when set, runs exactly that many E-steps (so ``fit_history``
    has ``steps`` entries) and ignores ``tol``. ``threads=None`` means one
    worker per CPU; results do not depend on the thread count.
    """

    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0
    steps: int | None = None
    threads: int | None = None
    variance_floor: float = 1e-6
    collapse_fraction: float = 0.01
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    monotone_slack: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0:
            raise DomainError("tol must be positive")
        if self.max_iters < 0:
            raise DomainError("max_iters must be non-negative")
        if self.steps is not None and self.steps < 1:
            raise DomainError("steps must be at least 1")
        if self.variance_floor <= 0:
            raise DomainError("variance_floor must be positive")


@dataclass
class ClusterComponent:
    theta: np.ndarray  # (P+1, 2) Bezier control points of the mean curve
    sigma2: np.ndarray  # (2,) per-axis noise variance, yd^2
    alpha: float  # mixing weight


@dataclass
class ClusterModel:
    components: list
    fit_history: list = field(default_factory=list)
    # set by m_step / fit; not part of the saved model
    reinitialized: list = field(default_factory=list, compare=False)
    converged: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.components:
            raise DomainError("a model needs at least one component")
        degrees = {c.theta.shape[0] - 1 for c in self.components}
        if len(degrees) != 1:
            raise DomainError(f"components disagree on degree: {sorted(degrees)}")
        for c in self.components:
            as_control_points(c.theta)
            if np.any(~np.isfinite(c.sigma2)) or np.any(c.sigma2 <= 0):
                raise DomainError("component variances must be positive")
            if not c.alpha > 0:
                raise DomainError("mixing weights must be positive")

    @property
    def K(self):
        return len(self.components)

    @property
    def degree(self):
        return self.components[0].theta.shape[0] - 1

    @property
    def thetas(self):
        return np.stack([c.theta for c in self.components])

    @property
    def sigma2s(self):
        return np.stack([c.sigma2 for c in self.components])

    @property
    def alphas(self):
        return np.array([c.alpha for c in self.components])


@dataclass(frozen=True)
class Assignment:
    """Hard label for one curve. ``cluster`` is 1-based, as in label maps."""

    curve_key: str
    cluster: int
    probability: float


class CurveStack:
    """All curves' points and design-matrix rows stacked end to end.

    Also caches per-curve sufficient statistics ``T_i^T T_i`` and
    ``T_i^T Y_i`` so the weighted normal equations of every cluster are a
    cheap weighted sum over curves.
    """

    def __init__(self, curves, degree):
        if len(curves) == 0:
            raise InsufficientDataError("no curves")
        self.degree = int(degree)
        self.keys = [c.key for c in curves]
        self.lengths = np.array([len(c.times) for c in curves], dtype=np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.lengths)[:-1]])
        self.Y = np.concatenate([c.points for c in curves])
        self.T = design_matrix(np.concatenate([c.times for c in curves]), degree)
        self.curve_of_point = np.repeat(np.arange(len(curves)), self.lengths)
        self.endpoints = np.array([c.points[-1] for c in curves])
        self._gram = None
        self._cross = None

    @property
    def n(self):
        return len(self.lengths)

    @property
    def n_points(self):
        return self.Y.shape[0]

    def chunks(self):
        """Curve-aligned ``(curve_lo, curve_hi)`` ranges of roughly fixed point count."""
        bounds = [0]
        acc = 0
        for i, m in enumerate(self.lengths):
            acc += m
            if acc >= _CHUNK_POINTS:
                bounds.append(i + 1)
                acc = 0
        if bounds[-1] != self.n:
            bounds.append(self.n)
        return list(zip(bounds[:-1], bounds[1:]))

    def sums(self, values, lo=0, hi=None):
        """Per-curve sums of a per-point array restricted to curves ``lo:hi``."""
        hi = self.n if hi is None else hi
        p0 = self.starts[lo]
        return np.add.reduceat(values, self.starts[lo:hi] - p0, axis=0)

    def point_range(self, lo, hi):
        p0 = self.starts[lo]
        p1 = self.starts[hi - 1] + self.lengths[hi - 1]
        return slice(p0, p1)

    @property
    def gram(self):
        if self._gram is None:
            self._sufficient_stats()
        return self._gram

    @property
    def cross(self):
        if self._cross is None:
            self._sufficient_stats()
        return self._cross

    def _sufficient_stats(self):
        P1 = self.degree + 1
        gram = np.empty((self.n, P1, P1))
        cross = np.empty((self.n, P1, 2))
        for lo, hi in self.chunks():
            sl = self.point_range(lo, hi)
            T, Y = self.T[sl], self.Y[sl]
            gram[lo:hi] = self.sums(T[:, :, None] * T[:, None, :], lo, hi)
            cross[lo:hi] = self.sums(T[:, :, None] * Y[:, None, :], lo, hi)
        self._gram, self._cross = gram, cross


def _as_stack(curves, degree):
    if isinstance(curves, CurveStack):
        if curves.degree != degree:
            raise DomainError(f"curve stack built for degree {curves.degree}, model has {degree}")
        return curves
    return CurveStack(curves, degree)


def _map(fn, items, threads):
    items = list(items)
    if threads == 1 or len(items) == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# initialization


def _kmeanspp(points, K, rng):
    n = len(points)
    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(points, centers, max_iter):
    labels = None
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(len(centers)):
            members = labels == k
            if members.any():
                centers[k] = points[members].mean(axis=0)
    return labels, centers


def _refill_empty(points, labels, centers):
    K = len(centers)
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=K)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels
        dist = np.sum((points - centers[labels]) ** 2, axis=1)
        # only steal from clusters that can spare a point
        dist[counts[labels] < 2] = -np.inf
        far = int(np.argmax(dist))
        labels[far] = empty[0]
        centers[empty[0]] = points[far]


def kmeans_endpoints(curves, K, seed=0, restarts=10, max_iter=300):
    """Initial cluster labels (0-based) from k-means on each curve's last point.

    Seeded k-means++ followed by Lloyd iterations, repeated ``restarts``
    times with the lowest within-cluster sum of squares kept. Empty clusters
    are refilled with the point farthest from its center, so every label
    in ``0..K-1`` is used.
    """
    if isinstance(curves, CurveStack):
        points = curves.endpoints
    else:
        points = np.array([c.points[-1] for c in curves], dtype=float)
    n = len(points)
    if K < 1:
        raise DomainError("K must be positive")
    if n < K:
        raise InsufficientDataError(f"{n} curves cannot fill {K} clusters")
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(max(1, restarts)):
        centers = _kmeanspp(points, K, rng)
        labels, centers = _lloyd(points, centers, max_iter)
        labels = _refill_empty(points, labels, centers)
        means = np.array([points[labels == k].mean(axis=0) for k in range(K)])
        inertia = np.sum((points - means[labels]) ** 2)
        if inertia < best_inertia:
            best, best_inertia = labels, inertia
    return best


def initialize_model(curves, assignments, degree=DEFAULT_DEGREE, config=None):
    """Per-cluster pooled least-squares fits from hard initial labels.

    ``assignments`` holds one 0-based cluster label per curve. Variances
    are the per-axis mean squared residuals and weights the cluster shares,
    both floored.
    """
    config = config or MixtureConfig()
    stack = _as_stack(curves, degree)
    labels = np.asarray(assignments)
    if labels.shape != (stack.n,):
        raise DomainError("need one initial label per curve")
    K = int(labels.max()) + 1
    point_labels = labels[stack.curve_of_point]
    components = []
    for k in range(K):
        sel = point_labels == k
        if sel.sum() < degree + 1:
            raise InitializationError(
                k + 1, f"cluster {k + 1} has {int(sel.sum())} points, needs {degree + 1}"
            )
        T, Y = stack.T[sel], stack.Y[sel]
        theta, _, rank, _ = np.linalg.lstsq(T, Y, rcond=None)
        if rank < degree + 1:
            raise InitializationError(k + 1, f"cluster {k + 1} design matrix is rank deficient")
        resid = Y - T @ theta
        sigma2 = np.maximum(np.mean(resid**2, axis=0), config.variance_floor)
        components.append(ClusterComponent(theta, sigma2, float(np.sum(labels == k)) / stack.n))
    alphas = np.maximum([c.alpha for c in components], config.collapse_fraction / K)
    alphas = alphas / alphas.sum()
    for c, a in zip(components, alphas):
        c.alpha = float(a)
    return ClusterModel(components)


# ---------------------------------------------------------------------------
# E-step


def curve_log_densities(model, curves, threads=None):
    """Matrix of ``sum_j log N(y_ij | T_ij theta_k, diag sigma2_k)``, shape ``(n, K)``.

    Chunks of curves are evaluated concurrently; the chunking does not
    depend on the thread count, so neither do the results.
    """
    stack = _as_stack(curves, model.degree)
    thetas, sigma2s = model.thetas, model.sigma2s
    point_const = -0.5 * np.sum(_LOG_2PI + np.log(sigma2s), axis=1)

    def block(bounds):
        lo, hi = bounds
        sl = stack.point_range(lo, hi)
        T, Y = stack.T[sl], stack.Y[sl]
        out = np.empty((hi - lo, model.K))
        # overflow here surfaces as NumericalFailure below
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(model.K):
                r = Y - T @ thetas[k]
                out[:, k] = -stack.sums((r * r) @ (0.5 / sigma2s[k]), lo, hi)
        return out + np.outer(stack.lengths[lo:hi], point_const)

    D = np.concatenate(_map(block, stack.chunks(), threads))
    bad = np.argwhere(~np.isfinite(D))
    if bad.size:
        i, k = bad[0]
        raise NumericalFailure(
            stack.keys[i], k + 1,
            f"non-finite log-density for curve {stack.keys[i]} under cluster {k + 1}",
        )
    return D


def component_log_likelihoods(model, curves, threads=None):
    """``log alpha_k`` plus :func:`curve_log_densities`."""
    return curve_log_densities(model, curves, threads) + np.log(model.alphas)


def normalize_memberships(log_lik):
    """Row-normalize a component log-likelihood matrix via log-sum-exp.

    Returns ``(memberships, total_log_likelihood)``.
    """
    lse = logsumexp(log_lik, axis=1)
    pi = np.exp(log_lik - lse[:, None])
    return pi, float(np.sum(lse))


def e_step(model, curves, threads=None):
    """Posterior membership probabilities and the mixture log-likelihood.

    Computed in log space and normalized per curve with log-sum-exp, so
    long curves do not underflow.
    """
    return normalize_memberships(component_log_likelihoods(model, curves, threads))


# ---------------------------------------------------------------------------
# M-step


def _solve_cluster(stack, w_curve, degree, floor, k):
    A = np.einsum("i,ipq->pq", w_curve, stack.gram)
    B = np.einsum("i,ipd->pd", w_curve, stack.cross)
    eig = np.linalg.eigvalsh(A)
    if not eig[-1] > 0 or eig[0] <= eig[-1] * 1e-13:
        raise DegenerateClusterError(
            k + 1, f"cluster {k + 1}: weighted normal equations are singular"
        )
    theta = np.linalg.solve(A, B)
    sq = np.empty((stack.n, 2))
    for lo, hi in stack.chunks():
        sl = stack.point_range(lo, hi)
        r = stack.Y[sl] - stack.T[sl] @ theta
        sq[lo:hi] = stack.sums(r * r, lo, hi)
    denom = w_curve @ stack.lengths
    sigma2 = np.maximum((w_curve @ sq) / denom, floor)
    return theta, sigma2


def m_step(curves, memberships, degree=DEFAULT_DEGREE, config=None,
           log_densities=None, threads=None):
    """Weighted least-squares update of every component.

    Each point of curve ``i`` carries weight ``pi_ik`` in cluster ``k``'s
    regression. Mixing weights are the mean memberships and variances the
    weighted mean squared residual per point.

    A cluster whose mass falls below ``collapse_fraction / K`` is reseeded
    from the curve whose best component fit is worst, which needs the
    previous :func:`curve_log_densities` matrix; without it a :class:`ClusterCollapseError`
    is raised. The returned model lists reseeded clusters (0-based) in its
    ``reinitialized`` attribute.
    """
    config = config or MixtureConfig()
    stack = _as_stack(curves, degree)
    pi = np.asarray(memberships, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != stack.n:
        raise DomainError("memberships must be an (n, K) matrix")
    if stack.n_points < degree + 1:
        raise UnderdeterminedFitError("not enough points for the requested degree")
    n, K = pi.shape
    mass = pi.sum(axis=0)
    alphas = mass / n
    collapsed = [k for k in range(K) if alphas[k] < config.collapse_fraction / K]
    if collapsed and log_densities is None:
        raise ClusterCollapseError([k + 1 for k in collapsed])

    live = [k for k in range(K) if k not in collapsed]
    threads = config.threads if threads is None else threads
    solved = _map(
        lambda k: _solve_cluster(stack, pi[:, k], degree, config.variance_floor, k),
        live, threads,
    )
    params = dict(zip(live, solved))

    if collapsed:
        if not live:
            raise ClusterCollapseError([k + 1 for k in collapsed])
        pooled = np.average([params[k][1] for k in live], axis=0, weights=alphas[live])
        best_fit = np.max(log_densities, axis=1)
        order = np.argsort(best_fit, kind="stable")
        used = set()
        for k in collapsed:
            for i in order:
                if i in used or stack.lengths[i] < degree + 1:
                    continue
                sl = slice(stack.starts[i], stack.starts[i] + stack.lengths[i])
                try:
                    theta, _, rank, _ = np.linalg.lstsq(stack.T[sl], stack.Y[sl], rcond=None)
                except np.linalg.LinAlgError:
                    continue
                if rank < degree + 1:
                    continue
                used.add(i)
                params[k] = (theta, pooled.copy())
                alphas[k] = 1.0 / n
                logger.info("cluster %d collapsed; reseeded from curve %s", k + 1, stack.keys[i])
                break
            else:
                raise ClusterCollapseError([k + 1])

    alphas = alphas / alphas.sum()
    model = ClusterModel([
        ClusterComponent(params[k][0], params[k][1], float(alphas[k])) for k in range(K)
    ])
    model.reinitialized = list(collapsed)
    return model


# ---------------------------------------------------------------------------
# EM driver


def fit(curves, K=DEFAULT_K, degree=DEFAULT_DEGREE, config=None):
    """Fit a K-component Bezier-mean mixture by EM.

    Runs k-means on curve endpoints, initializes by pooled least squares,
    then alternates E- and M-steps until the change in log-likelihood drops
    below ``config.tol`` or ``config.max_iters`` M-steps have run. With
    ``config.steps`` set, exactly that many E-steps run instead.

    Returns ``(model, memberships)``; the memberships come from the last
    E-step, made with the returned model. ``model.fit_history`` holds the
    log-likelihood after each E-step, and ``model.converged`` says whether
    the tolerance was met (``None`` when ``steps`` is set).

    Raises
    ------
    ConsistencyError
        The log-likelihood dropped by more than ``config.monotone_slack``
        between two iterations without any cluster being reseeded. The
        exception's ``state`` holds the models and history for inspection.
    """
    config = config or MixtureConfig()
    stack = _as_stack(curves, degree)
    labels = kmeans_endpoints(stack, K, config.seed, config.kmeans_restarts,
                              config.kmeans_max_iter)
    model = initialize_model(stack, labels, degree, config)
    D = curve_log_densities(model, stack, config.threads)
    pi, ll = normalize_memberships(D + np.log(model.alphas))
    history = [ll]
    logger.info("initial log-likelihood %.6f", ll)

    n_msteps = config.max_iters if config.steps is None else config.steps - 1
    for it in range(n_msteps):
        new_model = m_step(stack, pi, degree, config, log_densities=D)
        new_D = curve_log_densities(new_model, stack, config.threads)
        new_pi, new_ll = normalize_memberships(new_D + np.log(new_model.alphas))
        if not new_model.reinitialized and new_ll < ll - config.monotone_slack:
            raise ConsistencyError(
                f"log-likelihood decreased from {ll!r} to {new_ll!r} at iteration {it + 1}",
                state={"iteration": it + 1, "history": history + [new_ll],
                       "previous_model": model, "model": new_model},
            )
        delta = new_ll - ll
        model, D, pi, ll = new_model, new_D, new_pi, new_ll
        history.append(ll)
        logger.info("iteration %d log-likelihood %.6f (change %.3g)", it + 1, ll, delta)
        if config.steps is None and not model.reinitialized and abs(delta) < config.tol:
            model.converged = True
            break
    else:
        if config.steps is None:
            logger.warning("no convergence after %d iterations (last change %.3g)",
                           n_msteps, history[-1] - history[-2] if len(history) > 1 else 0.0)
            model.converged = False
    model.fit_history = history
    return model, pi


# ---------------------------------------------------------------------------
# hard assignment


def assign_all(model, curves, threads=None):
    """Hard assignments for many curves (lowest cluster wins exact ties)."""
    curves = list(curves)
    if not curves:
        return []
    stack = _as_stack(curves, model.degree)
    pi, _ = e_step(model, stack, threads)
    z = np.argmax(pi, axis=1)
    return [Assignment(key, int(k) + 1, float(pi[i, k]))
            for i, (key, k) in enumerate(zip(stack.keys, z))]


def assign(model, curve):
    """Hard assignment of a single curve."""
    return assign_all(model, [curve], threads=1)[0]
