"""Synthetic routes with known truth, and the adjusted Rand index.

Real tracking data carries no route labels, so model quality is checked on
corpora drawn from the model's own generative story: pick a template
route, sample it at irregular times, add Gaussian noise.

:func:`simulate_tracking` goes one step further and writes raw field
coordinates, events and a ball track, so the whole preprocessing pipeline
can be exercised end to end.
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .bernstein import as_control_points, evaluate_bezier
from .errors import DomainError, InputError
from .ingest import FIELD_WIDTH, NormalizedCurve, curve_key


@dataclass(frozen=True, eq=False)
class Template:
    name: str
    theta: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", as_control_points(self.theta))
        if not self.weight > 0:
            raise InputError(f"template {self.name!r}: weight must be positive")


@dataclass
class SyntheticCorpus:
    curves: list
    truth: np.ndarray  # 0-based template index per curve
    templates: list
    config: dict = field(default_factory=dict)


def load_templates(path=None):
    """Read templates from a JSON list of ``{name, theta, weight}`` objects.

    With no path, the eight bundled route shapes are returned.
    """
    if path is None:
        text = resources.files("routemix").joinpath("data/templates.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
        return [Template(t["name"], np.array(t["theta"], dtype=float), float(t.get("weight", 1.0)))
                for t in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed templates file: {exc}") from exc


def default_templates():
    return load_templates()


def _pair(value):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (2,)).copy()
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("noise sigma must be finite and non-negative")
    return arr


def _weights(templates):
    if not templates:
        raise DomainError("need at least one template")
    w = np.array([t.weight for t in templates], dtype=float)
    return w / w.sum()


def _interior_times(rng, k):
    while True:
        t = np.sort(rng.uniform(0.0, 1.0, k))
        if k == 0 or (t[0] > 0.0 and t[-1] < 1.0 and np.all(np.diff(t) > 0)):
            return t


def generate(templates, n, noise_sigma=(0.5, 0.5), m_range=(20, 60), seed=0):
    """Draw ``n`` noisy curves from weighted templates.

    Each curve picks a template by weight, a length ``m`` uniformly from
    ``m_range`` (inclusive), and times as sorted uniforms with 0 and 1
    pinned. Noise is added to every point but the first, which stays on the
    template's start so that the curve begins at the origin.
    """
    m_min, m_max = m_range
    if n < 1 or m_min < 2 or m_max < m_min:
        raise DomainError(f"invalid corpus request n={n}, m_range={m_range}")
    sigma = _pair(noise_sigma)
    p = _weights(templates)
    rng = np.random.default_rng(seed)
    curves, truth = [], np.empty(n, dtype=np.int64)
    for i in range(n):
        k = int(rng.choice(len(templates), p=p))
        m = int(rng.integers(m_min, m_max + 1))
        times = np.concatenate([[0.0], _interior_times(rng, m - 2), [1.0]])
        pts = evaluate_bezier(templates[k].theta, times)
        noise = rng.normal(0.0, 1.0, (m, 2)) * sigma
        noise[0] = 0.0
        pts = pts + noise
        pts = pts - pts[0]
        truth[i] = k
        curves.append(NormalizedCurve("synth", str(i + 1), "1", "WR", pts, times,
                                      display_name=templates[k].name))
    config = {"n": n, "noise_sigma": sigma.tolist(), "m_range": [m_min, m_max], "seed": seed}
    return SyntheticCorpus(curves, truth, list(templates), config)


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1.0) / 2.0


def adjusted_rand_index(truth, predicted):
    """Chance-corrected agreement between two labelings (pair-counting form)."""
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.shape != predicted.shape or truth.ndim != 1:
        raise InputError("labelings must be 1-D and of equal length")
    if truth.size < 2:
        raise InputError("need at least two items")
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(predicted, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1))
    np.add.at(table, (ti, pi), 1)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    expected = rows * cols / _comb2(truth.size)
    maximum = 0.5 * (rows + cols)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


# ---------------------------------------------------------------------------
# raw tracking simulation

TRACKING_COLUMNS = ("gameId", "playId", "nflId", "displayName", "position",
                    "frameId", "x", "y", "event", "playDirection")

_FORMATIONS = (
    ("WR", "WR", "WR", "TE", "RB"),
    ("WR", "WR", "TE", "TE", "RB"),
    ("WR", "WR", "WR", "WR", "RB"),
    ("WR", "WR", "WR", "RB"),
    ("WR", "WR", "TE", "RB", "FB"),
)


def _roster(rng, sizes=None):
    sizes = sizes or {"WR": 40, "TE": 15, "RB": 15, "FB": 5, "QB": 8}
    roster, next_id = {}, 40000
    for pos, count in sizes.items():
        roster[pos] = [(str(next_id + j), f"{pos} Player {j + 1}") for j in range(count)]
        next_id += count
    return roster


def simulate_tracking(templates=None, n_plays=200, seed=0, noise=0.2,
                      route_frames=(25, 50), pass_fraction=0.9, with_direction=True):
    """Simulate raw 10 Hz tracking rows for ``n_plays`` plays.

    Every play has a ball, a quarterback and three to five eligible
    receivers, each running a template route from a random alignment on a
    random line of scrimmage and attack direction. About ``pass_fraction``
    of the plays carry a forward pass; the rest are handoffs.

    Returns ``(rows, truth)``: a list of dicts keyed by
    :data:`TRACKING_COLUMNS` and a dict mapping each pass-play receiver's
    curve key to its 0-based template index.
    """
    templates = templates or default_templates()
    p = _weights(templates)
    rng = np.random.default_rng(seed)
    roster = _roster(rng)
    rows, truth = [], {}
    for i in range(n_plays):
        game_id = str(2018090600 + i // 50)
        play_id = str(i + 1)
        high_x = bool(rng.integers(2))
        los = float(rng.uniform(35.0, 85.0))
        ball_s = float(rng.uniform(20.0, FIELD_WIDTH - 20.0))
        is_pass = bool(rng.uniform() < pass_fraction)
        n_pre = int(rng.integers(3, 8))
        m = int(rng.integers(route_frames[0], route_frames[1] + 1))
        n_post = 3
        snap = n_pre + 1
        throw = snap + max(1, int(0.6 * (m - 1)))
        end = snap + m - 1
        n_frames = n_pre + m + n_post
        events = {snap: "ball_snap",
                  throw: "pass_forward" if is_pass else "handoff",
                  end: ("pass_outcome_caught" if rng.uniform() < 0.6 else "pass_outcome_incomplete")
                  if is_pass else "tackle"}

        def to_field(d, s):
            x = los + d if high_x else los - d
            y = s if high_x else FIELD_WIDTH - s
            return np.round(x, 2), np.round(y, 2)

        def emit(pid, name, pos, d, s):
            x, y = to_field(d, s)
            for f in range(n_frames):
                rows.append({
                    "gameId": game_id, "playId": play_id, "nflId": pid,
                    "displayName": name, "position": pos, "frameId": f + 1,
                    "x": float(x[f]), "y": float(y[f]), "event": events.get(f + 1, "None"),
                    "playDirection": ("right" if high_x else "left") if with_direction else "",
                })

        # ball sits on the line until the snap, then goes back to the quarterback
        ball_d = np.zeros(n_frames)
        ball_d[snap:] = np.linspace(-1.0, -5.0, n_frames - snap)
        emit("NA", "football", "", ball_d, np.full(n_frames, ball_s))
        qb = roster["QB"][int(rng.integers(len(roster["QB"])))]
        emit(qb[0], qb[1], "QB", np.full(n_frames, -5.0), np.full(n_frames, ball_s))

        formation = _FORMATIONS[int(rng.integers(len(_FORMATIONS)))]
        used = set()
        t = np.linspace(0.0, 1.0, m)
        for pos in formation:
            pool = [r for r in roster[pos] if r[0] not in used]
            pid, name = pool[int(rng.integers(len(pool)))]
            used.add(pid)
            k = int(rng.choice(len(templates), p=p))
            rel = evaluate_bezier(templates[k].theta, t) - templates[k].theta[0]
            rel[1:] += rng.normal(0.0, noise, (m - 1, 2))
            d0 = -1.0 if pos in ("WR", "TE") else -5.0
            for _ in range(50):
                side = -1.0 if rng.integers(2) else 1.0
                offset = rng.uniform(2.0, 14.0) if pos in ("WR", "TE") else rng.uniform(0.5, 3.0)
                s0 = ball_s + side * offset
                # receivers right of the ball run the mirror image
                s = s0 + (rel[:, 1] if side < 0 else -rel[:, 1])
                if s.min() > 0.5 and s.max() < FIELD_WIDTH - 0.5:
                    break
            else:
                s = np.clip(s, 0.5, FIELD_WIDTH - 0.5)
            d = np.empty(n_frames)
            lat = np.empty(n_frames)
            d[:n_pre], lat[:n_pre] = d0, s0
            d[n_pre:n_pre + m], lat[n_pre:n_pre + m] = d0 + rel[:, 0], s
            d[n_pre + m:], lat[n_pre + m:] = d[n_pre + m - 1], lat[n_pre + m - 1]
            emit(pid, name, pos, d, lat)
            if is_pass:
                truth[curve_key(game_id, play_id, pid)] = k
    return rows, truth
