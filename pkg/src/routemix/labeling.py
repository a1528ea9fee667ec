"""Route-group labels, usage reports and cluster-mean plots.

Clusters are named by hand: after looking at the plotted means, an analyst
writes a label map from 1-based cluster numbers to route-group names.
Several clusters may share a name, which condenses K clusters into fewer
route groups.
"""

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .bernstein import evaluate_bezier
from .errors import InputError, LabelMapError, ReportError

ROUTE_GROUPS = ("go", "post", "corner", "out", "in", "slant", "flat", "screen",
                "curl/comeback", "wheel", "cross", "hitch")

GROUP_BY = ("position", "player", "design")


@dataclass(frozen=True)
class LabeledAssignment:
    curve_key: str
    cluster: int
    probability: float
    route_group: str


@dataclass(frozen=True)
class UsageRow:
    key: str
    route_group: str
    count: int
    share: float


@dataclass
class UsageReport:
    group_by: str
    rows: list

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("key", "route_group", "count", "share"))
        for r in self.rows:
            w.writerow((r.key, r.route_group, r.count, repr(r.share)))
        return buf.getvalue()

    def to_json(self):
        doc = {"group_by": self.group_by,
               "rows": [{"key": r.key, "route_group": r.route_group,
                         "count": r.count, "share": r.share} for r in self.rows]}
        return json.dumps(doc, indent=2) + "\n"

    @property
    def total(self):
        return sum(r.count for r in self.rows)


# ---------------------------------------------------------------------------
# label maps


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise LabelMapError(f"cluster {k} appears more than once in label map")
        seen[k] = v
    return seen


def parse_label_map(text):
    """Parse ``{"1": "go", "2": "post", ...}`` into ``{1: "go", 2: "post", ...}``."""
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise LabelMapError(f"label map is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise LabelMapError("label map must be a JSON object")
    out = {}
    for k, v in raw.items():
        try:
            idx = int(k)
        except ValueError:
            raise LabelMapError(f"label map key {k!r} is not a cluster number") from None
        if not isinstance(v, str) or not v.strip():
            raise LabelMapError(f"cluster {idx} has an empty route-group name")
        out[idx] = v.strip()
    return out


def load_label_map(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_label_map(fh.read())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None


def example_label_map():
    """The shipped 30-cluster template. Edit it after looking at the plot."""
    text = resources.files("routemix").joinpath("data/label_map_example.json").read_text()
    return parse_label_map(text)


def identity_label_map(K):
    return {k: str(k) for k in range(1, K + 1)}


def validate_label_map(label_map, K):
    missing = [k for k in range(1, K + 1) if k not in label_map]
    if missing:
        raise LabelMapError(f"label map is missing cluster(s) {missing}")
    extra = sorted(k for k in label_map if not 1 <= k <= K)
    if extra:
        raise LabelMapError(f"label map names cluster(s) {extra} outside 1..{K}")


def apply_label_map(assignments, label_map, K=None):
    """Attach a route group to each assignment.

    With ``K`` given the map must cover exactly clusters ``1..K``; otherwise
    it only needs to cover the clusters that occur.
    """
    if K is not None:
        validate_label_map(label_map, K)
    out = []
    for a in assignments:
        if a.cluster not in label_map:
            raise LabelMapError(f"label map is missing cluster {a.cluster}")
        out.append(LabeledAssignment(a.curve_key, a.cluster, a.probability,
                                     label_map[a.cluster]))
    return out


# ---------------------------------------------------------------------------
# reports


def _rows(counter_by_key):
    rows = []
    for key in sorted(counter_by_key):
        counts = counter_by_key[key]
        total = sum(counts.values())
        for group, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            rows.append(UsageRow(key, group, c, c / total))
    return rows


def usage_report(labeled, metadata, group_by="position", wr_count=None):
    """Counts and within-key shares of route groups.

    ``group_by`` is ``"position"``, ``"player"`` or ``"design"``. A design is
    the sorted multiset of route groups run on one play, and the counts of a
    design report are plays rather than routes. ``wr_count=3`` restricts the
    design report to plays with exactly three wide receivers and describes
    each play by its receivers' routes only.
    """
    if group_by not in GROUP_BY:
        raise InputError(f"group_by must be one of {GROUP_BY}, got {group_by!r}")
    unknown = sorted({a.curve_key for a in labeled if a.curve_key not in metadata})
    if unknown:
        raise ReportError(f"no metadata for curves: {unknown}")

    counters = defaultdict(Counter)
    if group_by == "position":
        for a in labeled:
            counters[metadata[a.curve_key]["position_code"]][a.route_group] += 1
    elif group_by == "player":
        for a in labeled:
            info = metadata[a.curve_key]
            counters[info.get("display_name") or info["player_id"]][a.route_group] += 1
    else:
        plays = defaultdict(list)
        for a in labeled:
            info = metadata[a.curve_key]
            plays[(info["game_id"], info["play_id"])].append((info["position_code"], a.route_group))
        for routes in plays.values():
            if wr_count is not None:
                wr = [g for pos, g in routes if pos == "WR"]
                if len(wr) != wr_count:
                    continue
                key, groups = f"{wr_count}WR", wr
            else:
                key, groups = f"{len(routes)} routes", [g for _, g in routes]
            counters[key][" + ".join(sorted(groups))] += 1
    return UsageReport(group_by, _rows(counters))


# ---------------------------------------------------------------------------
# plotting

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939")


def _escape(text):
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def render_cluster_means(model, label_map=None, width=600, height=600,
                         samples=100, margin=40):
    """SVG of every component's mean route.

    Lateral yards run left to right and downfield yards bottom to top, on a
    common scale. Each mean is one ``<polyline>`` of ``samples`` points;
    with a label map, each also gets a ``<text>`` with its group name and
    groups share colours.
    """
    t = np.linspace(0.0, 1.0, samples)
    curves = [evaluate_bezier(c.theta, t) for c in model.components]
    pts = np.concatenate(curves + [np.zeros((1, 2))])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    scale = min((width - 2 * margin) / span[1], (height - 2 * margin) / span[0])

    def xy(p):
        return (margin + (p[:, 1] - lo[1]) * scale,
                height - margin - (p[:, 0] - lo[0]) * scale)

    groups = sorted(set(label_map.values())) if label_map else []
    ox, oy = xy(np.zeros((1, 2)))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{oy[0]:.3f}" x2="{width - margin}" y2="{oy[0]:.3f}" '
        'stroke="#bbbbbb" stroke-dasharray="4 4"/>',
    ]
    for k, curve in enumerate(curves, start=1):
        name = label_map.get(k) if label_map else None
        color = _PALETTE[(groups.index(name) if name is not None else k - 1) % len(_PALETTE)]
        X, Y = xy(curve)
        coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(X, Y))
        title = f"cluster {k}" + (f": {name}" if name else "")
        out.append(f'<polyline id="cluster-{k}" fill="none" stroke="{color}" '
                   f'stroke-width="2" points="{coords}"><title>{_escape(title)}</title></polyline>')
        if name is not None:
            out.append(f'<text x="{X[-1]:.3f}" y="{Y[-1] - 4:.3f}" font-size="11" '
                       f'fill="{color}">{_escape(name)}</text>')
    out.append(f'<circle cx="{ox[0]:.3f}" cy="{oy[0]:.3f}" r="3" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
