"""Readers and writers for the files that connect pipeline stages.

Floats are written with ``repr`` so every table and JSON document
round-trips bit-exactly and identical inputs give byte-identical files.
"""

import csv
import json
from collections import OrderedDict

import numpy as np

from .errors import InputError, VersionError
from .ingest import NormalizedCurve
from .mixture import Assignment, ClusterComponent, ClusterModel

MODEL_FORMAT_VERSION = 1

CURVE_COLUMNS = ("curve_key", "t", "downfield", "lateral", "was_mirrored")


def _f(x):
    return repr(float(x))


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "1"):
        return True
    if t in ("false", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _open_csv(path):
    try:
        return open(path, encoding="utf-8", newline="")
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None


def _check_header(reader, expected, path):
    header = next(reader, None)
    if header is None:
        raise InputError(f"{path}: empty file")
    missing = [c for c in expected if c not in header]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")
    return {c: header.index(c) for c in header}


# ---------------------------------------------------------------------------
# curves


def write_curves(path, curves):
    """One row per point: ``curve_key, t, downfield, lateral, was_mirrored``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for c in curves:
            flag = "true" if c.was_mirrored else "false"
            for t, (d, lat) in zip(c.times, c.points):
                w.writerow((c.key, _f(t), _f(d), _f(lat), flag))


def curve_metadata(curve, flagged=False, **extra):
    return {
        "game_id": curve.game_id,
        "play_id": curve.play_id,
        "player_id": curve.player_id,
        "display_name": curve.display_name,
        "position_code": curve.position_code,
        "was_mirrored": bool(curve.was_mirrored),
        "n_points": len(curve),
        "no_end_event": bool(flagged),
        **extra,
    }


def write_metadata(path, curves, flagged=()):
    flagged = set(flagged)
    meta = OrderedDict((c.key, curve_metadata(c, c.key in flagged)) for c in curves)
    write_json(path, meta)


def read_metadata(path):
    meta = read_json(path)
    if not isinstance(meta, dict):
        raise InputError(f"{path}: metadata must be a JSON object keyed by curve")
    return meta


def read_curves(path, metadata=None):
    """Read a curve table back into :class:`NormalizedCurve` objects.

    Identity fields come from ``metadata`` (as written by
    :func:`write_metadata`) when given, else from splitting the key on ``:``.
    Curve order is the order of first appearance in the file.
    """
    groups = OrderedDict()
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        idx = _check_header(reader, CURVE_COLUMNS, path)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = row[idx["curve_key"]]
                rec = (float(row[idx["t"]]), float(row[idx["downfield"]]),
                       float(row[idx["lateral"]]), _bool(row[idx["was_mirrored"]]))
            except (ValueError, IndexError) as exc:
                raise InputError(f"{path}:{row_no}: {exc}") from None
            groups.setdefault(key, []).append(rec)
    curves = []
    for key, recs in groups.items():
        arr = np.array([r[:3] for r in recs])
        info = (metadata or {}).get(key)
        if info is not None:
            ids = (info["game_id"], info["play_id"], info["player_id"])
            pos, name = info.get("position_code", ""), info.get("display_name", "")
        else:
            parts = key.split(":")
            if len(parts) != 3:
                raise InputError(f"{path}: curve key {key!r} is not game:play:player")
            ids, pos, name = tuple(parts), "", ""
        curves.append(NormalizedCurve(*ids, pos, arr[:, 1:], arr[:, 0],
                                      was_mirrored=recs[0][3], display_name=name))
    return curves


# ---------------------------------------------------------------------------
# JSON helpers


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def write_diagnostics(path, diagnostics):
    with open(path, "w", encoding="utf-8") as fh:
        for entry in diagnostics.entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# models


def model_to_dict(model):
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "K": model.K,
        "P": model.degree,
        "components": [
            {"theta": c.theta.tolist(), "sigma2": c.sigma2.tolist(), "alpha": float(c.alpha)}
            for c in model.components
        ],
        "fit_history": [float(v) for v in model.fit_history],
    }


def model_from_dict(d):
    version = d.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise VersionError(f"unsupported model format_version {version!r}")
    try:
        comps = [ClusterComponent(np.array(c["theta"], dtype=float),
                                  np.array(c["sigma2"], dtype=float), float(c["alpha"]))
                 for c in d["components"]]
        model = ClusterModel(comps, [float(v) for v in d.get("fit_history", [])])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model document: {exc}") from exc
    if model.K != d.get("K") or model.degree != d.get("P"):
        raise VersionError(
            f"model header says K={d.get('K')}, P={d.get('P')} but components give "
            f"K={model.K}, P={model.degree}"
        )
    return model


def save_model(path, model):
    write_json(path, model_to_dict(model))


def load_model(path):
    return model_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# memberships, assignments, logs


def write_memberships(path, keys, memberships, layout="long"):
    """Membership table, either long (``curve_key, k, pi``) or dense (one column per k)."""
    pi = np.asarray(memberships)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if layout == "long":
            w.writerow(("curve_key", "k", "pi"))
            for key, row in zip(keys, pi):
                for k, v in enumerate(row, start=1):
                    w.writerow((key, k, _f(v)))
        elif layout == "dense":
            w.writerow(("curve_key",) + tuple(f"pi_{k}" for k in range(1, pi.shape[1] + 1)))
            for key, row in zip(keys, pi):
                w.writerow((key,) + tuple(_f(v) for v in row))
        else:
            raise InputError(f"unknown memberships layout {layout!r}")


def read_memberships(path):
    """Return ``(keys, matrix)`` from either membership layout."""
    with _open_csv(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if header == ["curve_key", "k", "pi"]:
        data = OrderedDict()
        for key, k, v in body:
            data.setdefault(key, {})[int(k)] = float(v)
        K = max((max(d) for d in data.values()), default=0)
        return list(data), np.array([[d.get(k, 0.0) for k in range(1, K + 1)]
                                     for d in data.values()])
    return [r[0] for r in body], np.array([[float(v) for v in r[1:]] for r in body])


ASSIGNMENT_COLUMNS = ("curve_key", "cluster", "probability")


def write_assignments(path, assignments, route_groups=None):
    cols = ASSIGNMENT_COLUMNS + (("route_group",) if route_groups is not None else ())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for j, a in enumerate(assignments):
            row = (a.curve_key, a.cluster, _f(a.probability))
            w.writerow(row + ((route_groups[j],) if route_groups is not None else ()))


def read_assignments(path):
    out = []
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        idx = _check_header(reader, ASSIGNMENT_COLUMNS, path)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(Assignment(row[idx["curve_key"]], int(row[idx["cluster"]]),
                                      float(row[idx["probability"]])))
            except (ValueError, IndexError) as exc:
                raise InputError(f"{path}:{row_no}: {exc}") from None
    return out


def write_fit_log(path, history):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "log_likelihood"))
        for i, v in enumerate(history, start=1):
            w.writerow((i, _f(v)))


def write_truth(path, keys, truth, templates):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("curve_key", "template", "template_name"))
        for key, k in zip(keys, truth):
            w.writerow((key, int(k) + 1, templates[int(k)].name))


def read_truth(path):
    """Map curve key to 0-based template index."""
    out = OrderedDict()
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        idx = _check_header(reader, ("curve_key", "template"), path)
        for row in reader:
            if row:
                out[row[idx["curve_key"]]] = int(row[idx["template"]]) - 1
    return out
