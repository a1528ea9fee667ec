"""Tracking-data ingestion and route preprocessing.

Raw tracking rows are parsed into :class:`TrackingRecord` objects, grouped
into per-player :class:`Trajectory` objects for pass plays, and then pushed
through three transforms:

1. :func:`cut` keeps the frames from the snap to the end of the play.
2. :func:`standardize` moves every play to a common line of scrimmage and
   attack direction.
3. :func:`mirror_and_origin` flips routes onto one side of the ball, moves
   the first point to the origin and rescales time to [0, 1].

The result is a list of :class:`NormalizedCurve` ready for clustering.
"""

import csv
import io
import os
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CutError,
    DegenerateDurationError,
    InputError,
    SchemaError,
)

FIELD_LENGTH = 120.0
FIELD_WIDTH = 53.3

TOWARD_HIGH_X = "toward_high_x"
TOWARD_LOW_X = "toward_low_x"

# Output coordinates are snapped to this grid (tracking data itself is
# recorded at 0.01 yd). This makes mirrored and rotated copies of a play
# produce bit-identical curves despite floating-point rounding.
COORD_RESOLUTION = 1e-6

_MISSING = {"", "na", "nan", "none", "null"}

DEFAULT_ELIGIBLE = ("WR", "TE", "RB", "FB")
DEFAULT_PASS_EVENTS = ("pass_forward", "pass_shovel")
DEFAULT_START_EVENT = "ball_snap"
DEFAULT_END_EVENTS = (
    "pass_outcome_caught",
    "pass_outcome_incomplete",
    "pass_outcome_interception",
    "pass_outcome_touchdown",
    "pass_arrived",
    "qb_sack",
    "fumble",
    "tackle",
    "touchdown",
    "out_of_bounds",
)


@dataclass(frozen=True)
class ColumnMapping:
    """Header names for each tracking field.

    The first block is required. ``play_direction``, ``line_of_scrimmage``
    and ``snap_y`` are optional play-level columns; set to ``None`` (or leave
    them out of the file) to have them derived from the ball track.
    """

    game_id: str = "gameId"
    play_id: str = "playId"
    player_id: str = "nflId"
    display_name: str = "displayName"
    position_code: str = "position"
    frame_index: str = "frameId"
    x: str = "x"
    y: str = "y"
    event: str = "event"
    play_direction: str | None = "playDirection"
    line_of_scrimmage: str | None = None
    snap_y: str | None = None

    REQUIRED = (
        "game_id", "play_id", "player_id", "display_name",
        "position_code", "frame_index", "x", "y", "event",
    )
    OPTIONAL = ("play_direction", "line_of_scrimmage", "snap_y")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.REQUIRED) - set(cls.OPTIONAL)
        if unknown:
            raise InputError(f"unknown schema fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return {f: getattr(self, f) for f in self.REQUIRED + self.OPTIONAL}


@dataclass(frozen=True)
class SelectionConfig:
    eligible_positions: tuple = DEFAULT_ELIGIBLE
    pass_events: tuple = DEFAULT_PASS_EVENTS
    start_event: str = DEFAULT_START_EVENT
    end_events: tuple = DEFAULT_END_EVENTS

    @classmethod
    def from_dict(cls, d):
        known = {"eligible_positions", "pass_events", "start_event", "end_events"}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown selection fields: {sorted(unknown)}")
        d = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**d)

    def to_dict(self):
        return {
            "eligible_positions": list(self.eligible_positions),
            "pass_events": list(self.pass_events),
            "start_event": self.start_event,
            "end_events": list(self.end_events),
        }


class Diagnostics:
    """Append-only sink for problems found while ingesting.

    Besides free-form entries it keeps a tally of what happened to every
    parsed record, so that ``sum(dispositions.values())`` always equals the
    number of records fed to the pipeline. Safe for concurrent writers.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.entries = []
        self.dispositions = Counter()

    def add(self, stage, code, message, **context):
        entry = {"stage": stage, "code": code, "message": message, **context}
        with self._lock:
            self.entries.append(entry)

    def account(self, disposition, count=1):
        with self._lock:
            self.dispositions[disposition] += count

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, slots=True)
class TrackingRecord:
    game_id: str
    play_id: str
    player_id: str | None  # None for the ball
    display_name: str
    position_code: str
    frame_index: int
    x: float
    y: float
    event: str | None = None
    play_direction: str | None = None
    line_of_scrimmage: float | None = None
    snap_y: float | None = None
    row: int = 0

    @property
    def is_ball(self):
        return self.player_id is None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One player's path through one play.

    ``xy`` holds field coordinates until :func:`standardize` has run, after
    which it holds (downfield, lateral) and ``standardized`` is set.
    """

    game_id: str
    play_id: str
    player_id: str
    display_name: str
    position_code: str
    frames: np.ndarray  # (m,) int
    xy: np.ndarray  # (m, 2)
    events: tuple  # (m,) str | None
    line_of_scrimmage: float
    play_direction: str
    ball_snap_y: float
    standardized: bool = False
    no_end_event: bool = False

    def __post_init__(self):
        if len(self.frames) < 2:
            raise InputError(f"trajectory {self.key} has fewer than 2 frames")
        if np.any(np.diff(self.frames) <= 0):
            raise InputError(f"trajectory {self.key} frames are not strictly increasing")
        if self.play_direction not in (TOWARD_HIGH_X, TOWARD_LOW_X):
            raise InputError(f"bad play direction {self.play_direction!r}")

    @property
    def key(self):
        return curve_key(self.game_id, self.play_id, self.player_id)

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True, eq=False)
class NormalizedCurve:
    """A preprocessed route: starts at the origin, times run from 0 to 1."""

    game_id: str
    play_id: str
    player_id: str
    position_code: str
    points: np.ndarray  # (m, 2) downfield, lateral
    times: np.ndarray  # (m,)
    was_mirrored: bool = False
    display_name: str = ""

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "times", times)
        m = len(times)
        if m < 2 or points.shape != (m, 2):
            raise InputError(f"curve {self.key}: need m >= 2 points matching times")
        if times[0] != 0.0 or times[-1] != 1.0 or np.any(np.diff(times) <= 0):
            raise InputError(f"curve {self.key}: times must increase strictly from 0 to 1")
        if points[0, 0] != 0.0 or points[0, 1] != 0.0:
            raise InputError(f"curve {self.key}: first point must be the origin")
        if not np.all(np.isfinite(points)):
            raise InputError(f"curve {self.key}: non-finite coordinates")

    @property
    def key(self):
        return curve_key(self.game_id, self.play_id, self.player_id)

    def __len__(self):
        return len(self.times)


def curve_key(game_id, play_id, player_id):
    return f"{game_id}:{play_id}:{player_id}"


# ---------------------------------------------------------------------------
# parsing


def _text_stream(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _clean(value):
    if value is None:
        return None
    value = value.strip()
    return None if value.lower() in _MISSING else value


def _id(value):
    # ids often round-trip through float columns ("2539.0")
    v = _clean(value)
    if v is not None and v.endswith(".0") and v[:-2].lstrip("-").isdigit():
        v = v[:-2]
    return v


def parse_tracking(source, schema=None, delimiter=",", diagnostics=None):
    """Parse a delimited tracking table into :class:`TrackingRecord` objects.

    Rows that fail validation (unparsable numbers, coordinates off the field,
    missing identifiers) are skipped and reported to ``diagnostics`` with
    their 1-based data row number.

    Raises
    ------
    SchemaError
        A required mapped column is absent from the header.
    InputError
        The file is empty or contains no valid row.
    """
    schema = schema or ColumnMapping()
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    stream = _text_stream(source)
    close = stream is not source
    try:
        reader = csv.reader(stream, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise InputError("tracking file is empty")
        index = {name.strip(): i for i, name in enumerate(header)}
        cols = {}
        for fld in ColumnMapping.REQUIRED:
            name = getattr(schema, fld)
            if name not in index:
                raise SchemaError(name, f"missing mapped column {name!r} (field {fld})")
            cols[fld] = index[name]
        for fld in ColumnMapping.OPTIONAL:
            name = getattr(schema, fld)
            if name is not None and name in index:
                cols[fld] = index[name]

        records = []
        n_rows = 0
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            n_rows += 1
            try:
                records.append(_parse_row(row, cols, row_no))
            except (ValueError, IndexError) as exc:
                diagnostics.add("parse", "invalid_row", str(exc), row=row_no)
    finally:
        if close:
            stream.close()
    if n_rows == 0:
        raise InputError("tracking file has a header but no data rows")
    if not records:
        raise InputError(f"no valid records among {n_rows} rows")
    return records


def _parse_row(row, cols, row_no):
    def get(fld):
        return row[cols[fld]] if fld in cols else None

    game_id, play_id = _id(get("game_id")), _id(get("play_id"))
    if game_id is None or play_id is None:
        raise ValueError("missing game or play id")
    frame = int(float(get("frame_index")))
    if frame < 1:
        raise ValueError(f"frame index {frame} is not positive")
    x, y = float(get("x")), float(get("y"))
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError("non-finite coordinate")
    if not (0.0 <= x <= FIELD_LENGTH and 0.0 <= y <= FIELD_WIDTH):
        raise ValueError(f"coordinate ({x}, {y}) outside the field")
    los = _clean(get("line_of_scrimmage"))
    snap_y = _clean(get("snap_y"))
    return TrackingRecord(
        game_id=game_id,
        play_id=play_id,
        player_id=_id(get("player_id")),
        display_name=(get("display_name") or "").strip(),
        position_code=(_clean(get("position_code")) or "").upper(),
        frame_index=frame,
        x=x,
        y=y,
        event=_clean(get("event")),
        play_direction=_clean(get("play_direction")),
        line_of_scrimmage=None if los is None else float(los),
        snap_y=None if snap_y is None else float(snap_y),
        row=row_no,
    )


# ---------------------------------------------------------------------------
# play selection


def _direction(raw):
    if raw is None:
        return None
    raw = raw.lower()
    if raw in ("right", TOWARD_HIGH_X):
        return TOWARD_HIGH_X
    if raw in ("left", TOWARD_LOW_X):
        return TOWARD_LOW_X
    return None


def select_routes(records, config=None, diagnostics=None):
    """Group records into eligible-receiver trajectories on pass plays.

    A play is kept when any of its frames carries one of the configured
    pass events. Line of scrimmage and the lateral ball position at the snap
    come from the ball track (records without a player id); the optional
    play-level columns are used when the ball is missing. When no direction
    column is present, the direction is taken from the mean downfield
    movement of the eligible players after the snap.
    """
    config = config or SelectionConfig()
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    plays = defaultdict(list)
    for rec in records:
        plays[(rec.game_id, rec.play_id)].append(rec)

    out = []
    for (game_id, play_id), recs in plays.items():
        out.extend(_select_play(game_id, play_id, recs, config, diagnostics))
    return out


def _select_play(game_id, play_id, recs, config, diagnostics):
    ctx = {"game_id": game_id, "play_id": play_id}
    frame_events = {}
    for r in recs:
        if r.event is not None:
            frame_events.setdefault(r.frame_index, r.event)
    events = set(frame_events.values())

    if not events & set(config.pass_events):
        diagnostics.account("not_pass_play", len(recs))
        return []
    snap_frames = [f for f, e in frame_events.items() if e == config.start_event]
    if not snap_frames:
        diagnostics.add("select", "no_snap", f"play lacks {config.start_event!r}", **ctx)
        diagnostics.account("play_skipped", len(recs))
        return []
    snap = min(snap_frames)

    ball = [r for r in recs if r.is_ball and r.frame_index == snap]
    los = ball[0].x if ball else next(
        (r.line_of_scrimmage for r in recs if r.line_of_scrimmage is not None), None
    )
    if los is None:
        diagnostics.add("select", "no_line_of_scrimmage",
                        "no ball track at snap and no line-of-scrimmage column", **ctx)
        diagnostics.account("play_skipped", len(recs))
        return []
    if ball:
        snap_y = ball[0].y
    else:
        snap_y = next((r.snap_y for r in recs if r.snap_y is not None), None)
        if snap_y is None:
            diagnostics.add("select", "midline_reference",
                            "no ball track or snap y; mirroring about the midline", **ctx)
            snap_y = FIELD_WIDTH / 2

    eligible = set(config.eligible_positions)
    by_player = defaultdict(list)
    for r in recs:
        if r.is_ball:
            diagnostics.account("ball")
        elif r.position_code not in eligible:
            diagnostics.account("ineligible_position")
        else:
            by_player[r.player_id].append(r)

    direction = next((_direction(r.play_direction) for r in recs
                      if _direction(r.play_direction) is not None), None)
    if direction is None:
        moves = []
        for prs in by_player.values():
            after = [r.x for r in sorted(prs, key=lambda r: r.frame_index)
                     if r.frame_index >= snap]
            if len(after) >= 2:
                moves.append(after[-1] - after[0])
        direction = TOWARD_LOW_X if moves and np.mean(moves) < 0 else TOWARD_HIGH_X
        diagnostics.add("select", "direction_inferred", f"play direction inferred as {direction}", **ctx)

    trajectories = []
    for player_id, prs in by_player.items():
        prs.sort(key=lambda r: (r.frame_index, r.row))
        kept = [prs[0]]
        for r in prs[1:]:
            if r.frame_index == kept[-1].frame_index:
                diagnostics.add("select", "duplicate_frame",
                                f"duplicate frame {r.frame_index} dropped",
                                row=r.row, player_id=player_id, **ctx)
                diagnostics.account("duplicate_frame")
            else:
                kept.append(r)
        if len(kept) < 2:
            diagnostics.add("select", "short_trajectory", "fewer than 2 frames",
                            player_id=player_id, **ctx)
            diagnostics.account("trajectory_rejected", len(kept))
            continue
        first = kept[0]
        trajectories.append(Trajectory(
            game_id=game_id,
            play_id=play_id,
            player_id=player_id,
            display_name=first.display_name,
            position_code=first.position_code,
            frames=np.array([r.frame_index for r in kept], dtype=np.int64),
            xy=np.array([(r.x, r.y) for r in kept], dtype=float),
            events=tuple(frame_events.get(r.frame_index) for r in kept),
            line_of_scrimmage=float(los),
            play_direction=direction,
            ball_snap_y=float(snap_y),
        ))
    return trajectories


# ---------------------------------------------------------------------------
# transforms


def cut(traj, start_event=DEFAULT_START_EVENT, end_events=DEFAULT_END_EVENTS):
    """Keep frames from the first ``start_event`` through the next end event.

    Both boundary frames are kept. If no end event follows the start, the
    trajectory runs to its last frame and ``no_end_event`` is set.
    """
    events = traj.events
    try:
        start = events.index(start_event)
    except ValueError:
        raise CutError(f"{traj.key}: no {start_event!r} event") from None
    end_set = set(end_events)
    end = next((j for j in range(start + 1, len(events)) if events[j] in end_set), None)
    flagged = end is None
    stop = len(events) if flagged else end + 1
    if stop - start < 2:
        raise CutError(f"{traj.key}: fewer than 2 frames between start and end events")
    return replace(
        traj,
        frames=traj.frames[start:stop],
        xy=traj.xy[start:stop],
        events=events[start:stop],
        no_end_event=flagged,
    )


def standardize(traj):
    """Re-express field coordinates as (downfield, lateral) from the line of scrimmage.

    Plays moving toward low x are rotated by 180 degrees so that every route
    advances in the positive downfield direction. The ball's lateral snap
    position is transformed the same way.
    """
    if traj.standardized:
        return traj
    x, y = traj.xy[:, 0], traj.xy[:, 1]
    los = traj.line_of_scrimmage
    if traj.play_direction == TOWARD_HIGH_X:
        xy = np.column_stack([x - los, y])
        ball_y = traj.ball_snap_y
    else:
        xy = np.column_stack([los - x, FIELD_WIDTH - y])
        ball_y = FIELD_WIDTH - traj.ball_snap_y
    return replace(traj, xy=xy, ball_snap_y=ball_y, standardized=True)


def _snap(values):
    # round to the output grid, then turn -0.0 into 0.0
    return np.round(values / COORD_RESOLUTION) * COORD_RESOLUTION + 0.0


def mirror_and_origin(traj):
    """Flip the route onto the low-lateral side of the ball and anchor it at the origin.

    Receivers that line up at a larger lateral coordinate than the ball have
    their lateral offsets negated. Equality is not mirrored.
    """
    if not traj.standardized:
        raise InputError(f"{traj.key}: standardize before mirroring")
    span = traj.frames[-1] - traj.frames[0]
    if span <= 0:
        raise DegenerateDurationError(f"{traj.key}: trajectory spans a single frame")
    downfield = traj.xy[:, 0]
    lateral = traj.xy[:, 1] - traj.ball_snap_y
    mirrored = bool(traj.xy[0, 1] > traj.ball_snap_y)
    if mirrored:
        lateral = -lateral
    points = np.column_stack([downfield - downfield[0], lateral - lateral[0]])
    times = (traj.frames - traj.frames[0]) / span
    return NormalizedCurve(
        game_id=traj.game_id,
        play_id=traj.play_id,
        player_id=traj.player_id,
        position_code=traj.position_code,
        points=_snap(points),
        times=times.astype(float),
        was_mirrored=mirrored,
        display_name=traj.display_name,
    )


@dataclass
class PreprocessResult:
    curves: list
    diagnostics: Diagnostics
    flagged: set = field(default_factory=set)  # keys of curves without an end event

    @property
    def accounting(self):
        return dict(self.diagnostics.dispositions)


def preprocess(records, config=None, diagnostics=None):
    """Run selection, cut, standardize and mirror over parsed records.

    Every record ends up either in an emitted curve or in one of the
    disposition tallies of the returned diagnostics.
    """
    config = config or SelectionConfig()
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    curves, flagged = [], set()
    for traj in select_routes(records, config, diagnostics):
        try:
            cut_traj = cut(traj, config.start_event, config.end_events)
            curve = mirror_and_origin(standardize(cut_traj))
        except InputError as exc:
            diagnostics.add("transform", type(exc).__name__, str(exc),
                            game_id=traj.game_id, play_id=traj.play_id,
                            player_id=traj.player_id)
            diagnostics.account("trajectory_rejected", len(traj))
            continue
        if cut_traj.no_end_event:
            flagged.add(curve.key)
            diagnostics.add("transform", "no_end_event",
                            "no end event after the snap; kept through the last frame",
                            game_id=traj.game_id, play_id=traj.play_id,
                            player_id=traj.player_id)
        diagnostics.account("outside_cut", len(traj) - len(cut_traj))
        diagnostics.account("emitted", len(cut_traj))
        curves.append(curve)
    return PreprocessResult(curves, diagnostics, flagged)
