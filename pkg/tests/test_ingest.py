import io

import numpy as np
import pytest
from _tracking import as_stream, player_rows, rotate_rows, route_play, to_csv

from routemix.errors import CutError, DegenerateDurationError, InputError, SchemaError
from routemix.ingest import (
    TOWARD_HIGH_X,
    TOWARD_LOW_X,
    ColumnMapping,
    Diagnostics,
    NormalizedCurve,
    SelectionConfig,
    Trajectory,
    cut,
    mirror_and_origin,
    parse_tracking,
    preprocess,
    select_routes,
    standardize,
)


def _traj(xy, frames=None, events=None, los=70.0, direction=TOWARD_HIGH_X, ball_y=26.65):
    xy = np.asarray(xy, dtype=float)
    frames = np.arange(1, len(xy) + 1) if frames is None else np.asarray(frames)
    events = tuple(events) if events is not None else (None,) * len(xy)
    return Trajectory("g", "p", "1", "A", "WR", frames, xy, events, los, direction, ball_y)


class TestParse:
    def test_three_rows(self):
        rows = player_rows("1", "1", "5", "WR", [10, 11, 12], [20, 20, 20], {})
        assert len(parse_tracking(as_stream(rows))) == 3

    def test_missing_column(self):
        rows = player_rows("1", "1", "5", "WR", [10, 11], [20, 20], {})
        with pytest.raises(SchemaError) as err:
            parse_tracking(as_stream(rows, drop=("x",)))
        assert err.value.column == "x"
        assert "'x'" in str(err.value)

    def test_out_of_bounds_row_dropped(self):
        rows = player_rows("1", "1", "5", "WR", [10, 999, 12], [20, 20, 20], {})
        diag = Diagnostics()
        recs = parse_tracking(as_stream(rows), diagnostics=diag)
        assert [r.frame_index for r in recs] == [1, 3]
        assert len(diag) == 1 and diag.entries[0]["row"] == 2

    def test_empty_file(self):
        with pytest.raises(InputError):
            parse_tracking(io.BytesIO(b""))

    def test_ball_and_missing_events(self):
        rows = route_play()
        recs = parse_tracking(as_stream(rows))
        assert any(r.is_ball for r in recs)
        assert {r.event for r in recs} == {None, "ball_snap", "pass_forward", "pass_outcome_caught"}

    def test_custom_schema_and_delimiter(self):
        text = "g;p;id;nm;pos;fr;X;Y;ev\n1;2;3;A;wr;1;10.5;20;None\n"
        schema = ColumnMapping(game_id="g", play_id="p", player_id="id", display_name="nm",
                               position_code="pos", frame_index="fr", x="X", y="Y", event="ev")
        (rec,) = parse_tracking(io.StringIO(text), schema, delimiter=";")
        assert (rec.player_id, rec.position_code, rec.x, rec.event) == ("3", "WR", 10.5, None)


class TestSelect:
    def test_position_filter(self):
        recs = parse_tracking(as_stream(route_play()))
        (traj,) = select_routes(recs)
        assert traj.position_code == "WR"
        assert traj.line_of_scrimmage == 50.0
        assert traj.ball_snap_y == 26.65

    def test_no_pass_event(self):
        recs = parse_tracking(as_stream(route_play(pass_event=None)))
        assert select_routes(recs) == []

    def test_counting(self):
        five = tuple((str(100 + j), pos, -3.0 * (j + 1)) for j, pos in
                     enumerate(["WR", "WR", "TE", "RB", "FB"]))
        rows = route_play(play="1", receivers=five) + route_play(play="2", receivers=five)
        assert len(select_routes(parse_tracking(as_stream(rows)))) == 10

    def test_no_snap_skipped_with_diagnostic(self):
        rows = route_play()
        for r in rows:
            if r["event"] == "ball_snap":
                r["event"] = "None"
        diag = Diagnostics()
        assert select_routes(parse_tracking(as_stream(rows)), diagnostics=diag) == []
        assert diag.entries[0]["code"] == "no_snap"

    def test_duplicate_frames_keep_first(self):
        rows = route_play()
        wr = [r for r in rows if r["nflId"] == "101"]
        dup = dict(wr[4], x=wr[4]["x"] + 1.0)
        diag = Diagnostics()
        (traj,) = select_routes(parse_tracking(as_stream(rows + [dup])), diagnostics=diag)
        assert len(traj) == len(wr)
        assert traj.xy[4, 0] == wr[4]["x"]
        assert any(e["code"] == "duplicate_frame" for e in diag.entries)

    def test_direction_inferred_without_column(self):
        rows = rotate_rows(route_play())
        for r in rows:
            r["playDirection"] = ""
        diag = Diagnostics()
        (traj,) = select_routes(parse_tracking(as_stream(rows)), diagnostics=diag)
        assert traj.play_direction == TOWARD_LOW_X
        assert any(e["code"] == "direction_inferred" for e in diag.entries)

    def test_los_column_fallback_when_ball_missing(self):
        rows = [dict(r, los="50", sy="20") for r in route_play() if r["nflId"] != "NA"]
        schema = ColumnMapping(line_of_scrimmage="los", snap_y="sy")
        cols = list(rows[0])
        recs = parse_tracking(io.StringIO(to_csv(rows, columns=cols)), schema)
        (traj,) = select_routes(recs)
        assert (traj.line_of_scrimmage, traj.ball_snap_y) == (50.0, 20.0)

    def test_midline_fallback(self):
        rows = [r for r in route_play() if r["nflId"] != "NA"]
        schema = ColumnMapping(line_of_scrimmage="los")
        rows = [dict(r, los="50") for r in rows]
        recs = parse_tracking(io.StringIO(to_csv(rows, columns=list(rows[0]))), schema)
        (traj,) = select_routes(recs)
        assert traj.ball_snap_y == pytest.approx(53.3 / 2)


class TestCut:
    def _events(self, n, marks):
        return [marks.get(f) for f in range(1, n + 1)]

    def test_snap_to_tackle(self):
        tr = _traj(np.zeros((10, 2)) + 10, events=self._events(10, {3: "ball_snap", 8: "tackle"}))
        out = cut(tr)
        assert list(out.frames) == [3, 4, 5, 6, 7, 8]
        assert not out.no_end_event

    def test_no_end_event_flagged(self):
        tr = _traj(np.zeros((10, 2)) + 10, events=self._events(10, {1: "ball_snap"}))
        out = cut(tr)
        assert list(out.frames) == list(range(1, 11))
        assert out.no_end_event

    def test_first_subsequent_end_wins(self):
        ev = self._events(10, {2: "ball_snap", 5: "pass_arrived", 7: "tackle"})
        assert cut(_traj(np.zeros((10, 2)) + 10, events=ev)).frames[-1] == 5

    def test_no_snap(self):
        with pytest.raises(CutError):
            cut(_traj(np.zeros((10, 2)) + 10))

    def test_custom_events(self):
        ev = self._events(6, {2: "line_set", 5: "whistle"})
        out = cut(_traj(np.zeros((6, 2)) + 10, events=ev), "line_set", {"whistle"})
        assert list(out.frames) == [2, 3, 4, 5]


class TestStandardize:
    def test_high_x(self):
        out = standardize(_traj([[75, 20], [76, 20]], los=70))
        np.testing.assert_allclose(out.xy[0], [5, 20])

    def test_low_x(self):
        out = standardize(_traj([[65, 20], [64, 20]], los=70, direction=TOWARD_LOW_X))
        np.testing.assert_allclose(out.xy[0], [5, 33.3])
        assert out.ball_snap_y == pytest.approx(53.3 - 26.65)

    def test_on_los(self):
        assert standardize(_traj([[70, 20], [71, 20]], los=70)).xy[0, 0] == 0.0


class TestMirror:
    def _std(self, lateral, ball=26.65, n=None):
        lateral = np.asarray(lateral, dtype=float)
        n = len(lateral)
        xy = np.column_stack([70 + np.arange(n, dtype=float), lateral])
        return standardize(_traj(xy, ball_y=ball))

    def test_left_side_not_mirrored(self):
        ball = 26.65
        lat = ball - 8 - np.array([0.0, 0.0, 1.0, 3.0, 6.0])  # breaks toward low lateral
        curve = mirror_and_origin(self._std(lat, ball))
        assert not curve.was_mirrored
        np.testing.assert_array_equal(curve.points[0], [0, 0])
        assert curve.points[-1, 1] == pytest.approx(-6.0)

    def test_right_side_mirror_image(self):
        ball = 26.65
        off = np.array([0.0, 0.0, 1.0, 3.0, 6.0])
        left = mirror_and_origin(self._std(ball - 8 - off, ball))
        right = mirror_and_origin(self._std(ball + 8 + off, ball))
        assert right.was_mirrored
        np.testing.assert_array_equal(left.points, right.points)

    def test_tie_not_mirrored(self):
        curve = mirror_and_origin(self._std([26.65, 27.0, 28.0], 26.65))
        assert not curve.was_mirrored
        assert curve.points[-1, 1] == pytest.approx(1.35)

    def test_time_normalization(self):
        curve = mirror_and_origin(self._std(np.full(42, 10.0)))
        np.testing.assert_allclose(curve.times, np.arange(42) / 41)
        assert curve.times[0] == 0.0 and curve.times[-1] == 1.0

    def test_uneven_frames(self):
        xy = np.column_stack([[70.0, 71, 73], [10.0, 10, 10]])
        tr = standardize(_traj(xy, frames=[4, 5, 8]))
        np.testing.assert_allclose(mirror_and_origin(tr).times, [0, 0.25, 1])

    def test_requires_standardized(self):
        with pytest.raises(InputError):
            mirror_and_origin(_traj([[70, 1], [71, 1]]))

    def test_degenerate_duration(self):
        tr = standardize(_traj([[70, 1], [71, 1]]))
        object.__setattr__(tr, "frames", np.array([3, 3]))
        with pytest.raises(DegenerateDurationError):
            mirror_and_origin(tr)


class TestPipeline:
    def _run(self, rows, config=None):
        diag = Diagnostics()
        recs = parse_tracking(as_stream(rows), diagnostics=diag)
        return recs, preprocess(recs, config, diag)

    def test_mirror_pair_identical(self):
        recv = (("101", "WR", -8.13), ("102", "TE", -3.71))
        _, a = self._run(route_play(receivers=recv))
        _, b = self._run(route_play(receivers=recv, mirror=True))
        for ca, cb in zip(a.curves, b.curves):
            assert ca.points.tobytes() == cb.points.tobytes()
            assert ca.times.tobytes() == cb.times.tobytes()
            assert not ca.was_mirrored and cb.was_mirrored

    def test_rotated_play_identical(self):
        rows = route_play(los=37.41, ball_y=23.87, receivers=(("101", "WR", -11.3),
                                                              ("102", "WR", 6.2)))
        _, a = self._run(rows)
        _, b = self._run(rotate_rows(rows))
        assert len(a.curves) == 2
        for ca, cb in zip(a.curves, b.curves):
            assert ca.points.tobytes() == cb.points.tobytes()
            assert ca.was_mirrored == cb.was_mirrored

    def test_origin_and_time_span(self):
        _, res = self._run(route_play(receivers=(("1", "WR", -5.0), ("2", "RB", 1.0))))
        for c in res.curves:
            assert isinstance(c, NormalizedCurve)
            np.testing.assert_array_equal(c.points[0], [0, 0])
            assert (c.times[0], c.times[-1]) == (0.0, 1.0)

    def test_record_conservation(self):
        rows = (route_play(play="1", receivers=(("1", "WR", -5.0), ("2", "QB", 0.5)))
                + route_play(play="2", pass_event=None)
                + route_play(play="3", end_event="None"))
        recs, res = self._run(rows)
        acc = res.accounting
        assert sum(acc.values()) == len(recs)
        assert acc["emitted"] == sum(len(c) for c in res.curves)
        assert acc["not_pass_play"] == len([r for r in rows if r["playId"] == "2"])
        assert any(k.startswith("1:3:") for k in res.flagged)

    def test_selection_closure(self):
        rows = route_play(receivers=(("1", "WR", -5.0), ("2", "TE", -2.0), ("3", "RB", 1.0)))
        cfg = SelectionConfig(eligible_positions=("WR", "TE"))
        _, res = self._run(rows, cfg)
        assert {c.position_code for c in res.curves} == {"WR", "TE"}
