"""Command-line interface.

Each subcommand reads its inputs from files and writes its outputs, plus
the effective ``run_config.json``, into ``--out``. Passing that file back
with ``--config`` repeats the run.

Exit codes: 0 success, 1 input or configuration error, 2 numerical failure.
Errors are reported on stderr as one JSON object.
"""

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from . import io as rio
from .errors import ConsistencyError, InputError, NumericalError, VersionError
from .ingest import ColumnMapping, Diagnostics, SelectionConfig, parse_tracking, preprocess
from .labeling import (
    apply_label_map,
    identity_label_map,
    load_label_map,
    render_cluster_means,
    usage_report,
    validate_label_map,
)
from .mixture import MixtureConfig, assign_all, fit
from .synth import TRACKING_COLUMNS, generate, load_templates, simulate_tracking

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


@dataclass
class RunConfig:
    """Effective settings of one run: defaults, then config file, then flags."""

    command: str = ""
    inputs: dict = field(default_factory=dict)
    out: str = "."
    schema: dict = field(default_factory=lambda: ColumnMapping().to_dict())
    selection: dict = field(default_factory=lambda: SelectionConfig().to_dict())
    delimiter: str = ","
    k: int = 30
    degree: int = 5
    tol: float = 1e-6
    max_iters: int = 100
    steps: int | None = None
    seed: int = 0
    threads: int | None = None
    memberships_format: str = "long"
    group_by: str = "position"
    wr_count: int | None = None
    report_format: str = "csv"
    n: int = 1000
    noise: list = field(default_factory=lambda: [0.5, 0.5])
    m_min: int = 20
    m_max: int = 60
    synth_format: str = "curves"

    @classmethod
    def load(cls, path):
        data = rio.read_json(path)
        if not isinstance(data, dict):
            raise InputError(f"{path}: config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise InputError(f"{path}: unknown config keys {unknown}")
        return data

    def to_dict(self):
        return dataclasses.asdict(self)

    @property
    def column_mapping(self):
        return ColumnMapping.from_dict({**ColumnMapping().to_dict(), **self.schema})

    @property
    def selection_config(self):
        return SelectionConfig.from_dict({**SelectionConfig().to_dict(), **self.selection})

    def mixture_config(self):
        return MixtureConfig(max_iters=self.max_iters, tol=self.tol, seed=self.seed,
                             steps=self.steps, threads=self.resolved_threads())

    def resolved_threads(self):
        return self.threads if self.threads is not None else (os.cpu_count() or 1)


def _noise(text):
    parts = [float(v) for v in str(text).split(",")]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("noise is SIGMA or SX,SY")
    return parts


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"usage: {message}")


def build_parser():
    p = _Parser(prog="routemix", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, inputs):
        for name in inputs:
            sp.add_argument(name, nargs="?", default=None)
        sp.add_argument("--config", help="JSON config; flags override it")
        sp.add_argument("--out", default=None, help="output directory")

    sp = sub.add_parser("preprocess", help="tracking CSV -> normalized curves")
    common(sp, ["input"])
    sp.add_argument("--delimiter", default=None)

    sp = sub.add_parser("fit", help="fit the mixture to a curve table")
    common(sp, ["curves"])
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--degree", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    sp.add_argument("--steps", type=int, default=None, help="run exactly this many E-steps")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--memberships-format", dest="memberships_format",
                    choices=("long", "dense"), default=None)

    sp = sub.add_parser("assign", help="label curves with a fitted model")
    common(sp, ["model", "curves"])
    sp.add_argument("--degree", type=int, default=None, help="expected model degree")
    sp.add_argument("--threads", type=int, default=None)

    sp = sub.add_parser("report", help="route-group usage reports")
    common(sp, ["assignments"])
    sp.add_argument("--labels", default=None, help="label map JSON")
    sp.add_argument("--metadata", default=None, help="curve metadata JSON")
    sp.add_argument("--model", default=None, help="model file, to check label-map coverage")
    sp.add_argument("--group-by", dest="group_by", choices=("position", "player", "design"),
                    default=None)
    sp.add_argument("--wr-count", dest="wr_count", type=int, default=None)
    sp.add_argument("--format", dest="report_format", choices=("csv", "json"), default=None)

    sp = sub.add_parser("plot", help="SVG of the cluster mean routes")
    common(sp, ["model"])
    sp.add_argument("--labels", default=None)

    sp = sub.add_parser("synth", help="synthetic curves or raw tracking with known truth")
    common(sp, [])
    sp.add_argument("--templates", default=None)
    sp.add_argument("--n", type=int, default=None, help="curves, or plays with --format tracking")
    sp.add_argument("--noise", type=_noise, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--m-min", dest="m_min", type=int, default=None)
    sp.add_argument("--m-max", dest="m_max", type=int, default=None)
    sp.add_argument("--format", dest="synth_format", choices=("curves", "tracking"), default=None)
    return p


_INPUT_FLAGS = ("input", "curves", "model", "assignments", "labels", "metadata", "templates")


def resolve_config(args):
    values = {}
    if args.config:
        values.update(RunConfig.load(args.config))
    inputs = dict(values.get("inputs", {}))
    names = {f.name for f in dataclasses.fields(RunConfig)}
    for name, value in vars(args).items():
        if value is None or name in ("config", "verbose"):
            continue
        if name in _INPUT_FLAGS:
            inputs[name] = value
        elif name in names:
            values[name] = value
    values["command"] = args.command
    values["inputs"] = inputs
    if "out" not in values:
        values["out"] = "."
    return RunConfig(**values)


def _require(cfg, name):
    path = cfg.inputs.get(name)
    if not path:
        raise InputError(f"missing required input {name!r}")
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    return path


def _out(cfg, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _sidecar(curves_path):
    base = os.path.splitext(curves_path)[0]
    for cand in (base + "_meta.json", os.path.join(os.path.dirname(curves_path), "curves_meta.json")):
        if os.path.exists(cand):
            return cand
    return None


def _read_curves(path):
    if os.path.getsize(path) == 0:
        return []
    meta = _sidecar(path)
    return rio.read_curves(path, rio.read_metadata(meta) if meta else None)


def _summary(**kw):
    print(json.dumps(kw, sort_keys=True))


# ---------------------------------------------------------------------------
# subcommands


def cmd_preprocess(cfg):
    path = _require(cfg, "input")
    diagnostics = Diagnostics()
    with open(path, "rb") as fh:
        records = parse_tracking(fh, cfg.column_mapping, cfg.delimiter, diagnostics)
    result = preprocess(records, cfg.selection_config, diagnostics)
    rio.write_curves(_out(cfg, "curves.csv"), result.curves)
    rio.write_metadata(_out(cfg, "curves_meta.json"), result.curves, result.flagged)
    rio.write_diagnostics(_out(cfg, "diagnostics.jsonl"), diagnostics)
    rejected = sum(1 for e in diagnostics.entries if e["stage"] == "parse")
    _summary(records=len(records), rows_rejected=rejected, curves=len(result.curves),
             dispositions=result.accounting)
    return result


def cmd_fit(cfg):
    curves = _read_curves(_require(cfg, "curves"))
    try:
        model, pi = fit(curves, cfg.k, cfg.degree, cfg.mixture_config())
    except ConsistencyError as exc:
        state = {"message": str(exc), "iteration": exc.state.get("iteration"),
                 "history": exc.state.get("history")}
        for name in ("previous_model", "model"):
            if name in exc.state:
                state[name] = rio.model_to_dict(exc.state[name])
        rio.write_json(_out(cfg, "failure_state.json"), state)
        raise
    rio.save_model(_out(cfg, "model.json"), model)
    rio.write_memberships(_out(cfg, "memberships.csv"), [c.key for c in curves], pi,
                          cfg.memberships_format)
    rio.write_fit_log(_out(cfg, "fit_log.csv"), model.fit_history)
    _summary(curves=len(curves), K=model.K, P=model.degree, steps=len(model.fit_history),
             log_likelihood=model.fit_history[-1], converged=model.converged)
    return model


def cmd_assign(cfg, expected_degree=None):
    model = rio.load_model(_require(cfg, "model"))
    if expected_degree is not None and expected_degree != model.degree:
        raise VersionError(f"model has degree {model.degree}, expected {expected_degree}")
    curves = _read_curves(_require(cfg, "curves"))
    assignments = assign_all(model, curves, cfg.resolved_threads())
    rio.write_assignments(_out(cfg, "assignments.csv"), assignments)
    _summary(curves=len(curves), assignments=len(assignments))
    return assignments


def cmd_report(cfg):
    assignments = rio.read_assignments(_require(cfg, "assignments"))
    metadata = rio.read_metadata(_require(cfg, "metadata"))
    K = None
    if cfg.inputs.get("model"):
        K = rio.load_model(_require(cfg, "model")).K
    if cfg.inputs.get("labels"):
        label_map = load_label_map(_require(cfg, "labels"))
    else:
        label_map = identity_label_map(K or max((a.cluster for a in assignments), default=0))
    labeled = apply_label_map(assignments, label_map, K)
    report = usage_report(labeled, metadata, cfg.group_by, cfg.wr_count)
    rio.write_assignments(_out(cfg, "labeled_assignments.csv"), assignments,
                          [a.route_group for a in labeled])
    name = f"report_{cfg.group_by}.{cfg.report_format}"
    with open(_out(cfg, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv() if cfg.report_format == "csv" else report.to_json())
    _summary(assignments=len(assignments), rows=len(report.rows), total=report.total)
    return report


def cmd_plot(cfg):
    model = rio.load_model(_require(cfg, "model"))
    label_map = None
    if cfg.inputs.get("labels"):
        label_map = load_label_map(_require(cfg, "labels"))
        validate_label_map(label_map, model.K)
    svg = render_cluster_means(model, label_map)
    with open(_out(cfg, "cluster_means.svg"), "w", encoding="utf-8") as fh:
        fh.write(svg)
    _summary(components=model.K)
    return svg


def cmd_synth(cfg):
    tpath = cfg.inputs.get("templates")
    templates = load_templates(_require(cfg, "templates") if tpath else None)
    if cfg.synth_format == "tracking":
        rows, truth = simulate_tracking(templates, cfg.n, cfg.seed)
        with open(_out(cfg, "tracking.csv"), "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, TRACKING_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        rio.write_truth(_out(cfg, "truth.csv"), list(truth), list(truth.values()), templates)
        _summary(plays=cfg.n, rows=len(rows), routes=len(truth))
        return rows, truth
    corpus = generate(templates, cfg.n, cfg.noise, (cfg.m_min, cfg.m_max), cfg.seed)
    rio.write_curves(_out(cfg, "curves.csv"), corpus.curves)
    rio.write_metadata(_out(cfg, "curves_meta.json"), corpus.curves)
    rio.write_truth(_out(cfg, "truth.csv"), [c.key for c in corpus.curves], corpus.truth,
                    templates)
    _summary(curves=len(corpus.curves))
    return corpus


COMMANDS = {
    "preprocess": cmd_preprocess,
    "fit": cmd_fit,
    "assign": cmd_assign,
    "report": cmd_report,
    "plot": cmd_plot,
    "synth": cmd_synth,
}


def run(argv=None):
    """Parse ``argv`` and run one subcommand; errors propagate."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    expected_degree = args.degree if args.command == "assign" else None
    if args.command == "assign":
        args.degree = None
    cfg = resolve_config(args)
    os.makedirs(cfg.out, exist_ok=True)
    if args.command == "assign":
        result = cmd_assign(cfg, expected_degree)
    else:
        result = COMMANDS[args.command](cfg)
    rio.write_json(os.path.join(cfg.out, "run_config.json"), cfg.to_dict())
    return result


def main(argv=None):
    try:
        run(argv)
    except (InputError, OSError) as exc:
        _error(exc, EXIT_INPUT)
        return EXIT_INPUT
    except NumericalError as exc:
        _error(exc, EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    return EXIT_OK


def _error(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
