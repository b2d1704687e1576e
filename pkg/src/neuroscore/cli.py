"""Command-line front end: ``neuroscore <command> [options]``.

Every command writes a ``manifest.json`` next to its outputs when ``--out``
is given. Reports go to stdout as JSON unless ``--format csv`` is chosen.
Exit codes: 0 success, 2 IO/config, 3 numerical/degenerate, 4 data contract.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, fixtures
from .beamformer import SpatialFilter
from .core import (
    EpochSet,
    Recording,
    ScoreTable,
    detect_format,
    extract_epochs,
    load_mapping,
    read_epochset,
    read_matrix,
    read_recording,
    write_epochset,
    write_recording,
)
from .errors import ConfigError, FormatError, NeuroscoreError
from .metrics import (
    Gaussian,
    fid,
    fit_gaussian,
    inception_score,
    median_bandwidth,
    metric_report,
    mmd_squared,
    read_metric_table,
)
from .preprocess import PreprocessConfig, preprocess_epochs, preprocess_recording
from .scoring import compute_neuroscore, reconstructed_averaged_signal, write_signals_csv
from .stats import bootstrap_correlation, correlate_tables
from .synth import SynthSpec, generate, inject_artifacts

EXIT_OK, EXIT_IO, EXIT_NUMERIC, EXIT_DATA = 0, 2, 3, 4


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    argv: list
    config_paths: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seed: int = None
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = None
    notes: dict = field(default_factory=dict)

    def write(self, out_dir):
        self.finished = _now()
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=1))
        return path


class _Run:
    """Bookkeeping for one command: output directory, manifest, report."""

    def __init__(self, args, argv):
        self.args = args
        self.out = Path(args.out) if args.out else None
        self.manifest = RunManifest(args.command, list(argv), seed=args.seed)
        if args.config:
            self.manifest.config_paths.append(str(args.config))
        if self.out is not None:
            try:
                self.out.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError(f"cannot create output directory {self.out}: {exc}") from exc

    def path(self, name):
        if self.out is None:
            raise ConfigError(f"command '{self.args.command}' needs --out")
        p = self.out / name
        self.manifest.outputs.append(str(p))
        return p

    def input(self, p):
        self.manifest.inputs.append(str(p))
        return p

    def finish(self, report, csv_rows=None):
        if self.out is not None:
            self.manifest.write(self.out)
        if self.args.format == "csv" and csv_rows is not None:
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerows(csv_rows)
            sys.stdout.write(buf.getvalue())
        else:
            report = dict(report, manifest=asdict(self.manifest))
            sys.stdout.write(json.dumps(report, indent=1, default=_jsonable) + "\n")
        return EXIT_OK


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _config(args):
    return load_mapping(args.config) if args.config else {}


# --- commands ---------------------------------------------------------------

def cmd_simulate(args, run):
    spec = SynthSpec.from_mapping(_config(args))
    if args.seed is not None:
        spec = SynthSpec.from_mapping(dict(spec.to_dict(), seed=args.seed))
    run.manifest.seed = spec.seed
    data, truth = generate(spec, participant=args.participant, kind=args.kind)
    if isinstance(data, Recording):
        write_recording(data, run.path("recording.json"))
        run.manifest.outputs.append(str(run.out / "recording.bin"))
        es = extract_epochs(data, spec.window_ms)
    else:
        es = data
    if args.artifacts:
        es, _ = inject_artifacts(es, args.artifacts, args.artifact_uv, seed=spec.seed,
                                 truth=truth)
        run.manifest.notes["artifacts"] = {"count": args.artifacts,
                                           "magnitude_uv": args.artifact_uv,
                                           "injected_into": "epochs.json"}
    write_epochset(es, run.path("epochs.json"))
    run.manifest.outputs.append(str(run.out / "epochs.bin"))
    truth.to_csv(run.path("ground_truth.csv"))
    spec.save(run.path("synth_spec.json"))
    report = {"epochs": len(es), "counts": es.counts(), "contaminated":
              int(truth.contaminated.sum()), "seed": spec.seed,
              "participant": args.participant}
    rows = [["label", "count"]] + [[k, v] for k, v in es.counts().items()]
    return run.finish(report, rows)


def _load_signal(path):
    fmt = detect_format(path)
    if fmt == "neuroscore.recording":
        return read_recording(path)
    if fmt == "neuroscore.epochset":
        return read_epochset(path)
    raise FormatError(f"{path}: not a recording or epochset manifest (format {fmt!r})")


def cmd_preprocess(args, run):
    cfg = PreprocessConfig.from_mapping(_config(args))
    x = _load_signal(run.input(args.input))
    if isinstance(x, Recording):
        es, rep = preprocess_recording(x, cfg)
    else:
        es, rep = preprocess_epochs(x, cfg)
    write_epochset(es, run.path("epochs_clean.json"))
    run.manifest.outputs.append(str(run.out / "epochs_clean.bin"))
    rep.to_csv(run.path("rejection.csv"))
    run.manifest.notes["preprocess"] = cfg.to_dict()
    report = {"config": cfg.to_dict(), "rejection": rep.to_dict()}
    return run.finish(report, [["category", "retained", "rejected"]] + rep.rows())


_NEUROSCORE_KEYS = {"search_ms", "half_width_ms", "categories"}


def cmd_neuroscore(args, run):
    opts = _config(args)
    unknown = set(opts) - _NEUROSCORE_KEYS
    if unknown:
        raise ConfigError(f"unknown neuroscore config keys: {sorted(unknown)}")
    search = tuple(args.search_ms or opts.get("search_ms", (400.0, 600.0)))
    half = float(opts.get("half_width_ms", 100.0))
    cats = args.categories or opts.get("categories")
    filt = SpatialFilter.load(run.input(args.filter)) if args.filter else None
    results, per_participant = {}, {}
    for k, path in enumerate(args.inputs, start=1):
        es = _load_signal(run.input(path))
        if not isinstance(es, EpochSet):
            raise FormatError(f"{path}: neuroscore needs preprocessed epochs")
        res = compute_neuroscore(es, cats, search_ms=search, half_width_ms=half, filt=filt,
                                 per_category_filter=args.per_category_filter)
        pid = str(k)
        results[pid] = res
        per_participant[pid] = res.per_category
        if run.out is not None:
            suffix = "" if len(args.inputs) == 1 else f"_{pid}"
            res.save(run.path(f"result{suffix}.json"))
            if isinstance(res.filter_ref, SpatialFilter):
                res.filter_ref.save(run.path(f"filter{suffix}.json"))
                sig = reconstructed_averaged_signal(es, res.filter_ref, categories=cats)
                write_signals_csv(sig, run.path(f"signals{suffix}.csv"))
    table = ScoreTable.from_mapping(per_participant)
    if run.out is not None:
        table.to_csv(run.path("scores.csv"))
    report = {"scores": per_participant, "means": table.column_means(),
              "t_optimal_ms": {p: getattr(r.filter_ref, "t_optimal_ms", None)
                               for p, r in results.items()},
              "window_ms": {p: r.t_p300_ms for p, r in results.items()},
              "refit": filt is None}
    rows = [["participant", "category", "value"]] + [list(e) for e in table.entries()]
    return run.finish(report, rows)


def _gaussian(path):
    p = Path(path)
    if p.suffix.lower() == ".json" and detect_format(p) is None:
        try:
            return Gaussian.from_dict(json.loads(p.read_text()))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return fit_gaussian(read_matrix(p))


def cmd_metrics(args, run):
    m = args.metric
    if m == "is":
        value = inception_score(read_matrix(run.input(args.probs)))
        report = {"metric": "IS", "value": value, "reciprocal": 1.0 / value}
        rows = [["metric", "value"], ["IS", value]]
    elif m == "mmd":
        xr, xg = read_matrix(run.input(args.real)), read_matrix(run.input(args.generated))
        if args.sigma == "median":
            sigma, rule = median_bandwidth(xr, xg), "median"
        else:
            try:
                sigma, rule = float(args.sigma), "fixed"
            except ValueError:
                raise ConfigError(f"--sigma must be 'median' or a number, got {args.sigma}")
        value = mmd_squared(xr, xg, sigma=sigma, biased=args.biased)
        report = {"metric": "MMD2", "value": value, "sigma": sigma, "sigma_rule": rule,
                  "estimator": "biased" if args.biased else "unbiased"}
        rows = [["metric", "value", "sigma"], ["MMD2", value, sigma]]
    elif m == "fid":
        value = fid(_gaussian(run.input(args.real)), _gaussian(run.input(args.generated)))
        report = {"metric": "FID", "value": value}
        rows = [["metric", "value"], ["FID", value]]
    else:
        src = args.table or fixtures.path("scores")
        rep = metric_report(read_metric_table(run.input(src)),
                            reference=args.reference, tol=args.tol)
        if run.out is not None:
            rep.to_csv(run.path("ranking.csv"))
        report = rep.to_dict()
        rows = [["metric", "category", "score", "rank"]] + [list(r) for r in rep.rows()]
    if run.out is not None and m != "rank":
        run.path(f"{m}.json").write_text(json.dumps(report, indent=1))
    return run.finish(report, rows)


def cmd_correlate(args, run):
    neuro_path = args.neuro or fixtures.path("neuroscore")
    behav_path = args.behav or fixtures.path("behavioral")
    neuro = ScoreTable.from_csv(run.input(neuro_path))
    behav = ScoreTable.from_csv(run.input(behav_path))
    cats = ("DCGAN", "BEGAN", "PROGAN") if args.gan_only else None
    res = correlate_tables(neuro, behav, center=args.center, categories=cats)
    report = {"correlation": res.to_dict(), "center": args.center,
              "categories": list(cats) if cats else list(neuro.categories)}
    row = ["r", "p_two_tailed", "n", "df"]
    vals = [res.r, res.p_two_tailed, res.n, res.df]
    if args.bootstrap:
        seed = 0 if args.seed is None else args.seed
        run.manifest.seed = seed
        boot = bootstrap_correlation(neuro, behav, iterations=args.bootstrap, seed=seed,
                                     center=args.center, categories=cats)
        report["bootstrap"] = boot.to_dict()
        row += ["bootstrapped_p", "iterations", "seed"]
        vals += [boot.p_value, boot.iterations, seed]
    if run.out is not None:
        run.path("correlation.json").write_text(json.dumps(report, indent=1))
    return run.finish(report, [row, vals])


# --- argument parsing -------------------------------------------------------

def _common(suppress=False):
    # nested subcommands must not reset values given one level up
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d(None), help="JSON or TOML config file")
    p.add_argument("--seed", type=int, default=d(None),
                   help="random seed (non-negative integer)")
    p.add_argument("--out", default=d(None), help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default=d("json"),
                   help="report format on stdout")
    return p


def build_parser():
    common, nested = _common(), _common(suppress=True)
    parser = argparse.ArgumentParser(prog="neuroscore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic EEG")
    p.add_argument("--participant", type=int, default=0)
    p.add_argument("--kind", choices=("recording", "epochs"), default="recording")
    p.add_argument("--artifacts", type=int, default=0, help="epochs to contaminate")
    p.add_argument("--artifact-uv", type=float, default=300.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", parents=[common], help="CAR, bandpass, decimate, reject")
    p.add_argument("input", help="recording or epochset manifest")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("neuroscore", parents=[common], help="score preprocessed epochs")
    p.add_argument("inputs", nargs="+", help="epochset manifest(s), one per participant")
    p.add_argument("--filter", help="saved filter JSON; skips refitting")
    p.add_argument("--categories", nargs="+")
    p.add_argument("--search-ms", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--per-category-filter", action="store_true")
    p.set_defaults(func=cmd_neuroscore)

    p = sub.add_parser("metrics", parents=[common], help="IS, MMD, FID and rankings")
    msub = p.add_subparsers(dest="metric", required=True)
    m = msub.add_parser("is", parents=[nested])
    m.add_argument("probs", help="n x c probability matrix (CSV or matrix manifest)")
    m = msub.add_parser("mmd", parents=[nested])
    m.add_argument("real")
    m.add_argument("generated")
    m.add_argument("--sigma", default="median", help="'median' or a positive number")
    m.add_argument("--biased", action="store_true")
    m = msub.add_parser("fid", parents=[nested])
    m.add_argument("real", help="Gaussian JSON {mean, cov} or feature matrix")
    m.add_argument("generated")
    m = msub.add_parser("rank", parents=[nested])
    m.add_argument("table", nargs="?", help="CSV metric,category,score (default: bundled)")
    m.add_argument("--reference", default="Human")
    m.add_argument("--tol", type=float, default=0.0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("correlate", parents=[common], help="Pearson r and bootstrap")
    p.add_argument("neuro", nargs="?", help="ScoreTable CSV (default: bundled)")
    p.add_argument("behav", nargs="?", help="ScoreTable CSV (default: bundled)")
    p.add_argument("--center", action="store_true", help="centre within participant")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N")
    p.add_argument("--gan-only", action="store_true")
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    warnings.simplefilter("default")
    try:
        run = _Run(args, argv)
        return args.func(args, run)
    except NeuroscoreError as exc:
        print(f"neuroscore {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"neuroscore {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
