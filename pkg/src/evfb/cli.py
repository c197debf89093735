"""evfb command line.

    evfb generate --config scene.json --out s.evs
    evfb filter --algo ts --in s.evs --params p.json --out mask.bin
    evfb bench --data scenes/ --algos all --out report/

Exit codes: 0 ok, 2 bad usage (unknown algorithm, invalid config), 1 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import configure_logging
from .evstream import read_stream, write_mask, write_stream

log = logging.getLogger("evfb")


class UsageError(Exception):
    """Bad algorithm name, config or parameter file; exit code 2."""


# ----------------------------------------------------------------- helpers

def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected vx,vy but got {text!r}") from None


def _range(text: str, integer: bool = False) -> list[float]:
    """lo:hi:steps (inclusive linspace) or lo:hi for integer ranges with step 1."""
    parts = text.split(":")
    try:
        if len(parts) == 2 and integer:
            lo, hi = int(parts[0]), int(parts[1])
            return [float(v) for v in range(lo, hi + 1)]
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"expected lo:hi:steps but got {text!r}") from None
    if steps < 2:
        raise argparse.ArgumentTypeError("a sweep needs at least two steps")
    return [float(v) for v in np.linspace(lo, hi, steps)]


def _load_json(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return data


def _filter_params(algo: str, path) -> dict:
    from .filters import UnknownFilterError, get_filter
    try:
        spec = get_filter(algo)
    except UnknownFilterError as exc:
        raise UsageError(str(exc.args[0])) from None
    try:
        return spec.params(**_load_json(path))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _feast_params(path, seed):
    from .feast import FeastParams
    d = _load_json(path)
    d.setdefault("seed", seed)
    try:
        p = FeastParams.from_dict(d)
        p.validate()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid FEAST parameters: {exc}") from None
    return p


def _dataset(args):
    from .bench import load_dataset, synthetic_dataset
    if args.data:
        return load_dataset(args.data)
    log.info("no --data given; generating %d synthetic scenes", args.scenes)
    return synthetic_dataset(args.scenes, args.seed)


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def _summary(mask, stream) -> str:
    from .metrics import score
    kept = int(np.count_nonzero(mask))
    line = f"kept {kept}/{len(stream)} events"
    if stream.labeled:
        s = score(mask, stream)
        line += f"  SR {s.sr:.2f}  NR {s.nr:.2f}  HPR {s.hpr:.2f}  DA {s.da:.2f}"
    return line


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    from .synthgen import ConfigError, SceneConfig, benchmark_configs, generate_scene
    d = _load_json(args.config)
    if args.seed_given:
        d["seed"] = args.seed
    try:
        if args.scenes > 1:
            d.pop("seed", None)
            cfgs = benchmark_configs(args.scenes, args.seed, **d)
        else:
            cfgs = [SceneConfig.from_dict(d)]
        for c in cfgs:
            c.validate()
    except (ConfigError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid scene config: {exc}") from None
    out = _out(args, "scene.evs")
    if args.scenes > 1:
        out.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(cfgs):
            s = generate_scene(c)
            write_stream(s, out / f"scene_{i:03d}.evs")
            print(f"{out / f'scene_{i:03d}.evs'}: {len(s)} events")
    else:
        s = generate_scene(cfgs[0])
        write_stream(s, out)
        print(f"{out}: {len(s)} events, label counts {np.bincount(s.label, minlength=4).tolist()}")
    return 0


def cmd_label(args) -> int:
    from .labeler import load_circles, run_labeling
    stream = read_stream(args.input)
    try:
        stars = load_circles(args.stars) if args.stars else []
        sats = load_circles(args.sats) if args.sats else []
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid circle list: {exc}") from None
    labeled = run_labeling(stream, stars, sats, args.theta_field, args.theta_sat, args.pct)
    out = _out(args, "labeled.evs")
    write_stream(labeled, out)
    counts = np.bincount(labeled.label, minlength=4)
    print(f"{out}: noise {counts[0]}  satellite {counts[1]}  hot {counts[2]}  star {counts[3]}")
    return 0


def cmd_cmax(args) -> int:
    from .cmax import SearchConfig, estimate_velocity, make_iwe
    stream = read_stream(args.input)
    search = SearchConfig(range=args.range, step=args.step, jobs=args.jobs)
    theta, c = estimate_velocity(stream, search, init=args.init)
    report = {"theta": [theta.vx, theta.vy], "contrast": c, "n_events": len(stream)}
    if args.iwe:
        iwe = make_iwe(stream, theta, search.bilinear)
        iwe.to_pgm(args.iwe)
        report["iwe"] = str(args.iwe)
    out = _out(args, "cmax.json")
    out.write_text(json.dumps(report, indent=1))
    print(f"theta* = ({theta.vx:.4g}, {theta.vy:.4g}) px/s  contrast {c:.6g}")
    return 0


def cmd_filter(args) -> int:
    from .filters import run_filter
    params = _filter_params(args.algo, args.params)
    stream = read_stream(args.input)
    window = None if args.window is None else int(round(args.window * 1e6))
    mask = run_filter(args.algo, stream, params, window)
    out = _out(args, "mask.bin")
    write_mask(mask, out)
    print(f"{args.algo}: {_summary(mask, stream)}")
    return 0


def cmd_feast_train(args) -> int:
    from .bench import load_dataset
    from .feast import feast_train
    params = _feast_params(args.params, args.seed)
    data = load_dataset(args.input)
    model = feast_train(data, params)
    out = _out(args, "banks.json")
    model.save(out)
    print(f"{out}: 2 x {params.N} neurons (r={params.r}) trained on {len(data)} recordings")
    return 0


def _load_model(path):
    from .feast import FeastModel
    try:
        return FeastModel.load(path)
    except FileNotFoundError:
        raise UsageError(f"bank file {path} not found") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: invalid bank file ({exc})") from None


def cmd_feast_infer(args) -> int:
    from .feast import feast_infer
    model = _load_model(args.banks)
    stream = read_stream(args.input)
    mask = feast_infer(stream, model, args.tau)
    out = _out(args, "mask.bin")
    write_mask(mask, out)
    print(f"feast: {_summary(mask, stream)}")
    return 0


def cmd_feast_classify(args) -> int:
    from .bench import write_roc_csv
    from .feast import classifier_roc, fit_classifier, split_recordings
    model = _load_model(args.banks)
    data = _dataset(args)
    train, test = split_recordings(data, args.seed)
    fit = fit_classifier(train, model, args.alpha)
    report = classifier_roc(model, fit, test, args.threshold_sweep)
    out = _out(args, "classifier")
    out.mkdir(parents=True, exist_ok=True)
    write_roc_csv(report, out / "roc_feast+classifier.csv")
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    b = report.best
    print(f"AUC {report.auc:.4f}; best threshold {b.param:.3f}: SR {b.sr:.2f} NR {b.nr:.2f} HPR {b.hpr:.2f} DA {b.da:.2f}")
    return 0


def cmd_bench(args) -> int:
    from .bench import format_table, resolve_algos, run_bench, write_report
    try:
        algos = resolve_algos(args.algos)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    fp = _feast_params(args.feast_params, args.seed) if any(a.startswith("feast") for a in algos) else None
    data = _dataset(args)
    result = run_bench(data, algos, seed=args.seed, jobs=args.jobs, feast_params=fp, alpha=args.alpha)
    table = write_report(result, _out(args, "report"), plots=not args.no_plots)
    print(format_table(result))
    print(f"wrote {table}")
    return 0


def cmd_roc(args) -> int:
    from .bench import write_roc_csv
    from .filters import get_filter
    from .metrics import roc_sweep_filter
    params = _filter_params(args.algo, args.params)
    spec = get_filter(args.algo)
    params.pop(spec.sweep.param, None)
    data = _dataset(args)
    report = roc_sweep_filter(args.algo, data, values=args.sweep, params=params, jobs=args.jobs)
    out = _out(args, f"roc_{args.algo}.csv")
    write_roc_csv(report, out)
    if args.svg:
        from .plots import plot_roc
        plot_roc([report], args.svg, title=args.algo)
    b = report.best
    print(f"{args.algo}: AUC {report.auc:.4f}; best {spec.sweep.param}={b.param:g}: "
          f"SR {b.sr:.2f} NR {b.nr:.2f} HPR {b.hpr:.2f} DA {b.da:.2f}")
    return 0


def cmd_window_sweep(args) -> int:
    from .filters import run_filter
    from .metrics import window_sweep
    params = _filter_params(args.algo, args.params)
    data = _dataset(args)
    rows = window_sweep(lambda s: run_filter(args.algo, s, params), data, args.sizes, jobs=args.jobs)
    out = _out(args, f"window_{args.algo}.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["size_s", "SR", "NR", "n_slices", "n_streams"])
        for r in rows:
            w.writerow([f"{r.size:g}", f"{r.sr:.6f}", f"{r.nr:.6f}", r.n_slices, r.n_streams])
    if args.svg:
        from .plots import plot_window_sweep
        plot_window_sweep({args.algo: rows}, args.svg, title=args.algo)
    for r in rows:
        print(f"{r.size:5g} s  SR {r.sr:6.2f}  NR {r.nr:6.2f}  ({r.n_slices} slices)")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="run seed (default 0)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker threads (default: cores, max 8)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")

    ap = argparse.ArgumentParser(prog="evfb", description="event-camera denoising benchmark", parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help, parent=sub):
        p = parent.add_parser(name, help=help, parents=[common])
        p.set_defaults(fn=fn)
        return p

    def data_args(p):
        p.add_argument("--data", help="directory of labeled streams (default: synthetic benchmark)")
        p.add_argument("--scenes", type=int, default=10, help="synthetic scenes when --data is absent")

    p = add("generate", cmd_generate, "synthetic labeled scene(s)")
    p.add_argument("--config", help="SceneConfig JSON")
    p.add_argument("--scenes", type=int, default=1, help="more than 1 writes a benchmark directory")

    p = add("label", cmd_label, "ground-truth labeling from circle lists")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--stars", help="star circles JSON")
    p.add_argument("--sats", help="satellite circles JSON")
    p.add_argument("--theta-field", type=_pair, default=(0.0, 0.0))
    p.add_argument("--theta-sat", type=_pair, default=(0.0, 0.0))
    p.add_argument("--pct", type=float, default=98.0, help="hot-pixel percentile")

    p = add("cmax", cmd_cmax, "contrast-maximisation velocity search")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--init", type=_pair, default=(0.0, 0.0))
    p.add_argument("--range", type=float, default=10.0)
    p.add_argument("--step", type=float, default=2.0)
    p.add_argument("--iwe", help="also write the warped event image as PGM")

    p = add("filter", cmd_filter, "run one logic-based filter")
    p.add_argument("--algo", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--params", help="parameter JSON")
    p.add_argument("--window", type=float, help="reset state every WINDOW seconds")

    feast = add("feast", None, "FEAST training, inference and classifier")
    fsub = feast.add_subparsers(dest="feast_command", required=True)
    p = add("train", cmd_feast_train, "train both neuron banks", fsub)
    p.add_argument("--in", dest="input", required=True, help="directory of labeled streams")
    p.add_argument("--params", help="FeastParams JSON")
    p = add("infer", cmd_feast_infer, "classify every event of a stream", fsub)
    p.add_argument("--banks", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--tau", type=float, help="decay override (us)")
    p = add("classify", cmd_feast_classify, "fit and sweep the linear classifier head", fsub)
    p.add_argument("--banks", required=True)
    p.add_argument("--alpha", type=float, default=1e-6)
    p.add_argument("--threshold-sweep", type=_range, default=_range("0:1:50"))
    data_args(p)

    p = add("bench", cmd_bench, "ROC benchmark of several algorithms")
    p.add_argument("--algos", default="all", help="'all' or a comma list")
    p.add_argument("--feast-params", help="FeastParams JSON")
    p.add_argument("--alpha", type=float, default=1e-6)
    p.add_argument("--no-plots", action="store_true")
    data_args(p)

    p = add("roc", cmd_roc, "ROC sweep of one filter")
    p.add_argument("--algo", required=True)
    p.add_argument("--params", help="fixed parameters JSON")
    p.add_argument("--sweep", type=_range, help="lo:hi:steps (default: the filter's registered sweep)")
    p.add_argument("--svg")
    data_args(p)

    p = add("window-sweep", cmd_window_sweep, "SR/NR against window size")
    p.add_argument("--algo", required=True)
    p.add_argument("--params", help="parameter JSON")
    p.add_argument("--sizes", type=lambda s: _range(s, integer=True), default=[float(v) for v in range(1, 21)])
    p.add_argument("--svg")
    data_args(p)
    return ap


def main(argv=None) -> int:
    configure_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    args.seed_given = hasattr(args, "seed")
    args.seed = getattr(args, "seed", 0)
    args.jobs = max(1, getattr(args, "jobs", min(os.cpu_count() or 1, 8)))
    args.out = getattr(args, "out", None)
    if args.fn is None:
        ap.error("missing subcommand")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"evfb: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported with context, traceback at debug level
        log.debug("traceback", exc_info=True)
        print(f"evfb {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
