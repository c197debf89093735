"""Benchmark harness: every algorithm's ROC on the test half of a dataset,
written out as a summary table plus per-algorithm curves."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .evstream import EventStream, read_stream
from .feast import (FeastParams, classifier_roc, feast_roc, feast_train, fit_classifier,
                    split_recordings)
from .filters import LOGICAL, get_filter
from .metrics import RocReport, roc_sweep_filter
from .synthgen import benchmark_configs, generate_scene

log = logging.getLogger(__name__)

LEARNED = ("feast", "feast+classifier")
ALGOS = LOGICAL + LEARNED
STREAM_SUFFIXES = (".evs", ".csv")


def resolve_algos(spec: str | Sequence[str]) -> list[str]:
    """'all' or a comma list; unknown names raise KeyError listing the registered set."""
    names = spec.split(",") if isinstance(spec, str) else list(spec)
    names = [n.strip() for n in names if n.strip()]
    if names == ["all"]:
        return list(ALGOS)
    bad = [n for n in names if n not in ALGOS]
    if bad:
        raise KeyError(f"unknown algorithm(s) {', '.join(bad)}; registered: {', '.join(ALGOS)}")
    return names


def load_dataset(directory, labeled: bool = True) -> list[EventStream]:
    """All stream files in a directory, in file-name order."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in STREAM_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no .evs/.csv streams in {directory}")
    streams = [read_stream(p) for p in files]
    if labeled and any(not s.labeled for s in streams):
        raise ValueError(f"{directory}: every stream must carry labels")
    return streams


def synthetic_dataset(n_scenes: int = 10, seed: int = 0, **overrides) -> list[EventStream]:
    return [generate_scene(c) for c in benchmark_configs(n_scenes, seed, **overrides)]


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


@dataclass
class BenchResult:
    reports: dict = field(default_factory=dict)   # algo -> RocReport
    seconds: dict = field(default_factory=dict)   # algo -> wall time

    def table_rows(self) -> list[list[str]]:
        rows = []
        for name, r in self.reports.items():
            b = r.best
            vals = [r.auc] + ([b.sr, b.nr, b.hpr, b.da] if b else [math.nan] * 4)
            rows.append([name] + [_fmt(v) for v in vals])
        return rows


def run_bench(dataset: Sequence[EventStream], algos: Sequence[str], seed: int = 0, jobs: int = 1,
              feast_params: Optional[FeastParams] = None, alpha: float = 1e-6,
              filter_params: Optional[dict] = None) -> BenchResult:
    """Score every algorithm on the same test half; FEAST trains on the other half."""
    train, test = split_recordings(dataset, seed)
    log.info("bench: %d train / %d test recordings", len(train), len(test))
    res = BenchResult()
    model = None
    for name in algos:
        t0 = time.perf_counter()
        if name in LOGICAL:
            params = (filter_params or {}).get(name)
            res.reports[name] = roc_sweep_filter(name, test, params=params, jobs=jobs)
        else:
            if model is None:
                fp = feast_params or FeastParams(seed=seed)
                model = feast_train(train, fp)
            if name == "feast":
                res.reports[name] = feast_roc(model, test, jobs=jobs)
            else:
                fit = fit_classifier(train, model, alpha)
                res.reports[name] = classifier_roc(model, fit, test)
        res.seconds[name] = time.perf_counter() - t0
        log.info("bench: %s AUC %.4f (%.1f s)", name, res.reports[name].auc, res.seconds[name])
    return res


def write_roc_csv(report: RocReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "FPR", "TPR", "SR", "NR", "HPR", "DA"])
        for p in report.points:
            w.writerow([repr(p.param)] + [_fmt(v) for v in (p.fpr, p.tpr, p.sr, p.nr, p.hpr, p.da)])


def write_table(result: BenchResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algo", "AUC", "SR", "NR", "HPR", "DA"])
        w.writerows(result.table_rows())


def write_report(result: BenchResult, out_dir, plots: bool = True) -> Path:
    """table.csv, roc_<algo>.csv, report.json and optionally roc_<algo>.svg / roc_all.svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(result, out / "table.csv")
    for name, r in result.reports.items():
        write_roc_csv(r, out / f"roc_{name}.csv")
    # timings stay out of the JSON so reports compare byte for byte
    (out / "report.json").write_text(
        json.dumps({n: r.to_dict() for n, r in result.reports.items()}, indent=1, sort_keys=True))
    if plots:
        from .plots import plot_roc
        for name, r in result.reports.items():
            plot_roc([r], out / f"roc_{name}.svg", title=name)
        plot_roc(list(result.reports.values()), out / "roc_all.svg")
    return out / "table.csv"


def format_table(result: BenchResult) -> str:
    lines = [f"{'algo':<18}{'AUC':>8}{'SR':>8}{'NR':>8}{'HPR':>8}{'DA':>8}{'time(s)':>9}"]
    for name, r in result.reports.items():
        b = r.best
        vals = [r.auc * 100] + ([b.sr, b.nr, b.hpr, b.da] if b else [math.nan] * 4)
        lines.append(f"{name:<18}" + "".join(f"{v:8.2f}" for v in vals) + f"{result.seconds.get(name, 0):9.1f}")
    return "\n".join(lines)
