import csv
import json

import numpy as np
import pytest

from evfb.cli import main
from evfb.evstream import read_mask, read_stream

SMALL = {"width": 160, "height": 120, "duration": 3.0, "n_stars": 6, "n_hot_pixels": 20,
         "n_satellites": 1, "background_rate": 0.05}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


@pytest.fixture
def scene(tmp_path, small_config):
    out = tmp_path / "scene.evs"
    assert main(["generate", "--config", str(small_config), "--seed", "1", "--out", str(out)]) == 0
    return out


@pytest.fixture
def scene_dir(tmp_path, small_config):
    out = tmp_path / "scenes"
    assert main(["generate", "--config", str(small_config), "--scenes", "4", "--out", str(out)]) == 0
    return out


def test_generate_then_filter(tmp_path, scene, capsys):
    mask_path = tmp_path / "mask.bin"
    assert main(["filter", "--algo", "crossconv", "--in", str(scene), "--out", str(mask_path)]) == 0
    mask = read_mask(mask_path)
    assert len(mask) == len(read_stream(scene))
    assert "crossconv: kept" in capsys.readouterr().out


def test_seed_after_or_before_subcommand(tmp_path, small_config):
    a, b = tmp_path / "a.evs", tmp_path / "b.evs"
    assert main(["--seed", "5", "generate", "--config", str(small_config), "--out", str(a)]) == 0
    assert main(["generate", "--config", str(small_config), "--seed", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_scene_directory(scene_dir):
    assert sorted(p.name for p in scene_dir.iterdir()) == [f"scene_{i:03d}.evs" for i in range(4)]


def test_unknown_algorithm_exit_2(scene, capsys):
    assert main(["filter", "--algo", "nope", "--in", str(scene)]) == 2
    assert "registered" in capsys.readouterr().err


def test_invalid_config_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"n_stars": -1}))
    assert main(["generate", "--config", str(p), "--out", str(tmp_path / "x.evs")]) == 2


def test_bad_filter_params_exit_2(scene, tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"bogus": 1}))
    assert main(["filter", "--algo", "fwf", "--in", str(scene), "--params", str(p)]) == 2


def test_missing_input_exit_1(tmp_path, capsys):
    assert main(["filter", "--algo", "fwf", "--in", str(tmp_path / "missing.evs")]) == 1
    assert "FileNotFoundError" in capsys.readouterr().err


def test_label_and_cmax(tmp_path, scene):
    out = tmp_path / "lab.evs"
    assert main(["label", "--in", str(scene), "--out", str(out)]) == 0
    assert read_stream(out).labeled
    rep = tmp_path / "c.json"
    iwe = tmp_path / "iwe.pgm"
    assert main(["cmax", "--in", str(scene), "--range", "4", "--step", "2", "--init=-2,0",
                 "--iwe", str(iwe), "--out", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert len(d["theta"]) == 2 and iwe.read_bytes().startswith(b"P")


def test_window_sweep_csv(tmp_path, scene_dir):
    out = tmp_path / "w.csv"
    assert main(["window-sweep", "--algo", "ts", "--data", str(scene_dir), "--sizes", "1:2",
                 "--out", str(out), "--svg", str(tmp_path / "w.svg")]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["size_s", "SR", "NR", "n_slices", "n_streams"] and len(rows) == 3
    assert (tmp_path / "w.svg").read_text().lstrip().startswith("<?xml")


def test_roc_with_explicit_sweep(tmp_path, scene_dir):
    out = tmp_path / "r.csv"
    assert main(["roc", "--algo", "crossconv", "--data", str(scene_dir), "--sweep", "1:20:5",
                 "--out", str(out)]) == 0
    assert len(list(csv.reader(out.open()))) == 6


def test_small_bench(tmp_path, scene_dir, capsys):
    out = tmp_path / "rep"
    assert main(["bench", "--algos", "fwf,crossconv", "--data", str(scene_dir), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "table.csv").open()))
    assert rows[0] == ["algo", "AUC", "SR", "NR", "HPR", "DA"] and [r[0] for r in rows[1:]] == ["fwf", "crossconv"]
    for name in ("fwf", "crossconv"):
        assert (out / f"roc_{name}.csv").exists() and (out / f"roc_{name}.svg").exists()
    assert (out / "roc_all.svg").exists()


def test_feast_pipeline(tmp_path, scene_dir, scene):
    params = tmp_path / "fp.json"
    params.write_text(json.dumps({"N": 4, "r": 5, "epochs": 1, "max_events_per_class": 3000}))
    banks = tmp_path / "banks.json"
    assert main(["feast", "train", "--in", str(scene_dir), "--params", str(params), "--out", str(banks)]) == 0
    mask = tmp_path / "m.bin"
    assert main(["feast", "infer", "--banks", str(banks), "--in", str(scene), "--out", str(mask)]) == 0
    assert len(read_mask(mask)) == len(read_stream(scene))
    out = tmp_path / "cls"
    assert main(["feast", "classify", "--banks", str(banks), "--data", str(scene_dir),
                 "--threshold-sweep", "0:1:5", "--out", str(out)]) == 0
    assert len(list(csv.reader((out / "roc_feast+classifier.csv").open()))) == 6


def test_missing_banks_exit_2(tmp_path, scene):
    assert main(["feast", "infer", "--banks", str(tmp_path / "none.json"), "--in", str(scene)]) == 2
