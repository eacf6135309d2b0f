import json

import numpy as np
import pytest

from dtwmetric.cli import main, read_config
from dtwmetric.dataset import write_ucr_file
from dtwmetric.descriptors import DescriptorConfig, extract_all
from dtwmetric.dtw import align

from conftest import toy_series

SMALL = ["--window-length", "7", "--k-clusters", "3"]


@pytest.fixture
def data_dir(tmp_path, toy_dataset):
    root = tmp_path / "data"
    for name, ds in (("ToyA", toy_dataset),):
        (root / name).mkdir(parents=True)
        write_ucr_file(root / name / f"{name}_TRAIN.tsv", ds.train)
        write_ucr_file(root / name / f"{name}_TEST.tsv", ds.test)
    return root


def _split(data_dir, name="ToyA"):
    return ["--train", str(data_dir / name / f"{name}_TRAIN.tsv"),
            "--test", str(data_dir / name / f"{name}_TEST.tsv")]


def _series_file(path, values):
    path.write_text(" ".join(repr(float(v)) for v in values) + "\n")
    return str(path)


def test_align_identical(tmp_path, capsys):
    f = _series_file(tmp_path / "a.txt", np.sin(np.arange(20.0)))
    assert main(["align", f, f, "--out", str(tmp_path / "o")]) == 0
    assert "distance=0.0" in capsys.readouterr().out
    assert (tmp_path / "o" / "distance.txt").read_text() == "0.0\n"


def test_align_matches_library(tmp_path):
    a, b = toy_series(1, seed=3)[0]
    fa, fb = _series_file(tmp_path / "a.txt", a), _series_file(tmp_path / "b.txt", b)
    out = tmp_path / "o"
    assert main(["align", fa, fb, "--descriptor", "derivative", "--window-length", "5",
                 "--out", str(out)]) == 0
    cfg = DescriptorConfig(kind="derivative", window_length=5)
    res = align(extract_all(a, cfg), extract_all(b, cfg))
    assert float((out / "distance.txt").read_text()) == res.distance
    rows = (out / "path.csv").read_text().splitlines()[1:]
    assert [tuple(map(int, r.split(","))) for r in rows] == [tuple(p) for p in res.path]


def test_align_missing_file(tmp_path):
    assert main(["align", str(tmp_path / "nope"), str(tmp_path / "nope"),
                 "--out", str(tmp_path)]) != 0


def test_fit_then_classify(tmp_path, data_dir):
    out = tmp_path / "run"
    assert main(["fit", *_split(data_dir), *SMALL, "--out", str(out)]) == 0
    model = json.loads((out / "model.json").read_text())
    assert len(model["omega"]) == 6
    assert main(["classify", *_split(data_dir), "--model", str(out / "model.json"),
                 "--out", str(out)]) == 0
    err = float((out / "error_rate.txt").read_text())
    assert 0.0 <= err <= 1.0
    assert (out / "predictions.csv").read_text().startswith("test_id,true,pred")


def test_classify_baseline(tmp_path, data_dir):
    assert main(["classify", *_split(data_dir), "--baseline", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "error_rate.txt").exists()


def test_evaluate_fig5_two_conditions(tmp_path, data_dir):
    out = tmp_path / "ev"
    rc = main(["evaluate", "fig5", "--data-dir", str(data_dir), "--ks", "2,3",
               "--window-length", "7", "--out", str(out)])
    assert rc == 0
    rows = (out / "fig5.csv").read_text().splitlines()
    assert rows[0] == "dataset,condition,error_euclidean,error_learned"
    assert sorted(r.split(",")[1] for r in rows[1:]) == ["k=2", "k=3"]
    summary = json.loads((out / "fig5_summary.json").read_text())
    assert set(summary) == {"k=2", "k=3"}


def test_evaluate_skips_missing_dataset(tmp_path, data_dir):
    rc = main(["evaluate", "fig3", "--data-dir", str(data_dir), "--datasets", "ToyA,Missing",
               *SMALL, "--out", str(tmp_path)])
    assert rc == 0
    datasets = {r.split(",")[0] for r in (tmp_path / "fig3.csv").read_text().splitlines()[1:]}
    assert datasets == {"ToyA"}


def test_unknown_study_is_usage_error(tmp_path, data_dir, capsys):
    rc = main(["evaluate", "fig9", "--data-dir", str(data_dir), "--out", str(tmp_path)])
    assert rc == 1
    assert "usage:" in capsys.readouterr().err


def test_bad_flag_is_usage_error():
    assert main(["fit", "--k-clusters", "many"]) == 1


def test_missing_required_option():
    assert main(["fit", "--out", "x"]) == 1


def test_bad_data_exit_code(tmp_path):
    bad = tmp_path / "bad_TRAIN.tsv"
    bad.write_text("1\tfoo\t2\n")
    assert main(["fit", "--train", str(bad), "--out", str(tmp_path)]) == 2


def test_simulate(tmp_path, data_dir):
    out = tmp_path / "sim"
    rc = main(["simulate", "--train", *_split(data_dir)[1:2], "--n-pairs", "4",
               "--out", str(out)])
    assert rc == 0
    corpus = json.loads((out / "warped_pairs.json").read_text())
    assert len(corpus) == 4
    methods = [r.split(",")[0] for r in (out / "alignment_errors.csv").read_text().splitlines()]
    assert methods == ["method", "point", "raw", "derivative", "hog1d"]


def _run_all(out, data_dir):
    assert main(["fit", *_split(data_dir), *SMALL, "--seed", "3", "--out", str(out)]) == 0
    assert main(["classify", *_split(data_dir), "--model", str(out / "model.json"),
                 "--out", str(out)]) == 0
    assert main(["evaluate", "fig6", "--data-dir", str(data_dir), *SMALL,
                 "--out", str(out)]) == 0
    assert main(["simulate", *_split(data_dir)[:2], "--n-pairs", "3", "--seed", "3",
                 "--out", str(out)]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_outputs_byte_identical(tmp_path, data_dir):
    first = _run_all(tmp_path / "a", data_dir)
    second = _run_all(tmp_path / "b", data_dir)
    assert first.keys() == second.keys()
    assert first == second


def test_config_file_and_flag_override(tmp_path, data_dir):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nk_clusters = 2\nwindow-length = 7\nmu_grid = 0.3\n"
                   "normalize = true\n")
    assert read_config(cfg)["window_length"] == "7"
    out = tmp_path / "o"
    assert main(["fit", "--config", str(cfg), *_split(data_dir), "--out", str(out)]) == 0
    model = json.loads((out / "model.json").read_text())
    assert model["codebook"]["k"] == 2 and model["mu"] == 0.3
    assert model["descriptor_cfg"]["window_length"] == 7
    assert main(["fit", "--config", str(cfg), *_split(data_dir), "--k-clusters", "3",
                 "--out", str(out)]) == 0
    assert json.loads((out / "model.json").read_text())["codebook"]["k"] == 3


def test_bad_config(tmp_path, data_dir):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    assert main(["fit", "--config", str(cfg), *_split(data_dir)]) == 1
    cfg.write_text("just words\n")
    assert main(["fit", "--config", str(cfg), *_split(data_dir)]) == 1
    assert main(["fit", "--config", str(tmp_path / "missing.cfg"), *_split(data_dir)]) == 1
