"""End-to-end checks of the ujoin command-line interface."""

import csv
import os

import pytest

from ujoin.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


@pytest.fixture
def dataset(tmp_path, capsys):
    prefix = os.fspath(tmp_path / "ds")
    assert main(["gen", "--n", "500", "--c", "3", "--s", "1",
                 "--seed", "3", "--out", prefix]) == 0
    capsys.readouterr()
    return f"{prefix}-L.urel", f"{prefix}-R.urel"


class TestGen:
    def test_writes_both_sides(self, tmp_path, capsys):
        prefix = os.fspath(tmp_path / "d")
        code, out = run(capsys, "gen", "--n", "100", "--out", prefix)
        assert code == 0
        assert os.path.exists(f"{prefix}-L.urel")
        assert os.path.exists(f"{prefix}-R.urel")
        assert "100 tuples" in out


class TestJoin:
    @pytest.mark.parametrize("algo", ["nl", "base", "sort", "tuple1", "tuple2", "index"])
    def test_every_algorithm_runs(self, algo, dataset, capsys):
        left, right = dataset
        code, out = run(capsys, "join", "--algo", algo,
                        "--left", left, "--right", right)
        assert code == 0
        assert "results=500" in out

    def test_auto_selects_and_reports(self, dataset, capsys):
        left, right = dataset
        code, out = run(capsys, "join", "--algo", "auto",
                        "--left", left, "--right", right, "--k", "10")
        assert code == 0
        assert "selected algorithm:" in out

    def test_top_k_with_trace(self, dataset, tmp_path, capsys):
        left, right = dataset
        trace = os.fspath(tmp_path / "trace.csv")
        code, out = run(capsys, "join", "--algo", "sort", "--left", left,
                        "--right", right, "--k", "25", "--cold",
                        "--trace", trace, "--print-pairs")
        assert code == 0
        assert out.count("\t") == 25
        with open(trace, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and int(rows[-1]["tuples_emitted"]) == 25


class TestStats:
    def test_prints_statistics(self, dataset, capsys):
        left, right = dataset
        code, out = run(capsys, "stats", "--rel", left, "--partner", right)
        assert code == 0
        assert "n=500" in out and "avg_card=" in out


class TestBench:
    def test_family_run_with_plot_data(self, tmp_path, capsys):
        out_dir = os.fspath(tmp_path / "bench")
        code, out = run(capsys, "bench", "--family", "cardinality",
                        "--grid", "100,200", "--algos", "nl,sort",
                        "--out", out_dir, "--plot-data")
        assert code == 0
        assert os.path.exists(os.path.join(out_dir, "cardinality.csv"))
        assert os.path.exists(os.path.join(out_dir, "time_vs_n.csv"))


class TestCalibrate:
    def test_writes_config(self, tmp_path, capsys):
        cfg = os.fspath(tmp_path / "calib.cfg")
        code, out = run(capsys, "calibrate", "--out", cfg, "--n", "1000",
                        "--work-dir", os.fspath(tmp_path / "work"))
        assert code == 0
        assert os.path.exists(cfg)


class TestLoad:
    def test_builds_heap_file_from_csv(self, tmp_path, capsys):
        src = tmp_path / "rows.csv"
        src.write_text("1,{3|5}\n2,4\n")
        out = os.fspath(tmp_path / "rows.urel")
        code, text = run(capsys, "load", "--csv", os.fspath(src), "--out", out)
        assert code == 0
        assert "2 tuples" in text
