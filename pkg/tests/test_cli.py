import pandas as pd
import pytest

from main import EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestPartition:
    def test_one_action_benchmark(self, capsys, tmp_path):
        dump = tmp_path / "one.json"
        code, out, _ = run(capsys, "partition", "synthetic_one_action", "--no-raster", "--out", str(dump))
        assert code == EXIT_OK
        assert "parts: 2" in out
        assert "|PC^stay| = 2" in out
        assert ": true" in out
        assert dump.is_file()

    def test_raster_is_written_next_to_the_dump(self, capsys, tmp_path):
        dump = tmp_path / "chain.json"
        code, out, _ = run(capsys, "partition", "synthetic_chain", "--out", str(dump), "--resolution", "4")
        assert code == EXIT_OK
        assert (tmp_path / "chain.ppm").read_bytes().startswith(b"P6\n4 1\n")

    def test_truncation_is_reported(self, capsys, tmp_path):
        code, out, _ = run(capsys, "partition", "braking_car", "--depth", "1", "--no-raster", "--out", str(tmp_path / "c.json"))
        assert code == EXIT_OK
        assert "parts: 5" in out
        assert "(truncated)" in out

    def test_invalid_program(self, capsys, tmp_path):
        path = tmp_path / "broken.env"
        path.write_text("env broken\nstate x: real in [0, 1]\naction s\nbody\n  x = \nend\n", encoding="utf-8")
        code, _, err = run(capsys, "partition", str(path), "--no-raster")
        assert code == EXIT_USAGE
        assert "error:" in err

    def test_unknown_benchmark(self, capsys):
        code, _, _ = run(capsys, "partition", "frozen_lake", "--no-raster")
        assert code == EXIT_USAGE

    def test_bad_param(self, capsys):
        code, _, _ = run(capsys, "partition", "navigation", "--param", "W", "--no-raster")
        assert code == EXIT_USAGE


def test_inspect(capsys):
    code, out, _ = run(capsys, "inspect", "synthetic_chain")
    assert code == EXIT_OK
    assert out.startswith("env synthetic_chain\n")
    assert "action right = 1" in out


class TestTrain:
    def test_missing_partition(self, capsys, tmp_path):
        code, _, _ = run(capsys, "train", "--partition", str(tmp_path / "missing.json"))
        assert code == EXIT_USAGE

    def test_tiling_budget(self, capsys, tmp_path):
        code, out, _ = run(
            capsys,
            "train", "navigation", "--obs", "tiling", "--budget", "51",
            "--episodes", "3", "--max-steps", "5", "--out", str(tmp_path / "m.csv"),
        )
        assert code == EXIT_OK
        assert "tiling: 8 x 8 = 64 tiles for budget 51" in out
        assert "|S|=64" in out

    def test_tiling_needs_a_budget(self, capsys):
        code, _, _ = run(capsys, "train", "navigation", "--obs", "tiling")
        assert code == EXIT_USAGE

    def test_same_seed_same_csv(self, capsys, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            code, _, _ = run(capsys, "train", "synthetic_chain", "--seed", "3", "--episodes", "20", "--out", str(path))
            assert code == EXIT_OK
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert (tmp_path / "a_summary.csv").is_file()

    def test_from_dump(self, capsys, tmp_path):
        dump = tmp_path / "chain.json"
        assert run(capsys, "partition", "synthetic_chain", "--no-raster", "--out", str(dump))[0] == EXIT_OK
        code, out, _ = run(capsys, "train", "--partition", str(dump), "--episodes", "10", "--out", str(tmp_path / "m.csv"))
        assert code == EXIT_OK
        assert "|S|=2" in out
        code, out, _ = run(capsys, "train", "--partition", str(dump), "--obs", "tiling", "--episodes", "10", "--out", str(tmp_path / "t.csv"))
        assert code == EXIT_OK
        assert "tiling: 3 = 3 tiles for budget 2" in out


class TestExperiments:
    def test_depth_sweep(self, capsys, tmp_path):
        out_csv = tmp_path / "sweep.csv"
        code, _, _ = run(
            capsys,
            "depth-sweep", "--benchmark", "synthetic_unbranched", "--depths", "1", "--episodes", "2", "--out", str(out_csv),
        )
        assert code == EXIT_OK
        frame = pd.read_csv(out_csv)
        assert list(frame["parts"]) == [1]

    def test_similarity_with_unreachable_sample_size(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "similarity", "--benchmark", "synthetic_unbranched", "--depths", "1", "--episodes", "2",
            "--states-per-part", "30000", "--out", str(tmp_path / "s.csv"),
        )
        assert code == EXIT_USAGE

    def test_bad_spec_file(self, capsys, tmp_path):
        path = tmp_path / "spec.env"
        path.write_text("SEEDS=1,1\n", encoding="utf-8")
        code, _, _ = run(capsys, "depth-sweep", "--spec", str(path))
        assert code == EXIT_USAGE

    @pytest.mark.slow
    def test_scale(self, capsys, tmp_path):
        code, out, _ = run(capsys, "scale", "--benchmarks", "navigation", "--scales", "1,10", "--out", str(tmp_path / "scale.csv"))
        assert code == EXIT_OK
        frame = pd.read_csv(tmp_path / "scale.csv")
        assert frame["parts"].nunique() == 1
