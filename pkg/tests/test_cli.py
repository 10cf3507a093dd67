"""CLI contract: subcommands, exit codes, determinism, CSV schema."""

import json

import pytest

from nswforge.cli import EXIT_CAP, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, main
from nswforge.generators import GenSpec, generate
from nswforge.model import serialize_instance


@pytest.fixture
def instance_file(tmp_path):
    inst = generate(GenSpec("xos", 2, 5, seed=11))
    path = tmp_path / "inst.json"
    path.write_text(serialize_instance(inst))
    return path


@pytest.fixture
def budgeted_file(tmp_path):
    inst = generate(GenSpec("budgeted_additive", 2, 5, seed=3))
    path = tmp_path / "budgeted.json"
    path.write_text(serialize_instance(inst))
    return path


class TestSolve:
    def test_smoke(self, instance_file, capsys):
        code = main(["solve", "--instance", str(instance_file),
                     "--pipeline", "xos", "--seed", "5"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["nsw"] > 0

    def test_byte_identical_reports(self, instance_file, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out1, out2):
            assert main(["solve", "--instance", str(instance_file),
                         "--pipeline", "xos", "--seed", "7",
                         "--out", str(out)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_wrong_family_is_usage_error(self, budgeted_file, capsys):
        code = main(["solve", "--instance", str(budgeted_file),
                     "--pipeline", "xos"])
        assert code == EXIT_USAGE
        assert "requires XOS valuations" in capsys.readouterr().err

    def test_missing_file_is_usage_error(self, tmp_path):
        assert main(["solve", "--instance", str(tmp_path / "nope.json"),
                     "--pipeline", "xos"]) == EXIT_USAGE

    def test_subadditive_lane(self, budgeted_file, capsys):
        code = main(["solve", "--instance", str(budgeted_file),
                     "--pipeline", "subadditive", "--proc", "oracle"])
        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out)["pipeline"] == "subadditive"


class TestGenAndExact:
    def test_gen_writes_instances(self, tmp_path):
        out = tmp_path / "gen"
        assert main(["gen", "--family", "additive", "--n", "2", "--m", "4",
                     "--count", "3", "--seed", "1", "--out", str(out)]) == EXIT_OK
        assert len(list(out.glob("*.json"))) == 3

    def test_exact_smoke(self, instance_file, capsys):
        assert main(["exact", "--instance", str(instance_file)]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["optimum"] > 0 and doc["nodes"] == 2 ** 5


class TestRatio:
    def test_generated_batch(self, tmp_path, capsys):
        out = tmp_path / "ratio.csv"
        code = main(["ratio", "--family", "additive", "--n", "2", "--m", "4",
                     "--count", "4", "--pipeline", "xos", "--seed", "2",
                     "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "# schema=1"
        assert lines[1].startswith("instance,")
        assert len(lines) == 6
        assert "min_ratio=" in capsys.readouterr().err

    def test_instance_directory(self, tmp_path, capsys):
        gen_dir = tmp_path / "instances"
        main(["gen", "--family", "xos", "--n", "2", "--m", "4", "--count", "2",
              "--seed", "3", "--out", str(gen_dir)])
        code = main(["ratio", "--instances", str(gen_dir), "--pipeline", "xos",
                     "--out", str(tmp_path / "r.csv")])
        assert code == EXIT_OK

    def test_empty_directory_errors(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["ratio", "--instances", str(empty),
                     "--pipeline", "xos"]) == EXIT_USAGE

    def test_single_agent_with_residual_is_near_exact(self, tmp_path):
        out = tmp_path / "single.csv"
        code = main(["ratio", "--family", "xos", "--n", "1", "--m", "5",
                     "--count", "3", "--pipeline", "xos", "--seed", "4",
                     "--append-residual", "--out", str(out)])
        assert code == EXIT_OK
        rows = [line.split(",") for line in out.read_text().splitlines()[2:]]
        header = out.read_text().splitlines()[1].split(",")
        ratio_col = header.index("ratio")
        assert all(float(r[ratio_col]) >= 1 - 1e-9 for r in rows)


class TestFuzz:
    def test_zero_count_vacuous(self, capsys):
        assert main(["fuzz", "--module", "split", "--count", "0"]) == EXIT_OK
        assert "vacuous" in capsys.readouterr().err

    @pytest.mark.parametrize("module", ["split", "match"])
    def test_small_runs_clean(self, module, capsys):
        assert main(["fuzz", "--module", module, "--count", "5",
                     "--seed", "4"]) == EXIT_OK
        assert "runs clean" in capsys.readouterr().err


class TestConc:
    def test_low_power_run_warns_but_passes(self, tmp_path, capsys):
        out = tmp_path / "conc.csv"
        code = main(["conc", "--family", "additive", "--trials", "200",
                     "--count", "2", "--seed", "5", "--out", str(out)])
        assert code == EXIT_OK
        err = capsys.readouterr().err
        assert "low-power" in err
        assert out.read_text().startswith("# schema=1")

    def test_loose_parameters_pass(self, tmp_path):
        assert main(["conc", "--family", "budgeted_additive", "--q", "1",
                     "--k", "1", "--trials", "2000", "--count", "1",
                     "--seed", "6", "--out", str(tmp_path / "c.csv")]) == EXIT_OK


class TestExitCodes:
    def test_cap_exceeded_maps_to_exit_3(self, tmp_path):
        from nswforge.generators import GenSpec, generate
        from nswforge.model import serialize_instance

        inst = generate(GenSpec("additive", 3, 20, seed=1))
        path = tmp_path / "big.json"
        path.write_text(serialize_instance(inst))
        assert main(["exact", "--instance", str(path)]) == EXIT_CAP

    def test_invariant_violation_maps_to_exit_2(self, monkeypatch, capsys):
        import nswforge.cli as cli_mod
        from nswforge.model import InvariantViolation

        def broken(seed):
            raise InvariantViolation("engineered failure")

        monkeypatch.setitem(cli_mod.FUZZERS, "split", broken)
        assert main(["fuzz", "--module", "split", "--count", "3",
                     "--seed", "1"]) == EXIT_INVARIANT
        assert "seed=" in capsys.readouterr().err


class TestThreads:
    def test_ratio_rows_independent_of_thread_count(self, tmp_path, monkeypatch):
        args = ["ratio", "--family", "additive", "--n", "2", "--m", "4",
                "--count", "4", "--pipeline", "xos", "--seed", "12"]
        monkeypatch.setenv("NSW_FORGE_THREADS", "1")
        assert main(args + ["--out", str(tmp_path / "one.csv")]) == EXIT_OK
        monkeypatch.setenv("NSW_FORGE_THREADS", "3")
        assert main(args + ["--out", str(tmp_path / "three.csv")]) == EXIT_OK

        def strip_wall_time(path):
            return [line.rsplit(",", 1)[0] for line in path.read_text().splitlines()]

        assert strip_wall_time(tmp_path / "one.csv") == strip_wall_time(tmp_path / "three.csv")


class TestReport:
    def test_summary(self, tmp_path, capsys):
        csv_path = tmp_path / "r.csv"
        main(["ratio", "--family", "additive", "--n", "2", "--m", "4",
              "--count", "3", "--pipeline", "xos", "--seed", "8",
              "--out", str(csv_path)])
        capsys.readouterr()
        assert main(["report", "--in", str(csv_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "median=" in out and "min=" in out

    def test_usage_errors(self, tmp_path):
        assert main(["report", "--in", str(tmp_path / "missing.csv")]) == EXIT_USAGE
        assert main(["nonsense"]) == EXIT_USAGE
