import json

import pytest

from sublinear_lln import cli
from sublinear_lln.config import fixture_names, load_config, parse_config
from sublinear_lln.errors import ParseError, ValidationError
from sublinear_lln.runner import ARTIFACTS, EXIT_CONDITION_FAIL, EXIT_EXECUTION_ERROR, EXIT_OK, run

MINIMAL = {
    "model": {"rule": [{"kind": "Uniform", "lo": 0.0, "hi": 1.0}]},
    "epsilon": [0.1],
    "n_schedule": [10],
    "budget": {"seed": 1},
}


def cfg_text(**overrides):
    doc = json.loads(json.dumps(MINIMAL))
    doc.update(overrides)
    return json.dumps(doc, indent=2)


class TestLoad:
    def test_minimal(self):
        cfg = parse_config(cfg_text())
        assert cfg.n_schedule == (10,)
        assert cfg.epsilons == (0.1,)
        assert cfg.budget.seed == 1 and cfg.budget.mc_reps == 1000
        assert cfg.model.is_iid and cfg.model.is_product

    def test_zero_epsilon(self):
        with pytest.raises(ValidationError) as info:
            parse_config(cfg_text(epsilon=[0.0]))
        assert (info.value.field, info.value.reason) == ("epsilon", "must be positive")

    def test_seed_is_mandatory(self):
        with pytest.raises(ValidationError) as info:
            parse_config(cfg_text(budget={"mc_reps": 500}))
        assert info.value.field == "budget.seed"

    @pytest.mark.parametrize("sched", [[10, 10], [100, 10], [], [0, 5], [1.5]])
    def test_schedule_rules(self, sched):
        with pytest.raises(ValidationError) as info:
            parse_config(cfg_text(n_schedule=sched))
        assert info.value.field == "n_schedule"

    def test_parse_error_line(self):
        text = cfg_text().replace('"epsilon": [', '"epsilon": [,')
        with pytest.raises(ParseError) as info:
            parse_config(text)
        assert info.value.line == text[: text.index("[,")].count("\n") + 1

    def test_bad_distribution_field(self):
        text = cfg_text(model={"rule": [{"kind": "Normal", "mean": 0, "stddev": -2}]})
        with pytest.raises(ValidationError) as info:
            parse_config(text)
        assert info.value.field == "model.rule[0].stddev"
        with pytest.raises(ParseError) as info:
            parse_config(cfg_text(model={"rule": [{"kind": "Levy"}]}))
        assert info.value.field == "model.rule[0]"

    def test_explicit_coordinates_bound_n(self):
        coords = [[{"kind": "Uniform", "lo": 0, "hi": 1}]] * 3
        with pytest.raises(ValidationError):
            parse_config(cfg_text(model={"coordinates": coords}, n_schedule=[2, 4]))
        cfg = parse_config(cfg_text(model={"coordinates": coords}, n_schedule=[1, 3]))
        assert cfg.proof_n == (1, 2)

    def test_joint_pairs(self):
        coin = {"kind": "TwoPoint", "low": -1, "high": 1, "p_high": 0.5}
        dep = {"joint_pairs": [{"pair": [2, 1], "laws": [{"atoms": [[-1, 1, 0.5], [1, -1, 0.5]]}]}]}
        cfg = parse_config(cfg_text(model={"coordinates": [[coin], [coin]], "dependence": dep}, n_schedule=[2]))
        assert not cfg.model.is_product
        assert cfg.model.joint(1, 2)[0].atoms[0] == (-1.0, 1.0, 0.5)

    def test_overrides_and_quick(self, tmp_path):
        cfg = parse_config(cfg_text(budget={"seed": 1, "mc_reps": 5000}), seed=9, quick=True, out_dir=tmp_path, jobs=3)
        assert cfg.budget.seed == 9 and cfg.budget.mc_reps == 500 and cfg.jobs == 3
        assert cfg.output_dir == tmp_path
        floor = parse_config(cfg_text(budget={"seed": 1, "mc_reps": 300}), quick=True)
        assert floor.budget.mc_reps == 100

    def test_hash_ignores_paths_and_jobs(self, tmp_path):
        a = parse_config(cfg_text(), out_dir=tmp_path / "a", jobs=1)
        b = parse_config(cfg_text(), out_dir=tmp_path / "b", jobs=4)
        c = parse_config(cfg_text(), seed=2)
        assert a.config_hash() == b.config_hash() != c.config_hash()
        # key order and whitespace in the source do not matter
        reordered = json.dumps(dict(reversed(list(MINIMAL.items()))))
        assert parse_config(reordered).config_hash() == parse_config(cfg_text()).config_hash()

    def test_fixtures_load(self):
        names = fixture_names()
        assert {"bounded_twopoint", "cauchy_counterexample", "logtail_no_first_moment"} <= set(names)
        for name in names:
            assert load_config(name).budget.seed is not None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_config(tmp_path / "nope.json")


class TestRun:
    def test_minimal_run(self, tmp_path):
        cfg = parse_config(cfg_text(n_schedule=[10, 20, 40]), out_dir=tmp_path)
        manifest = run(cfg)
        assert manifest.exit_code == EXIT_OK, manifest.error
        listed = {f["path"] for f in manifest.files}
        assert listed == set(ARTIFACTS)
        assert {p.name for p in tmp_path.iterdir()} == listed
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["conditions"]["psi_vanishes"]["passed"] is True
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk["config_hash"] == cfg.config_hash()

    def test_condition_failure_is_not_an_error(self, tmp_path):
        cfg = load_config("cauchy_counterexample", out_dir=tmp_path, quick=True)
        manifest = run(cfg)
        assert manifest.exit_code == EXIT_CONDITION_FAIL
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["conditions"]["psi_vanishes"]["passed"] is False
        assert summary["status"] == "condition_fail"
        assert "false" in (tmp_path / "convergence.csv").read_text()

    def test_execution_error_records_stage(self, tmp_path, monkeypatch):
        import sublinear_lln.runner as runner

        def boom(*a, **k):
            raise RuntimeError("search exploded")

        monkeypatch.setattr(runner, "convergence_experiment", boom)
        manifest = run(parse_config(cfg_text(), out_dir=tmp_path))
        assert manifest.exit_code == EXIT_EXECUTION_ERROR
        rec = json.loads((tmp_path / "manifest.json").read_text())
        assert rec["failed_stage"] == "convergence"
        assert "search exploded" in rec["error"]
        assert {f["path"] for f in rec["files"]} == {p.name for p in tmp_path.iterdir()}

    def test_refuses_foreign_files(self, tmp_path):
        (tmp_path / "notes.txt").write_text("keep me")
        manifest = run(parse_config(cfg_text(), out_dir=tmp_path))
        assert manifest.exit_code == EXIT_EXECUTION_ERROR
        assert manifest.failed_stage == "setup"
        assert [p.name for p in tmp_path.iterdir()] == ["notes.txt"]

    def test_joint_model_skips_path_stages(self, tmp_path):
        manifest = run(load_config("comonotone_pairs", out_dir=tmp_path))
        assert manifest.exit_code == EXIT_CONDITION_FAIL
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["convergence"].startswith("skipped")
        assert summary["conditions"]["cesaro"][-1]["value"] == pytest.approx((1000**2 - 1000) / 1000**2)
        assert (tmp_path / "convergence.csv").read_text().count("\n") == 1


class TestCli:
    def test_list_fixtures(self, capsys):
        assert cli.main(["--list-fixtures"]) == 0
        assert "bounded_twopoint" in capsys.readouterr().out

    def test_bad_config_exit(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(cfg_text(epsilon=[-1]))
        assert cli.main(["--config", str(p)]) == cli.EXIT_BAD_CONFIG
        assert "epsilon" in capsys.readouterr().err

    def test_missing_config_flag(self):
        assert cli.main([]) == cli.EXIT_BAD_CONFIG

    def test_seed_flag_bounds(self):
        with pytest.raises(SystemExit):
            cli.main(["--config", "x", "--seed", str(2**64)])

    def test_end_to_end(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(cfg_text(n_schedule=[10, 20, 40]))
        out = tmp_path / "out"
        assert cli.main(["--config", str(p), "--out-dir", str(out), "--seed", "5", "--jobs", "2"]) == 0
        assert json.loads((out / "summary.json").read_text())["budget"]["seed"] == 5

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}"
            assert cli.main(["--config", "discrete_toy", "--quick", "--out-dir", str(out)]) == 0
            outs.append(out)
        for name in ARTIFACTS[:-1]:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
