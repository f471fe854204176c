"""Pipeline, emission, pricing, and command-line behavior."""
from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from conftest import make_episode, make_step, make_task
from reliakit import (
    BUCKETS,
    InputError,
    PipelineOptions,
    ReportBundle,
    compute_cost,
    emit_report,
    load_pricing,
    run_pipeline,
    simulate_agent_study,
    write_episode_log,
    write_task_registry,
)
from reliakit.cli import main
from reliakit.report import Column, PricingEntry, Table
from reliakit.trajectory import RegistryError


def write_corpus(tmp_path: Path, corpus, name="corpus") -> tuple[Path, Path]:
    log = tmp_path / f"{name}-episodes.jsonl"
    registry = tmp_path / f"{name}-tasks.jsonl"
    write_episode_log(corpus.episodes, log)
    write_task_registry(corpus.tasks, registry)
    return log, registry


def small_corpus(seed=0, tasks=4, k=2):
    return simulate_agent_study(
        {b: p for b, p in zip(BUCKETS, (0.9, 0.8, 0.6, 0.5))}, tasks, k, seed)


PRICING_LINES = [
    '{"model_id": "sim-agent", "input_per_million": 0.14, "output_per_million": 0.28}',
    '{"model_id": "m1", "input_per_million": 1.0, "output_per_million": 2.0}',
]


class TestLoadPricing:
    def test_happy_path(self):
        entries = load_pricing(PRICING_LINES)
        assert entries[0] == PricingEntry("sim-agent", 0.14, 0.28)
        assert len(entries) == 2

    def test_blank_lines_skipped(self):
        assert len(load_pricing(["", PRICING_LINES[0], "  "])) == 1

    def test_malformed_line_numbered(self):
        with pytest.raises(RegistryError, match="line 2"):
            load_pricing([PRICING_LINES[0], "{nope"])

    def test_field_validation(self):
        with pytest.raises(RegistryError, match="not an object"):
            load_pricing(["[1, 2]"])
        with pytest.raises(RegistryError, match="model_id"):
            load_pricing(['{"input_per_million": 1, "output_per_million": 1}'])
        with pytest.raises(RegistryError, match="non-negative"):
            load_pricing(['{"model_id": "m", "input_per_million": -1, "output_per_million": 1}'])
        with pytest.raises(RegistryError, match="non-negative"):
            load_pricing(['{"model_id": "m", "input_per_million": true, "output_per_million": 1}'])

    def test_duplicate_model(self):
        with pytest.raises(RegistryError, match="first seen on line 1"):
            load_pricing([PRICING_LINES[0], PRICING_LINES[0]])

    def test_reads_from_file(self, tmp_path):
        path = tmp_path / "pricing.jsonl"
        path.write_text("\n".join(PRICING_LINES) + "\n", encoding="utf-8")
        assert len(load_pricing(path)) == 2


class TestComputeCost:
    def test_million_token_episode(self):
        task = make_task("t-0001")
        steps = [make_step(1, tokens_in=600_000, tokens_out=400_000),
                 make_step(2, tokens_in=400_000, tokens_out=600_000)]
        ep = make_episode("e1", task, model_id="sim-agent", steps=steps)
        report = compute_cost([ep], load_pricing(PRICING_LINES))
        assert abs(report.total_cost - 0.42) <= 1e-9
        assert report.per_episode[0].tokens_in == 1_000_000
        assert report.per_model["sim-agent"].n_episodes == 1

    def test_stepless_episode_costs_nothing(self):
        ep = make_episode("e1", make_task("t-0001"), model_id="m1")
        report = compute_cost([ep], load_pricing(PRICING_LINES))
        assert report.total_cost == 0.0

    def test_total_is_exact_sum(self):
        task = make_task("t-0001")
        eps = [make_episode(f"e{i}", task, model_id="m1",
                            steps=[make_step(1, tokens_in=i * 7, tokens_out=i * 3)],
                            repeat_index=i + 1)
               for i in range(20)]
        report = compute_cost(eps, load_pricing(PRICING_LINES))
        assert report.total_cost == math.fsum(c.cost for c in report.per_episode)

    def test_missing_models_listed_sorted(self):
        task = make_task("t-0001")
        eps = [make_episode("e1", task, model_id="zeta"),
               make_episode("e2", task, model_id="alpha")]
        with pytest.raises(InputError, match="alpha, zeta"):
            compute_cost(eps, load_pricing(PRICING_LINES))


class TestPipelineOptions:
    def test_validation(self):
        with pytest.raises(InputError, match="regressor"):
            PipelineOptions(regressor="log_minutes")
        with pytest.raises(InputError, match="ci_method"):
            PipelineOptions(ci_method="bayes")
        with pytest.raises(InputError, match="vaf_numerator"):
            PipelineOptions(vaf_numerator=("weekly",))
        with pytest.raises(InputError, match="vaf_denominator"):
            PipelineOptions(vaf_denominator=())

    def test_to_dict_is_json_ready(self):
        opts = PipelineOptions(seed=3, bootstrap_b=0)
        payload = json.loads(json.dumps(opts.to_dict()))
        assert payload["seed"] == 3
        assert payload["mop"]["theta_h"] == 1.711


class TestRunPipeline:
    def test_full_bundle_on_synthetic_corpus(self, tmp_path):
        log, registry = write_corpus(tmp_path, small_corpus())
        opts = PipelineOptions(bootstrap_b=0)
        bundle = run_pipeline([log], registry, options=opts)
        expected_tables = {"rdc", "gds_pass", "vaf", "domain", "scaffold_delta",
                           "meltdown", "decomposition"}
        assert set(bundle.tables) == expected_tables  # no pricing, no cost table
        assert len(bundle.tables["rdc"].rows) == 4
        counts = bundle.run_metadata["episodes"]
        assert counts["analyzed"] == counts["parsed"] == 32
        assert bundle.run_metadata["conservation_holds"]
        assert len(bundle.run_metadata["config_hash"]) == 64

    def test_pricing_enables_cost_table(self, tmp_path):
        log, registry = write_corpus(tmp_path, small_corpus())
        pricing = tmp_path / "pricing.jsonl"
        pricing.write_text(PRICING_LINES[0] + "\n", encoding="utf-8")
        bundle = run_pipeline([log], registry, pricing,
                              PipelineOptions(bootstrap_b=0))
        rows = bundle.tables["cost"].rows
        assert rows[-1][0] == "(all)"
        assert rows[-1][1] == 32

    def test_cross_file_dedup_keeps_conservation(self, tmp_path):
        log, registry = write_corpus(tmp_path, small_corpus())
        bundle = run_pipeline([log, log], registry, options=PipelineOptions(bootstrap_b=0))
        counts = bundle.run_metadata["episodes"]
        assert counts["duplicates"] == 32
        assert counts["parsed"] == 32
        assert counts["log_lines"] == 64
        assert bundle.run_metadata["conservation_holds"]

    def test_infra_and_join_exclusions_counted(self, tmp_path):
        corpus = small_corpus()
        ghost = make_task("ghost-task", bucket="short")
        extra = [
            make_episode("x-infra", corpus.tasks[0], passed=False,
                         termination="infra_error", model_id="sim-agent"),
            make_episode("x-ghost", ghost, model_id="sim-agent"),
        ]
        log = tmp_path / "episodes.jsonl"
        registry = tmp_path / "tasks.jsonl"
        write_episode_log(list(corpus.episodes) + extra, log)
        write_task_registry(corpus.tasks, registry)  # ghost-task left out
        bundle = run_pipeline([log], registry, options=PipelineOptions(bootstrap_b=0))
        counts = bundle.run_metadata["episodes"]
        assert counts["infra_excluded"] == 1
        assert counts["join_excluded"] == 1
        assert counts["analyzed"] == 32
        assert bundle.run_metadata["conservation_holds"]
        assert bundle.run_metadata["validation_issues"]["unknown_task"] == 1

    def test_input_errors(self, tmp_path):
        log, registry = write_corpus(tmp_path, small_corpus())
        with pytest.raises(InputError, match="no log paths"):
            run_pipeline([], registry)
        with pytest.raises(InputError, match="cannot read"):
            run_pipeline([tmp_path / "absent.jsonl"], registry)
        with pytest.raises(InputError, match="cannot read"):
            run_pipeline([log], tmp_path / "absent-registry.jsonl")
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        with pytest.raises(InputError, match="no valid episodes"):
            run_pipeline([empty], registry)
        binary = tmp_path / "binary.jsonl"
        binary.write_bytes(b"\xff\xfe\x00")
        with pytest.raises(InputError, match="not UTF-8"):
            run_pipeline([binary], registry)

    def test_registry_defect_is_input_error(self, tmp_path):
        log, _ = write_corpus(tmp_path, small_corpus())
        bad = tmp_path / "bad-tasks.jsonl"
        bad.write_text("{not json\n", encoding="utf-8")
        with pytest.raises(InputError, match="registry"):
            run_pipeline([log], bad)

    def test_repeat_runs_identical(self, tmp_path):
        log, registry = write_corpus(tmp_path, small_corpus())
        opts = PipelineOptions(bootstrap_b=1000)
        first = run_pipeline([log], registry, options=opts)
        second = run_pipeline([log], registry, options=opts)
        assert first == second

    def test_bootstrap_disabled_collapses_vaf_interval(self, tmp_path):
        log, registry = write_corpus(tmp_path, small_corpus(tasks=8))
        bundle = run_pipeline([log], registry, options=PipelineOptions(bootstrap_b=0))
        for row in bundle.tables["vaf"].rows:
            if row[11] == "ok":
                assert row[3] == row[2] == row[4]

    def test_emit_series_covers_every_analyzed_episode(self, tmp_path):
        corpus = small_corpus(tasks=2, k=1)
        log, registry = write_corpus(tmp_path, corpus)
        bundle = run_pipeline([log], registry,
                              options=PipelineOptions(bootstrap_b=0, emit_series=True))
        assert set(bundle.series) == {ep.episode_id for ep in corpus.episodes}
        # study episodes have no steps, so every series is empty but present
        assert all(series == () for series in bundle.series.values())


def tiny_bundle() -> ReportBundle:
    table = Table("rdc", (
        Column("model_id", "str"), Column("pass1", "fraction"),
        Column("vaf", "number"), Column("median_onset", "int"),
        Column("total_cost", "currency"),
    ), (
        ("m1", 0.5, 1 / 3, None, 1.25),
    ))
    return ReportBundle(run_metadata={"schema_version": "1"},
                        tables={"rdc": table}, series={})


class TestEmitReport:
    def test_markdown_formatting(self, tmp_path):
        emit_report(tiny_bundle(), "markdown", tmp_path)
        text = (tmp_path / "rdc.md").read_text(encoding="utf-8")
        assert "| 50.0% |" in text
        assert "| --- |" in text  # suppressed cell
        assert "| 0.333333 |" in text
        assert "| 1.2500 |" in text

    def test_csv_full_precision_and_empty_suppressed(self, tmp_path):
        emit_report(tiny_bundle(), "csv", tmp_path)
        lines = (tmp_path / "rdc.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "model_id,pass1,vaf,median_onset,total_cost"
        assert lines[1] == f"m1,0.5,{1 / 3!r},,1.25"

    def test_json_nulls_and_schema(self, tmp_path):
        emit_report(tiny_bundle(), "json", tmp_path)
        payload = json.loads((tmp_path / "rdc.json").read_text(encoding="utf-8"))
        assert payload["columns"][1] == {"name": "pass1", "kind": "fraction"}
        assert payload["rows"][0]["median_onset"] is None
        assert payload["rows"][0]["vaf"] == 1 / 3

    def test_metadata_always_written(self, tmp_path):
        paths = emit_report(tiny_bundle(), "json", tmp_path)
        assert tmp_path / "run_metadata.json" in paths

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InputError, match="unknown format"):
            emit_report(tiny_bundle(), "xml", tmp_path)

    def test_emission_is_byte_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        emit_report(tiny_bundle(), "markdown", a)
        emit_report(tiny_bundle(), "markdown", b)
        for path in sorted(a.iterdir()):
            assert path.read_bytes() == (b / path.name).read_bytes()

    def test_series_sidecars_with_safe_names(self, tmp_path):
        bundle = ReportBundle(
            run_metadata={}, tables={},
            series={"ep/odd:id": ((5, 0.0), (6, 1.5)), "plain": ((5, 0.2),)})
        paths = emit_report(bundle, "json", tmp_path)
        names = {p.name for p in paths if p.parent.name == "series"}
        assert "plain.json" in names
        assert len(names) == 2
        munged = next(n for n in names if n != "plain.json")
        assert "/" not in munged and ":" not in munged
        payload = json.loads((tmp_path / "series" / "plain.json").read_text())
        assert payload["series"] == [[5, 0.2]]


class TestCli:
    def test_no_command_prints_help(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag(self, capsys):
        assert main(["analyze", "--bogus"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_file_is_exit_2(self, tmp_path, capsys):
        code = main(["analyze", "--logs", str(tmp_path / "nope.jsonl"),
                     "--registry", str(tmp_path / "nope-tasks.jsonl"),
                     "--out", str(tmp_path / "out")])
        assert code == 2
        assert "input error" in capsys.readouterr().err

    def test_simulate_study_then_analyze(self, tmp_path, capsys):
        data = tmp_path / "data"
        assert main(["simulate", "--mode", "study", "--out", str(data),
                     "--tasks-per-bucket", "4", "--k", "2", "--seed", "7"]) == 0
        out = tmp_path / "report"
        code = main(["analyze", "--logs", str(data / "episodes.jsonl"),
                     "--registry", str(data / "tasks.jsonl"),
                     "--out", str(out), "--bootstrap-b", "0",
                     "--format", "markdown"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "analyzed 32 episodes" in stdout
        assert (out / "rdc.md").exists()
        assert (out / "run_metadata.json").exists()
        assert not (out / "rdc.csv").exists()  # only the requested format

    def test_simulate_steps_summary(self, tmp_path):
        out = tmp_path / "steps"
        assert main(["simulate", "--mode", "steps", "--sim-model", "exchangeable",
                     "--epsilon", "0.1", "--rho", "0.5", "--horizon", "10",
                     "--episodes", "2000", "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert abs(summary["predicted_failcount_variance"] - 1.35) <= 1e-12
        assert (out / "steps.csv").read_text().count("\n") == 2000

    def test_simulate_study_bad_p_arity(self, capsys):
        assert main(["simulate", "--mode", "study", "--out", "ignored",
                     "--p", "0.5,0.5"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_validate_reports_errors_with_exit_2(self, tmp_path, capsys):
        log = tmp_path / "bad.jsonl"
        log.write_text("{broken\n", encoding="utf-8")
        assert main(["validate", "--logs", str(log)]) == 2
        out = capsys.readouterr().out
        assert "ERROR" in out
        assert "malformed_line" in out

    def test_validate_clean_log_passes(self, tmp_path, capsys):
        data = tmp_path / "data"
        main(["simulate", "--mode", "study", "--out", str(data),
              "--tasks-per-bucket", "2", "--k", "1"])
        capsys.readouterr()
        code = main(["validate", "--logs", str(data / "episodes.jsonl"),
                     "--registry", str(data / "tasks.jsonl")])
        assert code == 0
        assert "0 errors" in capsys.readouterr().out

    def test_mop_detection_csv_on_stdout(self, tmp_path, capsys):
        data = tmp_path / "traj"
        main(["simulate", "--mode", "trajectories", "--profile", "spiral",
              "--length", "30", "--spiral-start", "15", "--count", "3",
              "--out", str(data)])
        capsys.readouterr()
        assert main(["mop", "--logs", str(data / "episodes.jsonl")]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "episode_id,onset_step,max_entropy,too_short,melted"
        assert len(lines) == 4

    def test_mop_f1_requires_labels(self, tmp_path, capsys):
        data = tmp_path / "traj"
        main(["simulate", "--mode", "trajectories", "--count", "2",
              "--out", str(data)])
        capsys.readouterr()
        assert main(["mop", "--logs", str(data / "episodes.jsonl"),
                     "--calibrate", "f1"]) == 1
        assert "requires --labels" in capsys.readouterr().err

    def test_mop_f1_round_trip(self, tmp_path, capsys):
        spiral = tmp_path / "spiral"
        rote = tmp_path / "rote"
        main(["simulate", "--mode", "trajectories", "--profile", "spiral",
              "--length", "30", "--spiral-start", "15", "--count", "5",
              "--out", str(spiral)])
        main(["simulate", "--mode", "trajectories", "--profile", "rote",
              "--length", "30", "--count", "5", "--out", str(rote)])
        labels = tmp_path / "labels.jsonl"
        rows = [{"episode_id": f"traj-spiral-{i:05d}", "meltdown": True} for i in range(5)]
        rows += [{"episode_id": f"traj-rote-{i:05d}", "meltdown": False} for i in range(5)]
        labels.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        capsys.readouterr()
        code = main(["mop", "--logs", str(spiral / "episodes.jsonl"),
                     str(rote / "episodes.jsonl"),
                     "--calibrate", "f1", "--labels", str(labels)])
        assert code == 0
        out = capsys.readouterr().out
        assert "f1=1.0000" in out

    def test_mop_f1_missing_label_is_exit_2(self, tmp_path, capsys):
        data = tmp_path / "traj"
        main(["simulate", "--mode", "trajectories", "--count", "2",
              "--out", str(data)])
        labels = tmp_path / "labels.jsonl"
        labels.write_text(json.dumps(
            {"episode_id": "traj-spiral-00000", "meltdown": True}) + "\n",
            encoding="utf-8")
        capsys.readouterr()
        assert main(["mop", "--logs", str(data / "episodes.jsonl"),
                     "--calibrate", "f1", "--labels", str(labels)]) == 2
        assert "no label" in capsys.readouterr().err

    def test_mop_baseline(self, tmp_path, capsys):
        data = tmp_path / "rote"
        main(["simulate", "--mode", "trajectories", "--profile", "rote",
              "--length", "30", "--count", "4", "--out", str(data)])
        capsys.readouterr()
        assert main(["mop", "--logs", str(data / "episodes.jsonl"),
                     "--calibrate", "baseline"]) == 0
        assert "theta_h=0.0" in capsys.readouterr().out

    def test_cost_missing_model_is_exit_2(self, tmp_path, capsys):
        data = tmp_path / "data"
        main(["simulate", "--mode", "study", "--out", str(data),
              "--tasks-per-bucket", "2", "--k", "1"])
        pricing = tmp_path / "pricing.jsonl"
        pricing.write_text(PRICING_LINES[1] + "\n", encoding="utf-8")  # only m1
        capsys.readouterr()
        assert main(["cost", "--logs", str(data / "episodes.jsonl"),
                     "--pricing", str(pricing)]) == 2
        assert "sim-agent" in capsys.readouterr().err

    def test_cost_writes_csv(self, tmp_path, capsys):
        data = tmp_path / "data"
        main(["simulate", "--mode", "study", "--out", str(data),
              "--tasks-per-bucket", "2", "--k", "1"])
        pricing = tmp_path / "pricing.jsonl"
        pricing.write_text(PRICING_LINES[0] + "\n", encoding="utf-8")
        out = tmp_path / "costs"
        capsys.readouterr()
        assert main(["cost", "--logs", str(data / "episodes.jsonl"),
                     "--pricing", str(pricing), "--out", str(out)]) == 0
        lines = (out / "cost.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "model_id,n_episodes,tokens_in,tokens_out,total_cost"
        assert lines[-1].startswith("(all),8,0,0,")

    def test_analyze_runs_are_byte_identical(self, tmp_path):
        data = tmp_path / "data"
        main(["simulate", "--mode", "study", "--out", str(data),
              "--tasks-per-bucket", "3", "--k", "2"])
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code = main(["analyze", "--logs", str(data / "episodes.jsonl"),
                         "--registry", str(data / "tasks.jsonl"),
                         "--out", str(out), "--bootstrap-b", "1000"])
            assert code == 0
            outs.append(out)
        first = sorted(p for p in outs[0].rglob("*") if p.is_file())
        second = sorted(p for p in outs[1].rglob("*") if p.is_file())
        assert [p.relative_to(outs[0]) for p in first] == \
               [p.relative_to(outs[1]) for p in second]
        for p1, p2 in zip(first, second):
            assert p1.read_bytes() == p2.read_bytes(), p1.name
