"""End-to-end CLI checks: determinism, exit codes, sidecars, file formats."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from longgen import TokenStream
from longgen.cli import cli
from longgen.streams import read_stream, write_stream

runner = CliRunner()


@pytest.fixture
def scripted_path(tmp_path):
    path = tmp_path / "model.json"
    v = 16
    path.write_text(json.dumps({"vocab_size": v, "next": [(i + 1) % v for i in range(v)]}))
    return str(path)


@pytest.fixture
def prompt_path(tmp_path):
    path = tmp_path / "prompt.tok"
    write_stream(path, TokenStream(np.arange(25) % 16, 25.0))
    return str(path)


def invoke(*args):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)


class TestGenerate:
    def test_deterministic_outputs_byte_identical(self, tmp_path, scripted_path, prompt_path):
        out_a = tmp_path / "a.tok"
        out_b = tmp_path / "b.tok"
        for out in (out_a, out_b):
            result = invoke(
                "generate", "--prompt", prompt_path, "--target-s", 13.0,
                "--seed", 7, "--scripted", scripted_path, "--out", out,
            )
            assert result.exit_code == 0, result.output
        assert out_a.read_bytes() == out_b.read_bytes()
        stream = read_stream(out_a)
        assert len(stream) == 13 * 25 - 25

    def test_sidecar_written(self, tmp_path, scripted_path, prompt_path):
        out = tmp_path / "c.tok"
        invoke("generate", "--prompt", prompt_path, "--target-s", 2.0,
               "--seed", 1, "--scripted", scripted_path, "--out", out)
        sidecar = json.loads((tmp_path / "c.tok.run.json").read_text())
        assert sidecar["command"] == "generate"
        assert sidecar["params"]["seed"] == 1
        assert sidecar["params"]["mode"] == "single_session"

    def test_needs_exactly_one_model_source(self, tmp_path, scripted_path, prompt_path):
        result = runner.invoke(
            cli, ["generate", "--prompt", prompt_path, "--target-s", "2.0",
                  "--out", str(tmp_path / "x.tok")],
        )
        assert result.exit_code == 2

    def test_validation_error_exits_2(self, tmp_path, scripted_path, prompt_path):
        result = runner.invoke(
            cli, ["generate", "--prompt", prompt_path, "--target-s", "0.5",
                  "--scripted", scripted_path, "--out", str(tmp_path / "x.tok")],
        )
        assert result.exit_code == 2  # target shorter than prompt

    def test_unknown_flag_exits_2(self):
        result = runner.invoke(cli, ["generate", "--nonsense"])
        assert result.exit_code == 2


class TestExtend:
    def test_slide_and_prompt_run(self, tmp_path, scripted_path, prompt_path):
        out = tmp_path / "ext.tok"
        result = invoke(
            "extend", "--prompt", prompt_path, "--target-s", 10.0, "--chunk-s", 3.0,
            "--reprompt-s", 1.0, "--greedy", "--scripted", scripted_path, "--out", out,
        )
        assert result.exit_code == 0, result.output
        assert len(read_stream(out)) == 9 * 25
        sidecar = json.loads((tmp_path / "ext.tok.run.json").read_text())
        assert sidecar["params"]["chunk_tokens"] == 75
        assert sidecar["params"]["reprompt_tokens"] == 25


class TestScore:
    def test_loglik_scripted_path_is_zero(self, tmp_path, scripted_path):
        stream_path = tmp_path / "s.tok"
        write_stream(stream_path, TokenStream(np.array([0, 1, 2, 3]), 25.0))
        result = invoke("score", "loglik", "--stream", stream_path, "--scripted", scripted_path)
        assert result.exit_code == 0
        assert float(result.output.strip()) == 0.0

    def test_contrast(self, tmp_path, scripted_path):
        pairs_path = tmp_path / "pairs.jsonl"
        pairs_path.write_text(
            json.dumps({"positive": [0, 1, 2], "negative": [0, 2, 1]}) + "\n"
        )
        result = invoke("score", "contrast", "--pairs", pairs_path, "--scripted", scripted_path)
        assert result.exit_code == 0
        assert float(result.output.strip()) == 1.0


class TestWindow:
    def test_plan_and_merge_round_trip(self, tmp_path, rng):
        plan_path = tmp_path / "plan.json"
        result = invoke("window", "plan", "--stream-len", 11, "--width", 5,
                        "--overlap", 2, "--out", plan_path)
        assert result.exit_code == 0
        plan = json.loads(plan_path.read_text())
        assert plan["windows"] == [[0, 5, 0, 4], [3, 8, 4, 7], [6, 11, 7, 11]]

        ids = rng.integers(0, 100, 11)
        windows_path = tmp_path / "windows.jsonl"
        lines = []
        for s, e, _, _ in plan["windows"]:
            lines.append(json.dumps({"ids": [int(x) for x in ids[s:e]], "frame_rate_hz": 25.0}))
        windows_path.write_text("\n".join(lines) + "\n")
        merged_path = tmp_path / "merged.tok"
        result = invoke("window", "merge", "--plan", plan_path, "--windows", windows_path,
                        "--out", merged_path)
        assert result.exit_code == 0, result.output
        assert np.array_equal(read_stream(merged_path).ids, ids)

    def test_synthesis_plan(self, tmp_path):
        result = invoke("window", "plan", "--mode", "synthesis", "--continuation-s", 240)
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["boundary_times"][:3] == [25.0, 48.0, 71.0]

    def test_odd_overlap_exits_2(self):
        result = runner.invoke(
            cli, ["window", "plan", "--stream-len", "11", "--width", "5", "--overlap", "3"]
        )
        assert result.exit_code == 2


class TestEval:
    def test_judge_mock_self_pairs_print_fifty(self, tmp_path):
        pairs_path = tmp_path / "pairs.jsonl"
        records = [
            {"pair_id": f"p{i}", "text_a": f"words {i} here now", "text_b": f"words {i} here now"}
            for i in range(4)
        ]
        pairs_path.write_text("".join(json.dumps(r) + "\n" for r in records))
        out = tmp_path / "judgments.jsonl"
        result = invoke("eval", "judge", "--pairs", pairs_path, "--judge", "mock", "--out", out)
        assert result.exit_code == 0
        assert result.output.strip().splitlines()[0] == "50.0"
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 8
        assert {r["pair_id"] for r in rows} == {"p0", "p1", "p2", "p3"}
        assert all(r["verdict"] == "A=B" for r in rows)

    def test_sc_l_with_figure(self, tmp_path):
        prompt = tmp_path / "prompt.txt"
        cont = tmp_path / "cont.txt"
        prompt.write_text("a seed prompt for the series")
        cont.write_text(" ".join(f"w{i % 11}" for i in range(250)))
        out = tmp_path / "scl.json"
        fig = tmp_path / "scl.png"
        result = invoke("eval", "sc-l", "--prompt-file", prompt, "--continuation-file", cont,
                        "--out", out, "--figure", fig)
        assert result.exit_code == 0
        payload = json.loads(out.read_text())
        assert len(payload["points"]) == 2
        assert fig.stat().st_size > 0

    def test_similarity(self, tmp_path):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("identical words")
        b.write_text("identical words")
        result = invoke("eval", "similarity", "--file-a", a, "--file-b", b)
        assert result.exit_code == 0
        assert float(result.output.strip()) == pytest.approx(1.0, abs=1e-6)

    def test_strata(self):
        result = invoke("eval", "strata", "--prompt-s", 10, "--max-s", 240)
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["strata"] == [[10.0, 60.0], [60.0, 120.0], [120.0, 180.0], [180.0, 240.0]]


class TestDataset:
    @pytest.fixture
    def manifest_path(self, tmp_path):
        path = tmp_path / "utts.jsonl"
        rows = []
        t = 0.0
        for i in range(3):
            rows.append(
                {
                    "utterance_id": f"u{i}",
                    "chapter_id": "ch1",
                    "speaker_id": "spk1",
                    "start_s": t,
                    "end_s": t + 100.0,
                    "transcript": f"part {i}",
                }
            )
            t += 100.5
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        return str(path)

    def test_agglomerate_fixture(self, tmp_path, manifest_path):
        out = tmp_path / "spans.jsonl"
        result = invoke("dataset", "agglomerate", "--manifest", manifest_path,
                        "--target-s", 240, "--out", out)
        assert result.exit_code == 0
        spans = [json.loads(l) for l in out.read_text().splitlines()]
        assert [s["duration_s"] for s in spans] == [200.0, 100.0]

    def test_stats_and_pairs(self, tmp_path, manifest_path):
        spans_path = tmp_path / "spans.jsonl"
        invoke("dataset", "agglomerate", "--manifest", manifest_path, "--target-s", 240,
               "--out", spans_path)
        result = invoke("dataset", "stats", "--spans", spans_path, "--label", "fixture")
        assert result.exit_code == 0
        assert "fixture" in result.output

        pairs_path = tmp_path / "pairs.jsonl"
        result = invoke("dataset", "pairs", "--spans", spans_path, "--prompt-s", 10,
                        "--min-duration-s", 150, "--out", pairs_path)
        assert result.exit_code == 0
        pairs = [json.loads(l) for l in pairs_path.read_text().splitlines()]
        assert len(pairs) == 1  # only the 200 s span passes the filter


class TestWeights:
    @pytest.fixture
    def config_path(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps(
                dict(
                    vocab_size=32,
                    model_dim=16,
                    num_superblocks=1,
                    attention_window=8,
                    num_query_heads=2,
                    head_dim=8,
                )
            )
        )
        return str(path)

    def test_init_inspect_and_generate(self, tmp_path, config_path):
        archive = tmp_path / "w.bin"
        result = invoke("weights", "init", "--model-config", config_path, "--seed", 3,
                        "--out", archive)
        assert result.exit_code == 0
        result = invoke("weights", "inspect", "--archive", archive)
        assert result.exit_code == 0
        assert "embed.weight" in result.output
        assert "total parameters" in result.output

        prompt = tmp_path / "p.tok"
        write_stream(prompt, TokenStream(np.arange(10) % 32, 25.0))
        out = tmp_path / "gen.tok"
        result = invoke("generate", "--prompt", prompt, "--target-s", 1.0,
                        "--weights", archive, "--out", out)
        assert result.exit_code == 0, result.output
        assert len(read_stream(out)) == 15

    def test_deterministic_archives(self, tmp_path, config_path):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        invoke("weights", "init", "--model-config", config_path, "--seed", 3, "--out", a)
        invoke("weights", "init", "--model-config", config_path, "--seed", 3, "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestBenchCli:
    def test_latency_and_throughput(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                dict(
                    vocab_size=32,
                    model_dim=16,
                    num_superblocks=1,
                    attention_window=8,
                    num_query_heads=2,
                    head_dim=8,
                )
            )
        )
        out = tmp_path / "lat.json"
        csv_path = tmp_path / "lat.csv"
        fig = tmp_path / "lat.png"
        result = invoke(
            "bench", "latency", "--arch", "hybrid", "--model-config", cfg,
            "--positions", "8,16", "--warmup", 4, "--repeats", 5,
            "--out", out, "--csv", csv_path, "--figure", fig,
        )
        assert result.exit_code == 0, result.output
        assert json.loads(out.read_text())[0]["model_id"] == "hybrid"
        assert csv_path.stat().st_size > 0 and fig.stat().st_size > 0

        thr = tmp_path / "thr.json"
        result = invoke(
            "bench", "throughput", "--arch", "both", "--model-config", cfg,
            "--targets", "16,32", "--budget-bytes", 50_000_000, "--repeats", 5, "--out", thr,
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(thr.read_text())
        assert {r["model_id"] for r in payload} == {"hybrid", "transformer"}

    def test_infeasible_budget_exits_1(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dict(vocab_size=32, model_dim=16, num_superblocks=1,
                                       attention_window=8, num_query_heads=2, head_dim=8)))
        result = runner.invoke(
            cli, ["bench", "throughput", "--arch", "hybrid", "--model-config", str(cfg),
                  "--targets", "16", "--budget-bytes", "10", "--out",
                  str(tmp_path / "t.json")],
        )
        assert result.exit_code == 1


class TestConfigFilePrecedence:
    def test_flags_beat_config_file_beat_defaults(self, tmp_path):
        config = tmp_path / "defaults.json"
        config.write_text(json.dumps({"eval": {"strata": {"prompt_s": 10, "max_s": 150}}}))
        # File supplies both values.
        result = invoke("--config", config, "eval", "strata")
        assert json.loads(result.output)["strata"][-1] == [120.0, 150.0]
        # Explicit flag overrides the file.
        result = invoke("--config", config, "eval", "strata", "--max-s", 240)
        assert json.loads(result.output)["strata"][-1] == [180.0, 240.0]
