"""Command-line entry point.

Every subcommand is pure with respect to (inputs, flags, seed): reruns
reproduce outputs byte-for-byte except wall-clock fields in bench reports.
Flags override values from an optional --config JSON file, which overrides
built-in defaults.  File-writing commands drop a `<out>.run.json` sidecar
recording the resolved parameters and seed.

Exit codes: 0 success, 2 validation/usage error, 1 runtime error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bench import measure_step_latency, measure_throughput_curve
from .config import ModelConfig, desk_config, transformer_config
from .dataset import (
    agglomerate,
    format_stats_table,
    load_spans,
    load_utterances,
    make_eval_pairs,
    save_spans,
    split_stats,
)
from .decoder import (
    NeuralSequenceModel,
    ScriptedModel,
    contrastive_accuracy,
    score_loglikelihood,
)
from .errors import InfeasibleError
from .evalkit import (
    HttpJudge,
    MockUniqueVocabJudge,
    reference_similarity,
    probe_spans,
    sc_l,
    side_by_side,
    time_strata,
)
from .evalkit.embed import HashedTrigramEmbedder
from .ioutil import write_json_atomic, write_jsonl_atomic
from .longform import GenerationSpec, generate_long
from .streams import TokenStream, read_stream, read_streams_jsonl, write_stream
from .weights import init_random_weights, load_archive_config, load_weights, save_weights
from .windowing import (
    WindowPlan,
    merge_windows,
    plan_synthesis_windows,
    plan_tokenization_windows,
)
from . import report as report_mod


class _ErrorMappingGroup(click.Group):
    """Maps domain errors onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.ClickException, BrokenPipeError):
            raise
        except ValueError as exc:  # includes schema/corrupt/manifest errors
            raise click.UsageError(str(exc)) from exc
        except (OSError, InfeasibleError, RuntimeError) as exc:
            raise click.ClickException(str(exc)) from exc


def _write_sidecar(out_path: str | Path, command: str, params: dict) -> None:
    resolved = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in params.items()
        if not k.startswith("_")
    }
    write_json_atomic(
        Path(str(out_path) + ".run.json"),
        {"tool": "longgen", "version": __version__, "command": command, "params": resolved},
    )


def _load_model_config(path: str | None) -> ModelConfig:
    if path is None:
        return desk_config()
    with open(path, encoding="utf-8") as fh:
        return ModelConfig.from_dict(json.load(fh))


def _load_model(weights: str | None, scripted: str | None):
    if (weights is None) == (scripted is None):
        raise click.UsageError("provide exactly one of --weights or --scripted")
    if weights is not None:
        config = load_archive_config(weights)
        if config is None:
            raise click.UsageError(
                f"{weights} does not embed a model config; create archives with "
                "'longgen weights init'"
            )
        return NeuralSequenceModel(load_weights(weights, config), config)
    with open(scripted, encoding="utf-8") as fh:
        return ScriptedModel.from_json_dict(json.load(fh))


@click.group(cls=_ErrorMappingGroup)
@click.version_option(__version__)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file of default flag values (flags given on the command line win).",
)
@click.pass_context
def cli(ctx, config_path):
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            ctx.default_map = json.load(fh)


# ---------------------------------------------------------------------------
# Generation.


@cli.command()
@click.option("--prompt", "prompt_path", required=True, type=click.Path(exists=True))
@click.option("--target-s", type=float, required=True, help="Total duration including the prompt.")
@click.option("--temperature", type=float, default=1.0, show_default=True)
@click.option("--greedy", is_flag=True, default=False)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def generate(ctx, prompt_path, target_s, temperature, greedy, seed, weights, scripted, out_path):
    """Single-session continuation out to a target duration."""
    model = _load_model(weights, scripted)
    prompt = read_stream(prompt_path)
    spec = GenerationSpec(
        prompt=prompt,
        target_duration_s=target_s,
        temperature=temperature,
        seed=seed,
        greedy=greedy,
        mode="single_session",
    )
    result = generate_long(spec, model)
    write_stream(out_path, result.stream, getattr(model, "vocab_size", 0))
    _write_sidecar(out_path, "generate", {**ctx.params, **result.sidecar})
    click.echo(f"wrote {len(result.stream)} tokens to {out_path}")


@cli.command()
@click.option("--prompt", "prompt_path", required=True, type=click.Path(exists=True))
@click.option("--target-s", type=float, required=True)
@click.option("--chunk-s", type=float, required=True, help="Baseline's maximum chunk duration.")
@click.option("--reprompt-s", type=float, default=3.0, show_default=True)
@click.option("--temperature", type=float, default=1.0, show_default=True)
@click.option("--greedy", is_flag=True, default=False)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def extend(ctx, prompt_path, target_s, chunk_s, reprompt_s, temperature, greedy, seed,
           weights, scripted, out_path):
    """Slide-and-prompt extension for short-context baselines."""
    model = _load_model(weights, scripted)
    prompt = read_stream(prompt_path)
    spec = GenerationSpec(
        prompt=prompt,
        target_duration_s=target_s,
        temperature=temperature,
        seed=seed,
        greedy=greedy,
        mode="slide_and_prompt",
        reprompt_s=reprompt_s,
        chunk_limit_s=chunk_s,
    )
    result = generate_long(spec, model)
    write_stream(out_path, result.stream, getattr(model, "vocab_size", 0))
    _write_sidecar(out_path, "extend", {**ctx.params, **result.sidecar})
    click.echo(f"wrote {len(result.stream)} tokens to {out_path}")


# ---------------------------------------------------------------------------
# Scoring.


@cli.group()
def score():
    """Log-likelihood and contrastive scoring."""


@score.command("loglik")
@click.option("--stream", "stream_path", required=True, type=click.Path(exists=True))
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--bos", type=int, default=None, help="Score all tokens after this primer id.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def score_loglik(ctx, stream_path, weights, scripted, bos, out_path):
    model = _load_model(weights, scripted)
    stream = read_stream(stream_path)
    value = score_loglikelihood(model, stream, bos=bos)
    click.echo(f"{value:.6f}")
    if out_path:
        write_json_atomic(out_path, {"log_likelihood": value, "tokens": len(stream)})
        _write_sidecar(out_path, "score loglik", ctx.params)


@score.command("contrast")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="JSON-lines of {positive: [ids], negative: [ids]}.")
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--bos", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def score_contrast(ctx, pairs_path, weights, scripted, bos, out_path):
    model = _load_model(weights, scripted)
    pairs = []
    with open(pairs_path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "positive" not in rec or "negative" not in rec:
                raise click.UsageError(f"pair record {i} needs 'positive' and 'negative' id lists")
            pairs.append(
                (
                    np.asarray(rec["positive"], dtype=np.int64),
                    np.asarray(rec["negative"], dtype=np.int64),
                )
            )
    acc = contrastive_accuracy(model, pairs, bos=bos)
    click.echo(f"{acc:.4f}")
    if out_path:
        write_json_atomic(out_path, {"accuracy": acc, "pairs": len(pairs)})
        _write_sidecar(out_path, "score contrast", ctx.params)


# ---------------------------------------------------------------------------
# Windowing.


@cli.group()
def window():
    """Tokenization/synthesis window planning and merging."""


@window.command("plan")
@click.option("--mode", type=click.Choice(["tokens", "synthesis"]), default="tokens",
              show_default=True)
@click.option("--stream-len", type=int, default=None)
@click.option("--width", type=int, default=None)
@click.option("--overlap", type=int, default=None)
@click.option("--continuation-s", type=float, default=None)
@click.option("--prompt-s", type=float, default=3.0, show_default=True)
@click.option("--width-s", type=float, default=30.0, show_default=True)
@click.option("--overlap-s", type=float, default=4.0, show_default=True)
@click.option("--frame-rate", type=float, default=25.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def window_plan(ctx, mode, stream_len, width, overlap, continuation_s, prompt_s, width_s,
                overlap_s, frame_rate, out_path):
    if mode == "tokens":
        if stream_len is None or width is None or overlap is None:
            raise click.UsageError("token mode needs --stream-len, --width, and --overlap")
        plan = plan_tokenization_windows(stream_len, width, overlap)
    else:
        if continuation_s is None:
            raise click.UsageError("synthesis mode needs --continuation-s")
        plan = plan_synthesis_windows(
            continuation_s, prompt_s, width_s, overlap_s, frame_rate
        )
    payload = plan.to_dict()
    click.echo(json.dumps(payload, indent=2))
    if out_path:
        write_json_atomic(out_path, payload)
        _write_sidecar(out_path, "window plan", ctx.params)


@window.command("merge")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--windows", "windows_path", required=True, type=click.Path(exists=True),
              help="JSON-lines, one {ids: [...]} record per window.")
@click.option("--frame-rate", type=float, default=25.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def window_merge(ctx, plan_path, windows_path, frame_rate, out_path):
    with open(plan_path, encoding="utf-8") as fh:
        plan = WindowPlan.from_dict(json.load(fh))
    pieces = [s.ids for s in read_streams_jsonl(windows_path)]
    merged = merge_windows(pieces, plan, frame_rate)
    write_stream(out_path, merged)
    _write_sidecar(out_path, "window merge", ctx.params)
    click.echo(f"wrote {len(merged)} tokens to {out_path}")


# ---------------------------------------------------------------------------
# Evaluation.


@cli.group("eval")
def eval_group():
    """Long-form evaluation metrics."""


@eval_group.command("sc-l")
@click.option("--prompt-file", required=True, type=click.Path(exists=True))
@click.option("--continuation-file", required=True, type=click.Path(exists=True))
@click.option("--dim", type=int, default=256, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--figure", "figure_path", type=click.Path(), default=None)
@click.pass_context
def eval_sc_l(ctx, prompt_file, continuation_file, dim, out_path, figure_path):
    """Prompt-to-segment coherence over successive 100-word segments."""
    prompt = Path(prompt_file).read_text(encoding="utf-8")
    continuation = Path(continuation_file).read_text(encoding="utf-8")
    series = sc_l(prompt, continuation, HashedTrigramEmbedder(dim=dim))
    click.echo(json.dumps(series.to_dict()))
    if out_path:
        write_json_atomic(out_path, series.to_dict())
        _write_sidecar(out_path, "eval sc-l", ctx.params)
    if figure_path:
        report_mod.render_sc_l_figure({Path(continuation_file).stem: series}, figure_path)


@eval_group.command("similarity")
@click.option("--file-a", required=True, type=click.Path(exists=True))
@click.option("--file-b", required=True, type=click.Path(exists=True))
@click.option("--dim", type=int, default=256, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def eval_similarity(ctx, file_a, file_b, dim, out_path):
    text_a = Path(file_a).read_text(encoding="utf-8")
    text_b = Path(file_b).read_text(encoding="utf-8")
    value = reference_similarity(text_a, text_b, HashedTrigramEmbedder(dim=dim))
    click.echo(f"{value:.6f}")
    if out_path:
        write_json_atomic(out_path, {"similarity": value})
        _write_sidecar(out_path, "eval similarity", ctx.params)


@eval_group.command("strata")
@click.option("--prompt-s", type=float, required=True)
@click.option("--max-s", type=float, required=True)
@click.option("--span-s", type=float, default=5.0, show_default=True)
@click.option("--probe-seed", type=int, default=None,
              help="Also sample one probe span per stratum with this seed.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def eval_strata(ctx, prompt_s, max_s, span_s, probe_seed, out_path):
    strata = time_strata(prompt_s, max_s)
    payload: dict = {"strata": [list(s) for s in strata]}
    if probe_seed is not None:
        payload["probe_spans"] = [list(s) for s in probe_spans(strata, span_s, probe_seed)]
    click.echo(json.dumps(payload))
    if out_path:
        write_json_atomic(out_path, payload)
        _write_sidecar(out_path, "eval strata", ctx.params)


@eval_group.command("judge")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="JSON-lines of {pair_id, text_a, text_b}.")
@click.option("--judge", "judge_kind", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--endpoint", default=None, help="Judge endpoint URL (http judge).")
@click.option("--model", "judge_model", default=None, help="Judge model name (http judge).")
@click.option("--api-key-env", default="LONGGEN_JUDGE_API_KEY", show_default=True)
@click.option("--timeout-s", type=float, default=60.0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def eval_judge(ctx, pairs_path, judge_kind, endpoint, judge_model, api_key_env, timeout_s,
               jobs, out_path):
    """Order-flipped side-by-side win rate for the A side of each pair."""
    records = []
    with open(pairs_path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "text_a" not in rec or "text_b" not in rec:
                raise click.UsageError(f"pair record {i} needs 'text_a' and 'text_b'")
            records.append(rec)
    pairs = [(r["text_a"], r["text_b"]) for r in records]
    if judge_kind == "mock":
        judge = MockUniqueVocabJudge()
    else:
        if not endpoint or not judge_model:
            raise click.UsageError("http judge needs --endpoint and --model")
        judge = HttpJudge(endpoint, judge_model, api_key_env=api_key_env, timeout_s=timeout_s)
    result = side_by_side(pairs, judge, jobs=jobs)
    for rec in result.records:
        given = records[rec["pair_id"]].get("pair_id")
        if given is not None:
            rec["pair_id"] = given
    click.echo(f"{result.win_pct_a:.1f}")
    if result.judge_errors:
        click.echo(f"judge errors: {result.judge_errors}", err=True)
    if out_path:
        write_jsonl_atomic(out_path, result.records)
        _write_sidecar(
            out_path,
            "eval judge",
            {**ctx.params, "win_pct_a": result.win_pct_a, "judge_errors": result.judge_errors},
        )


# ---------------------------------------------------------------------------
# Dataset construction.


@cli.group()
def dataset():
    """Long-span manifest construction and statistics."""


@dataset.command("agglomerate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--target-s", type=float, default=240.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def dataset_agglomerate(ctx, manifest_path, target_s, out_path):
    spans = agglomerate(load_utterances(manifest_path), target_s)
    save_spans(out_path, spans)
    _write_sidecar(out_path, "dataset agglomerate", ctx.params)
    click.echo(f"wrote {len(spans)} spans to {out_path}")


@dataset.command("stats")
@click.option("--spans", "spans_path", required=True, type=click.Path(exists=True))
@click.option("--label", default="split", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def dataset_stats(ctx, spans_path, label, out_path):
    stats = split_stats(load_spans(spans_path))
    click.echo(format_stats_table(stats, label))
    if out_path:
        write_json_atomic(out_path, stats.to_dict())
        _write_sidecar(out_path, "dataset stats", ctx.params)


@dataset.command("pairs")
@click.option("--spans", "spans_path", required=True, type=click.Path(exists=True))
@click.option("--prompt-s", type=float, default=10.0, show_default=True)
@click.option("--min-duration-s", type=float, default=210.0, show_default=True)
@click.option("--frame-rate", type=float, default=25.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def dataset_pairs(ctx, spans_path, prompt_s, min_duration_s, frame_rate, out_path):
    pairs = make_eval_pairs(load_spans(spans_path), prompt_s, min_duration_s, frame_rate)
    write_jsonl_atomic(out_path, pairs)
    _write_sidecar(out_path, "dataset pairs", ctx.params)
    click.echo(f"wrote {len(pairs)} prompt/reference pairs to {out_path}")


# ---------------------------------------------------------------------------
# Bench.


def _bench_models(arch: str, model_config: str | None, seed: int):
    base = _load_model_config(model_config)
    models = []
    if arch in ("hybrid", "both"):
        models.append(("hybrid", NeuralSequenceModel.from_random(base, seed)))
    if arch in ("transformer", "both"):
        tcfg = transformer_config(base)
        models.append(("transformer", NeuralSequenceModel.from_random(tcfg, seed)))
    return models


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


@cli.group()
def bench():
    """Step-latency and throughput measurements."""


@bench.command("latency")
@click.option("--arch", type=click.Choice(["hybrid", "transformer", "both"]), default="both",
              show_default=True)
@click.option("--model-config", type=click.Path(exists=True), default=None,
              help="ModelConfig JSON; defaults to the desk-scale config.")
@click.option("--positions", default="1024,4096", show_default=True)
@click.option("--warmup", type=int, default=64, show_default=True)
@click.option("--repeats", type=int, default=25, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--figure", "figure_path", type=click.Path(), default=None)
@click.pass_context
def bench_latency(ctx, arch, model_config, positions, warmup, repeats, seed, out_path,
                  csv_path, figure_path):
    probe = _parse_int_list(positions)
    reports = [
        measure_step_latency(model, probe, warmup=warmup, repeats=repeats, seed=seed,
                             model_id=name)
        for name, model in _bench_models(arch, model_config, seed)
    ]
    write_json_atomic(out_path, [r.to_dict() for r in reports])
    _write_sidecar(out_path, "bench latency", ctx.params)
    if csv_path:
        report_mod.latency_csv(csv_path, reports)
    if figure_path:
        report_mod.render_latency_figure(reports, figure_path)
    for r in reports:
        for p in r.points:
            click.echo(f"{r.model_id} @ {p.position}: median {p.median_s * 1e3:.3f} ms")


@bench.command("throughput")
@click.option("--arch", type=click.Choice(["hybrid", "transformer", "both"]), default="both",
              show_default=True)
@click.option("--model-config", type=click.Path(exists=True), default=None)
@click.option("--targets", default="1024,4096,16384", show_default=True)
@click.option("--budget-bytes", type=int, required=True,
              help="Fixed memory budget for lane states; no default on purpose.")
@click.option("--repeats", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--figure", "figure_path", type=click.Path(), default=None)
@click.pass_context
def bench_throughput(ctx, arch, model_config, targets, budget_bytes, repeats, seed, out_path,
                     csv_path, figure_path):
    lens = _parse_int_list(targets)
    reports = [
        measure_throughput_curve(model, lens, budget_bytes, repeats=repeats, seed=seed,
                                 model_id=name)
        for name, model in _bench_models(arch, model_config, seed)
    ]
    write_json_atomic(out_path, [r.to_dict() for r in reports])
    _write_sidecar(out_path, "bench throughput", ctx.params)
    if csv_path:
        report_mod.throughput_csv(csv_path, reports)
    if figure_path:
        report_mod.render_throughput_figure(reports, figure_path)
    for r in reports:
        for p in r.points:
            click.echo(
                f"{r.model_id} @ {p.target_len}: {p.tokens_per_s:.1f} tok/s "
                f"(batch {p.batch_size})"
            )


# ---------------------------------------------------------------------------
# Weights.


@cli.group()
def weights():
    """Weight archive creation and inspection."""


@weights.command("init")
@click.option("--model-config", type=click.Path(exists=True), default=None,
              help="ModelConfig JSON; defaults to the desk-scale config.")
@click.option("--transformer", "as_transformer", is_flag=True, default=False,
              help="Use the full-attention baseline pattern.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def weights_init(ctx, model_config, as_transformer, seed, out_path):
    config = _load_model_config(model_config)
    if as_transformer:
        config = transformer_config(config)
    params = init_random_weights(config, seed)
    save_weights(out_path, params, config)
    _write_sidecar(out_path, "weights init", ctx.params)
    click.echo(f"wrote {len(params)} tensors to {out_path}")


@weights.command("inspect")
@click.option("--archive", "archive_path", required=True, type=click.Path(exists=True))
def weights_inspect(archive_path):
    config = load_archive_config(archive_path)
    params = load_weights(archive_path, config)
    if config is not None:
        click.echo(json.dumps(config.to_dict()))
    total = 0
    for name, arr in params.items():
        click.echo(f"{name:<40} {str(arr.shape):<18} {arr.dtype}")
        total += arr.size
    click.echo(f"total parameters: {total}")


def main():
    try:
        cli(standalone_mode=True)
    except BrokenPipeError:
        # Downstream pager/head closed the pipe; not an error.  Point stdout
        # at devnull so the interpreter's exit flush stays quiet too.
        import os

        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        sys.exit(0)


if __name__ == "__main__":
    main()
