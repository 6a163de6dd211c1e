"""Efficiency harness: per-position step latency and max throughput under a
memory budget.

Memory feasibility uses the models' analytic per-lane state accounting
rather than allocator probing, so budgets behave identically across
machines; wall-clock numbers use a monotonic clock and medians, and CI
asserts ratios only, never absolute times.
"""

from __future__ import annotations

import contextlib
import dataclasses
import gc
import platform
import time

import numpy as np

from .decoder import DecoderSession
from .errors import InfeasibleError


def machine_descriptor() -> dict:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


@contextlib.contextmanager
def _gc_paused():
    # A generation-2 collection landing inside a timed step poisons that
    # sample; collections are deferred until the section ends.
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


@dataclasses.dataclass(frozen=True)
class LatencyPoint:
    position: int
    median_s: float
    p90_s: float
    repeats: int
    lane_state_bytes: int


@dataclasses.dataclass
class LatencyReport:
    model_id: str
    points: list[LatencyPoint]
    warmup: int
    repeats: int
    seed: int
    machine: dict

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "warmup": self.warmup,
            "repeats": self.repeats,
            "seed": self.seed,
            "machine": self.machine,
            "points": [dataclasses.asdict(p) for p in self.points],
        }


def measure_step_latency(
    model,
    positions: list[int],
    warmup: int = 64,
    repeats: int = 25,
    seed: int = 0,
    model_id: str = "model",
) -> LatencyReport:
    """Median and p90 wall-clock per-step time at each probe position.

    One session is stepped from zero through the largest probe with random
    tokens; at each probe, `repeats` consecutive steps are timed
    individually.  Steps taken while advancing count as warmup.
    """
    if repeats < 5:
        raise ValueError("repeats must be at least 5 for stable percentiles")
    positions = list(positions)
    if positions != sorted(set(positions)):
        raise ValueError("probe positions must be strictly increasing")
    if positions[0] < warmup:
        raise ValueError(f"first probe {positions[0]} gives fewer than {warmup} warmup steps")

    rng = np.random.default_rng(seed)
    session = DecoderSession(model, seed=seed, batch_shape=(1,))
    vocab = model.vocab_size
    points: list[LatencyPoint] = []
    pos = 0
    for probe in positions:
        while pos < probe:
            session.step(rng.integers(0, vocab, size=1))
            pos += 1
        samples = np.empty(repeats)
        tokens = rng.integers(0, vocab, size=(repeats, 1))
        with _gc_paused():
            for i in range(repeats):
                t0 = time.perf_counter()
                session.step(tokens[i])
                samples[i] = time.perf_counter() - t0
                pos += 1
        points.append(
            LatencyPoint(
                position=probe,
                median_s=float(np.median(samples)),
                p90_s=float(np.percentile(samples, 90)),
                repeats=repeats,
                lane_state_bytes=model.lane_state_bytes(probe),
            )
        )
    return LatencyReport(
        model_id=model_id,
        points=points,
        warmup=warmup,
        repeats=repeats,
        seed=seed,
        machine=machine_descriptor(),
    )


@dataclasses.dataclass(frozen=True)
class ThroughputPoint:
    target_len: int
    tokens_per_s: float
    batch_size: int
    lane_state_bytes: int
    memory_budget_bytes: int


@dataclasses.dataclass
class ThroughputReport:
    model_id: str
    points: list[ThroughputPoint]
    seed: int
    machine: dict

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "seed": self.seed,
            "machine": self.machine,
            "points": [dataclasses.asdict(p) for p in self.points],
        }


def max_feasible_batch(model, target_len: int, memory_budget_bytes: int) -> int:
    """Largest batch whose total per-lane state fits the budget, found by
    doubling then bisection over the analytic accounting."""
    lane = model.lane_state_bytes(target_len)

    def feasible(batch: int) -> bool:
        return batch * lane <= memory_budget_bytes

    if not feasible(1):
        raise InfeasibleError(
            f"budget of {memory_budget_bytes} bytes cannot hold one lane "
            f"({lane} bytes at length {target_len})"
        )
    lo = 1
    while feasible(lo * 2):
        lo *= 2
    hi = lo * 2  # first known-infeasible size
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def measure_throughput(
    model,
    target_len: int,
    memory_budget_bytes: int,
    repeats: int = 10,
    warmup: int = 3,
    seed: int = 0,
) -> ThroughputPoint:
    """Steady-state decoded tokens per second at `target_len` with the best
    feasible batch.

    Lane states are synthesized at the target position (layouts are exact,
    contents random), then `repeats` batched steps are timed; the rate is
    batch x repeats / elapsed.
    """
    batch = max_feasible_batch(model, target_len, memory_budget_bytes)
    rng = np.random.default_rng(seed)
    session = DecoderSession(model, seed=seed, batch_shape=(batch,))
    model.seed_states_to_position(session.states, target_len, rng)
    vocab = model.vocab_size
    for _ in range(warmup):
        session.step(rng.integers(0, vocab, size=batch))
    tokens = rng.integers(0, vocab, size=(repeats, batch))
    with _gc_paused():
        t0 = time.perf_counter()
        for i in range(repeats):
            session.step(tokens[i])
        elapsed = time.perf_counter() - t0
    return ThroughputPoint(
        target_len=target_len,
        tokens_per_s=batch * repeats / elapsed,
        batch_size=batch,
        lane_state_bytes=model.lane_state_bytes(target_len),
        memory_budget_bytes=memory_budget_bytes,
    )


def measure_throughput_curve(
    model,
    target_lens: list[int],
    memory_budget_bytes: int,
    repeats: int = 10,
    warmup: int = 3,
    seed: int = 0,
    model_id: str = "model",
) -> ThroughputReport:
    points = [
        measure_throughput(model, t, memory_budget_bytes, repeats=repeats, warmup=warmup, seed=seed)
        for t in target_lens
    ]
    return ThroughputReport(model_id=model_id, points=points, seed=seed, machine=machine_descriptor())
