"""Long-form generation drivers.

Two modes: `single_session` keeps one decoding session alive for the whole
target duration (requires a constant-state model, never resets), and
`slide_and_prompt` re-prompts a short-context model chunk by chunk with the
tail of the previous window, which is the standard way to stretch a
bounded-context baseline past its training length.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .decoder import DecoderSession
from .streams import TokenStream, duration_to_tokens

MODE_SINGLE_SESSION = "single_session"
MODE_SLIDE_AND_PROMPT = "slide_and_prompt"

DEFAULT_STATE_PROBES = (1, 1000, 16384)


@dataclasses.dataclass(frozen=True)
class GenerationSpec:
    prompt: TokenStream
    target_duration_s: float
    temperature: float = 1.0
    seed: int = 0
    mode: str = MODE_SINGLE_SESSION
    reprompt_s: float = 3.0
    chunk_limit_s: float | None = None
    greedy: bool = False

    def __post_init__(self):
        if self.mode not in (MODE_SINGLE_SESSION, MODE_SLIDE_AND_PROMPT):
            raise ValueError(f"unknown generation mode {self.mode!r}")
        if self.target_duration_s < self.prompt.duration_s:
            raise ValueError(
                f"target duration {self.target_duration_s}s is shorter than the "
                f"{self.prompt.duration_s}s prompt"
            )
        n = self.reprompt_s * self.prompt.frame_rate_hz
        if abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"reprompt_s {self.reprompt_s} is not a whole token count at "
                f"{self.prompt.frame_rate_hz} Hz"
            )

    @property
    def reprompt_tokens(self) -> int:
        return duration_to_tokens(self.reprompt_s, self.prompt.frame_rate_hz)

    @property
    def new_token_count(self) -> int:
        return duration_to_tokens(
            self.target_duration_s - self.prompt.duration_s, self.prompt.frame_rate_hz
        )


@dataclasses.dataclass
class ChunkRecord:
    context: np.ndarray  # tokens the chunk was conditioned on
    emitted: np.ndarray  # new tokens it produced


@dataclasses.dataclass
class GenerationResult:
    stream: TokenStream
    sidecar: dict


def slide_and_prompt(
    model,
    prompt_ids: np.ndarray,
    total_tokens: int,
    chunk_tokens: int,
    reprompt_tokens: int,
    temperature: float = 1.0,
    seed: int = 0,
    greedy: bool = False,
    return_trace: bool = False,
    frame_rate_hz: float = 25.0,
):
    """Windowed extension: chunk 1 conditions on the full prompt; every later
    chunk starts from a fresh model state conditioned only on the last
    `reprompt_tokens` of the previous window.

    The concatenated emissions (context repeats excluded) hold exactly
    `total_tokens` tokens.  Per-chunk sampler seeds derive deterministically
    from the stream-level seed.
    """
    prompt_ids = np.asarray(prompt_ids, dtype=np.int64)
    if prompt_ids.size == 0:
        raise ValueError("prompt must hold at least one token")
    if not 0 < reprompt_tokens < chunk_tokens:
        raise ValueError(
            f"need 0 < reprompt_tokens < chunk_tokens, got {reprompt_tokens} vs {chunk_tokens}"
        )
    if total_tokens < 0:
        raise ValueError("total_tokens must be non-negative")

    seed_seq = np.random.SeedSequence(seed)
    chunks: list[ChunkRecord] = []
    parts: list[np.ndarray] = []
    context = prompt_ids
    emitted = 0
    first = True
    while emitted < total_tokens:
        budget = chunk_tokens if first else chunk_tokens - reprompt_tokens
        n = min(budget, total_tokens - emitted)
        rng = np.random.default_rng(seed_seq.spawn(1)[0])
        session = DecoderSession(model, rng=rng)
        session.consume(context)
        new = session.sample_tokens(n, temperature=temperature, greedy=greedy)
        chunks.append(ChunkRecord(context=context.copy(), emitted=new.copy()))
        parts.append(new)
        emitted += n
        window = np.concatenate([context, new])
        context = window[-reprompt_tokens:]
        first = False

    ids = np.concatenate(parts) if parts else np.empty(0, dtype=np.int32)
    stream = TokenStream(ids.astype(np.int32), frame_rate_hz)
    if return_trace:
        return stream, chunks
    return stream


def generate_long(spec: GenerationSpec, model,
                  state_probe_positions: tuple[int, ...] = DEFAULT_STATE_PROBES) -> GenerationResult:
    """Continue `spec.prompt` out to the target duration.

    Returns the continuation (prompt excluded) plus a sidecar dict with the
    mode, seed, chunk boundaries, and state-size probes.
    """
    total = spec.new_token_count
    rate = spec.prompt.frame_rate_hz

    if spec.mode == MODE_SINGLE_SESSION:
        if not getattr(model, "constant_state", False):
            raise ValueError("single_session mode requires a constant-state model")
        if total and len(spec.prompt) == 0:
            raise ValueError("prompt must hold at least one token")
        session = DecoderSession(model, seed=spec.seed)
        session.consume(spec.prompt.ids)
        probes = sorted(p for p in state_probe_positions if 1 <= p <= total)
        probe_bytes: dict[int, int] = {}
        out = np.empty(total, dtype=np.int32)
        done = 0
        for p in probes:
            out[done:p] = session.sample_tokens(
                p - done, temperature=spec.temperature, greedy=spec.greedy
            )
            done = p
            probe_bytes[p] = session.state_bytes()
        if done < total:
            out[done:total] = session.sample_tokens(
                total - done, temperature=spec.temperature, greedy=spec.greedy
            )
        stream = TokenStream(out, rate)
        sidecar = {
            "mode": spec.mode,
            "seed": spec.seed,
            "temperature": spec.temperature,
            "greedy": spec.greedy,
            "new_tokens": total,
            "chunk_boundaries": [total] if total else [],
            "state_bytes_probes": {str(k): v for k, v in sorted(probe_bytes.items())},
        }
        return GenerationResult(stream, sidecar)

    if spec.chunk_limit_s is None:
        raise ValueError("slide_and_prompt mode needs chunk_limit_s")
    chunk_tokens = duration_to_tokens(spec.chunk_limit_s, rate)
    reprompt = spec.reprompt_tokens
    if chunk_tokens <= reprompt:
        raise ValueError(
            f"chunk limit of {chunk_tokens} tokens does not exceed the "
            f"{reprompt}-token re-prompt"
        )
    stream, chunks = slide_and_prompt(
        model,
        spec.prompt.ids,
        total,
        chunk_tokens,
        reprompt,
        temperature=spec.temperature,
        seed=spec.seed,
        greedy=spec.greedy,
        return_trace=True,
        frame_rate_hz=rate,
    )
    boundaries = np.cumsum([len(c.emitted) for c in chunks]).tolist()
    sidecar = {
        "mode": spec.mode,
        "seed": spec.seed,
        "temperature": spec.temperature,
        "greedy": spec.greedy,
        "new_tokens": total,
        "chunk_tokens": chunk_tokens,
        "reprompt_tokens": reprompt,
        "chunk_boundaries": boundaries,
        "state_bytes_probes": {},
    }
    return GenerationResult(stream, sidecar)
