"""Index-level planners for windowed tokenization and synthesis.

All planners are pure arithmetic over token/frame indices; the actual
tokenizer or synthesizer is injected by the caller (identity versions are
what the tests use).  The merge rule splits every overlap at its midpoint:
the first half of the overlap is kept from the earlier window, the second
half from the later one, so keep ranges tile the stream exactly once.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, NamedTuple

import numpy as np

from .streams import TokenStream, duration_to_tokens


class Window(NamedTuple):
    source_start: int
    source_end: int
    keep_start: int
    keep_end: int


@dataclasses.dataclass(frozen=True)
class WindowPlan:
    stream_len: int
    width: int
    overlap: int
    windows: tuple[Window, ...]

    def to_dict(self) -> dict:
        return {
            "stream_len": self.stream_len,
            "width": self.width,
            "overlap": self.overlap,
            "windows": [list(w) for w in self.windows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WindowPlan":
        try:
            return cls(
                stream_len=int(d["stream_len"]),
                width=int(d["width"]),
                overlap=int(d["overlap"]),
                windows=tuple(Window(*map(int, w)) for w in d["windows"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"not a tokenization window plan: {exc}") from exc


def plan_tokenization_windows(stream_len: int, width: int, overlap: int) -> WindowPlan:
    """Overlapped fixed-width windows whose keep ranges partition the stream.

    The overlap must be even so its midpoint is a whole index; streams
    shorter than one window get a single-window plan.
    """
    if width < 1:
        raise ValueError("width must be positive")
    if not 0 < overlap < width:
        raise ValueError(f"overlap must satisfy 0 < overlap < width, got {overlap} vs {width}")
    if overlap % 2 != 0:
        raise ValueError(f"overlap must be even so the midpoint split is unambiguous, got {overlap}")
    if stream_len < 1:
        raise ValueError("stream_len must be positive")

    stride = width - overlap
    extents: list[tuple[int, int]] = []
    start = 0
    while start + width < stream_len:
        extents.append((start, start + width))
        start += stride
    extents.append((start, min(start + width, stream_len)))

    windows: list[Window] = []
    keep_start = 0
    for i, (s, e) in enumerate(extents):
        if i + 1 < len(extents):
            # Overlap with the successor is [next_start, s + width); split it
            # in the middle.
            keep_end = extents[i + 1][0] + overlap // 2
        else:
            keep_end = stream_len
        windows.append(Window(s, e, keep_start, keep_end))
        keep_start = keep_end
    return WindowPlan(stream_len, width, overlap, tuple(windows))


def merge_windows(
    windowed_tokens: list[np.ndarray],
    plan: WindowPlan,
    frame_rate_hz: float = 25.0,
) -> TokenStream:
    """Concatenate each window's keep span into one stream.

    With an identity per-window tokenizer this reproduces the original
    stream bit-exactly.
    """
    if len(windowed_tokens) != len(plan.windows):
        raise ValueError(
            f"got {len(windowed_tokens)} windows, plan has {len(plan.windows)}"
        )
    parts = []
    for seq, w in zip(windowed_tokens, plan.windows):
        seq = np.asarray(seq)
        extent = w.source_end - w.source_start
        if seq.shape[0] != extent:
            raise ValueError(
                f"window [{w.source_start},{w.source_end}) holds {seq.shape[0]} tokens, "
                f"expected {extent}"
            )
        parts.append(seq[w.keep_start - w.source_start : w.keep_end - w.source_start])
    return TokenStream(np.concatenate(parts), frame_rate_hz)


def tokenize_windowed(
    ids: np.ndarray, plan: WindowPlan, tokenize: Callable[[np.ndarray], np.ndarray]
) -> list[np.ndarray]:
    """Apply a per-window tokenizer to each source extent."""
    ids = np.asarray(ids)
    return [tokenize(ids[w.source_start : w.source_end]) for w in plan.windows]


# ---------------------------------------------------------------------------
# Implicit-EOS avoidance: pad the final short window with material from the
# stream start so its tokens are produced as if more speech followed, then
# drop everything tokenized over the pad.


@dataclasses.dataclass(frozen=True)
class EosAvoidancePlan:
    stream_len: int
    width: int
    pad_length: int
    pad_source: tuple[int, int]
    post_tokenize_drop: tuple[int, int]
    tail_drop_seconds: float = 10.0

    def to_dict(self) -> dict:
        return {
            "stream_len": self.stream_len,
            "width": self.width,
            "pad_length": self.pad_length,
            "pad_source": list(self.pad_source),
            "post_tokenize_drop": list(self.post_tokenize_drop),
            "tail_drop_seconds": self.tail_drop_seconds,
        }


def plan_final_window_padding(
    stream_len: int,
    width: int,
    stride: int | None = None,
    tail_drop_seconds: float = 10.0,
) -> EosAvoidancePlan:
    """How much stream-start material pads the final window to full width.

    The drop span is expressed in padded-stream coordinates so the emitted
    stream never contains tokens derived from the pad.
    """
    if stream_len < width:
        raise ValueError(f"stream_len {stream_len} shorter than window width {width}")
    if stride is None:
        stride = width
    if not 0 < stride <= width:
        raise ValueError(f"stride must be in (0, width], got {stride}")
    start = 0
    while start + width < stream_len:
        start += stride
    pad = width - (stream_len - start)
    return EosAvoidancePlan(
        stream_len=stream_len,
        width=width,
        pad_length=pad,
        pad_source=(0, pad),
        post_tokenize_drop=(stream_len, stream_len + pad),
        tail_drop_seconds=tail_drop_seconds,
    )


def pad_stream(ids: np.ndarray, plan: EosAvoidancePlan) -> np.ndarray:
    ids = np.asarray(ids)
    if ids.shape[0] != plan.stream_len:
        raise ValueError(f"stream holds {ids.shape[0]} tokens, plan expects {plan.stream_len}")
    return np.concatenate([ids, ids[plan.pad_source[0] : plan.pad_source[1]]])


def drop_padded_tokens(tokenized: np.ndarray, plan: EosAvoidancePlan) -> np.ndarray:
    """Remove the tokens produced over the padded region (1:1 token rate)."""
    tokenized = np.asarray(tokenized)
    lo, hi = plan.post_tokenize_drop
    return np.concatenate([tokenized[:lo], tokenized[hi:]])


def apply_tail_drop(stream: TokenStream, seconds: float | None = None) -> TokenStream:
    """Dataset-preparation step: drop the final `seconds` of a stream."""
    if seconds is None:
        seconds = 10.0
    n = duration_to_tokens(seconds, stream.frame_rate_hz)
    keep = max(len(stream) - n, 0)
    return stream.slice(0, keep)


# ---------------------------------------------------------------------------
# Speaker-prompted synthesis windows.


class SynthesisWindow(NamedTuple):
    prompt_prefix: tuple[int, int]  # frames of the fixed speaker prompt
    content_span: tuple[int, int]   # continuation frames fed to this window
    keep_span: tuple[int, int]      # continuation frames kept after trimming


@dataclasses.dataclass(frozen=True)
class SynthesisPlan:
    continuation_len_s: float
    prompt_len_s: float
    width_s: float
    overlap_s: float
    frame_rate_hz: float
    prompt_span: tuple[int, int]
    windows: tuple[SynthesisWindow, ...]
    boundary_times: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "continuation_len_s": self.continuation_len_s,
            "prompt_len_s": self.prompt_len_s,
            "width_s": self.width_s,
            "overlap_s": self.overlap_s,
            "frame_rate_hz": self.frame_rate_hz,
            "prompt_span": list(self.prompt_span),
            "windows": [
                {
                    "prompt_prefix": list(w.prompt_prefix),
                    "content_span": list(w.content_span),
                    "keep_span": list(w.keep_span),
                }
                for w in self.windows
            ],
            "boundary_times": list(self.boundary_times),
        }


def plan_synthesis_windows(
    continuation_len_s: float,
    prompt_len_s: float = 3.0,
    width_s: float = 30.0,
    overlap_s: float = 4.0,
    frame_rate_hz: float = 25.0,
) -> SynthesisPlan:
    """Fixed-width synthesis windows, each prefixed by the same speaker
    prompt, with symmetric overlap trimming.

    With the defaults (3 s prompt, 30 s windows, 4 s overlaps) the kept
    audio per interior window is 23 s and chunk boundaries fall at
    25 + 23n seconds into the continuation.
    """
    if min(continuation_len_s, prompt_len_s, width_s, overlap_s) <= 0:
        raise ValueError("durations must be positive")
    rate = frame_rate_hz

    def frames(seconds: float) -> int:
        n = seconds * rate
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"{seconds}s is not a whole number of frames at {rate} Hz")
        return int(round(n))

    total = frames(continuation_len_s)
    prompt_f = frames(prompt_len_s)
    width_f = frames(width_s)
    overlap_f = frames(overlap_s)
    if overlap_f % 2 != 0:
        raise ValueError("overlap must trim symmetrically, so it needs an even frame count")
    trim = overlap_f // 2
    capacity = width_f - prompt_f  # continuation frames per full window
    stride = capacity - overlap_f
    if stride <= 0:
        raise ValueError("window width must exceed prompt plus overlap")

    prompt_span = (0, prompt_f)
    if total <= capacity:
        windows = (SynthesisWindow(prompt_span, (0, total), (0, total)),)
        return SynthesisPlan(
            continuation_len_s, prompt_len_s, width_s, overlap_s, rate,
            prompt_span, windows, (),
        )

    extents: list[tuple[int, int]] = []
    start = 0
    while start + capacity < total:
        extents.append((start, start + capacity))
        start += stride
    extents.append((start, total))

    windows: list[SynthesisWindow] = []
    boundaries: list[float] = []
    for i, (s, e) in enumerate(extents):
        ks = s if i == 0 else s + trim
        ke = e if i == len(extents) - 1 else e - trim
        windows.append(SynthesisWindow(prompt_span, (s, e), (ks, ke)))
        if i > 0:
            boundaries.append(ks / rate)
    return SynthesisPlan(
        continuation_len_s, prompt_len_s, width_s, overlap_s, rate,
        prompt_span, tuple(windows), tuple(boundaries),
    )


def synthesize_windowed(
    frames: np.ndarray,
    plan: SynthesisPlan,
    synthesize: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Run the injected per-window synthesizer and reassemble the keep spans.

    The synthesizer maps content frames to output frames 1:1; an identity
    synthesizer reproduces the continuation bit-exactly.
    """
    frames = np.asarray(frames)
    parts = []
    for w in plan.windows:
        cs, ce = w.content_span
        out = np.asarray(synthesize(frames[cs:ce]))
        if out.shape[0] != ce - cs:
            raise ValueError("synthesizer changed the window length")
        ks, ke = w.keep_span
        parts.append(out[ks - cs : ke - cs])
    return np.concatenate(parts)


class ProbeSpan(NamedTuple):
    center_kind: str  # "boundary" or "midpoint"
    start_s: float
    end_s: float


def boundary_probe_spans(plan: SynthesisPlan, span_s: float = 5.0) -> list[ProbeSpan]:
    """Equal-length spans centered at every chunk boundary and every chunk
    midpoint, for boundary-artifact listening studies."""
    half = span_s / 2.0
    spans = [ProbeSpan("boundary", b - half, b + half) for b in plan.boundary_times]
    rate = plan.frame_rate_hz
    for w in plan.windows:
        mid = (w.keep_span[0] + w.keep_span[1]) / 2.0 / rate
        spans.append(ProbeSpan("midpoint", mid - half, mid + half))
    spans.sort(key=lambda p: (p.start_s, p.center_kind))
    return spans
