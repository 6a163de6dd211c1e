"""Coherence-over-length and similarity metrics on transcripts, plus the
time-stratified span planning used for rating long generations minute by
minute."""

from __future__ import annotations

import dataclasses

import numpy as np

from .embed import TextEmbedder, cosine_similarity, default_embedder

SEGMENT_WORDS = 100


@dataclasses.dataclass(frozen=True)
class ScLSeries:
    """Cosine similarity between the prompt and each successive 100-word
    continuation segment; points are (start word offset, score)."""

    prompt_embedding: np.ndarray
    points: tuple[tuple[int, float], ...]

    def scores(self) -> list[float]:
        return [s for _, s in self.points]

    def to_dict(self) -> dict:
        return {"points": [[l, s] for l, s in self.points]}


def sc_l(prompt_text: str, continuation_text: str, embedder: TextEmbedder | None = None) -> ScLSeries:
    """Semantic coherence over length.

    The continuation is split into consecutive 100-word spans (whitespace
    word boundaries); a trailing short span is dropped.  100 words is about
    half a minute of speech, so the word axis normalizes out speech-rate
    differences and degenerate silences.
    """
    if not prompt_text.strip():
        raise ValueError("prompt text must be non-empty")
    if embedder is None:
        embedder = default_embedder()
    prompt_vec = embedder.embed(prompt_text)
    words = continuation_text.split()
    points = []
    for start in range(0, len(words) - SEGMENT_WORDS + 1, SEGMENT_WORDS):
        segment = " ".join(words[start : start + SEGMENT_WORDS])
        score = cosine_similarity(prompt_vec, embedder.embed(segment))
        points.append((start, score))
    return ScLSeries(prompt_embedding=prompt_vec, points=tuple(points))


def reference_similarity(generated_text: str, reference_text: str,
                         embedder: TextEmbedder | None = None) -> float:
    """Cosine similarity of whole-text embeddings."""
    if not generated_text.strip() or not reference_text.strip():
        raise ValueError("both texts must be non-empty")
    if embedder is None:
        embedder = default_embedder()
    return cosine_similarity(embedder.embed(generated_text), embedder.embed(reference_text))


def time_strata(prompt_s: float, max_s: float) -> list[tuple[float, float]]:
    """Per-minute rating strata over a continuation:
    [prompt, 60), [60, 120), [120, 180), [180, max), dropping empty spans
    when the audio ends early."""
    if not 0 <= prompt_s < 60:
        raise ValueError(f"prompt duration must be in [0, 60), got {prompt_s}")
    if max_s <= 60:
        raise ValueError(f"max duration must exceed 60s, got {max_s}")
    edges = [prompt_s, 60.0, 120.0, 180.0]
    spans = []
    for lo, hi in zip(edges, edges[1:] + [max_s]):
        hi = min(hi, max_s)
        if hi > lo:
            spans.append((lo, hi))
        if hi == max_s:
            break
    return spans


def probe_spans(strata: list[tuple[float, float]], span_s: float = 5.0,
                seed: int = 0) -> list[tuple[float, float]]:
    """One fixed-length listening span sampled uniformly inside each
    stratum; reproducible for a given seed so the same spans can be cut
    from every model's generation."""
    rng = np.random.default_rng(seed)
    spans = []
    for lo, hi in strata:
        if hi - lo <= span_s:
            start = lo
        else:
            start = float(rng.uniform(lo, hi - span_s))
        spans.append((start, min(start + span_s, hi)))
    return spans
