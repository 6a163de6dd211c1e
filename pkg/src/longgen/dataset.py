"""Long-span benchmark construction from utterance-aligned manifests.

Utterances are greedily agglomerated along utterance boundaries, left to
right within each chapter, until adding the next one would push the span
past the target duration.  Durations sum the utterance extents only;
inter-utterance silence is not counted (manifests carry no audio).
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

from .errors import ManifestError
from .ioutil import write_text_atomic


@dataclasses.dataclass(frozen=True)
class Utterance:
    utterance_id: str
    chapter_id: str
    speaker_id: str
    start_s: float
    end_s: float
    transcript: str = ""

    def __post_init__(self):
        if self.end_s < self.start_s:
            raise ManifestError(
                f"utterance {self.utterance_id} ends before it starts "
                f"({self.start_s} .. {self.end_s})"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclasses.dataclass(frozen=True)
class Span:
    span_id: str
    chapter_id: str
    speaker_id: str
    utterance_ids: tuple[str, ...]
    duration_s: float
    transcript: str = ""

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["utterance_ids"] = list(self.utterance_ids)
        return d


_UTTERANCE_FIELDS = ("utterance_id", "chapter_id", "speaker_id", "start_s", "end_s", "transcript")


def load_utterances(path: str | Path) -> list[Utterance]:
    """JSON-lines by default; CSV with a header row is accepted as plumbing."""
    path = Path(path)
    records: list[dict] = []
    if path.suffix == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            records = list(csv.DictReader(fh))
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    utts = []
    for rec in records:
        missing = [f for f in _UTTERANCE_FIELDS[:5] if f not in rec]
        if missing:
            raise ManifestError(f"manifest record missing fields {missing}")
        utts.append(
            Utterance(
                utterance_id=str(rec["utterance_id"]),
                chapter_id=str(rec["chapter_id"]),
                speaker_id=str(rec["speaker_id"]),
                start_s=float(rec["start_s"]),
                end_s=float(rec["end_s"]),
                transcript=str(rec.get("transcript", "")),
            )
        )
    return utts


def save_spans(path: str | Path, spans: list[Span]) -> None:
    write_text_atomic(path, "".join(json.dumps(s.to_dict()) + "\n" for s in spans))


def load_spans(path: str | Path) -> list[Span]:
    spans = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            spans.append(
                Span(
                    span_id=str(d["span_id"]),
                    chapter_id=str(d["chapter_id"]),
                    speaker_id=str(d["speaker_id"]),
                    utterance_ids=tuple(d["utterance_ids"]),
                    duration_s=float(d["duration_s"]),
                    transcript=str(d.get("transcript", "")),
                )
            )
    return spans


def _chapters_in_order(manifest: list[Utterance]) -> list[tuple[str, list[Utterance]]]:
    order: list[str] = []
    groups: dict[str, list[Utterance]] = {}
    for utt in manifest:
        if utt.chapter_id not in groups:
            groups[utt.chapter_id] = []
            order.append(utt.chapter_id)
        groups[utt.chapter_id].append(utt)
    return [(c, groups[c]) for c in order]


def validate_manifest(manifest: list[Utterance]) -> None:
    for chapter, utts in _chapters_in_order(manifest):
        for prev, cur in zip(utts, utts[1:]):
            if cur.start_s < prev.start_s:
                raise ManifestError(
                    f"chapter {chapter}: utterances out of order at {cur.utterance_id}"
                )
            if cur.start_s < prev.end_s:
                raise ManifestError(
                    f"chapter {chapter}: utterances {prev.utterance_id} and "
                    f"{cur.utterance_id} overlap"
                )


def agglomerate(manifest: list[Utterance], target_s: float = 240.0) -> list[Span]:
    """Greedy left-to-right packing within each chapter; utterances are
    never split, so a single oversized utterance becomes its own span."""
    if target_s <= 0:
        raise ValueError("target duration must be positive")
    validate_manifest(manifest)
    spans: list[Span] = []
    for chapter, utts in _chapters_in_order(manifest):
        current: list[Utterance] = []
        duration = 0.0
        index = 0

        def close():
            nonlocal current, duration, index
            if current:
                spans.append(
                    Span(
                        span_id=f"{chapter}-{index:04d}",
                        chapter_id=chapter,
                        speaker_id=current[0].speaker_id,
                        utterance_ids=tuple(u.utterance_id for u in current),
                        duration_s=duration,
                        transcript=" ".join(u.transcript for u in current if u.transcript).strip(),
                    )
                )
                index += 1
            current = []
            duration = 0.0

        for utt in utts:
            if current and duration + utt.duration_s > target_s + 1e-9:
                close()
            current.append(utt)
            duration += utt.duration_s
        close()
    return spans


@dataclasses.dataclass(frozen=True)
class SplitStats:
    hours: float
    examples: int
    mean_duration_s: float
    chapters: int
    speakers: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def split_stats(spans: list[Span]) -> SplitStats:
    total_s = sum(s.duration_s for s in spans)
    n = len(spans)
    return SplitStats(
        hours=total_s / 3600.0,
        examples=n,
        mean_duration_s=total_s / n if n else 0.0,
        chapters=len({s.chapter_id for s in spans}),
        speakers=len({s.speaker_id for s in spans}),
    )


def format_stats_table(stats: SplitStats, label: str = "split") -> str:
    header = f"{'Subset':<16}{'Hours':>8}{'Examples':>10}{'Avg. Dur. (s)':>15}{'Chapters':>10}{'Spkrs':>8}"
    row = (
        f"{label:<16}{stats.hours:>8.1f}{stats.examples:>10d}"
        f"{stats.mean_duration_s:>15.1f}{stats.chapters:>10d}{stats.speakers:>8d}"
    )
    return header + "\n" + row


def make_eval_pairs(
    spans: list[Span],
    prompt_s: float = 10.0,
    min_duration_s: float = 210.0,
    frame_rate_hz: float = 25.0,
) -> list[dict]:
    """Prompt/reference splits for continuation evaluation.

    Spans shorter than `min_duration_s` are dropped; the prompt is the
    first `prompt_s` seconds snapped to the frame grid, the reference is
    the remainder of the span.
    """
    if prompt_s >= min_duration_s:
        raise ValueError("prompt must be shorter than the minimum span duration")
    prompt_end = round(prompt_s * frame_rate_hz) / frame_rate_hz
    pairs = []
    for span in spans:
        if span.duration_s < min_duration_s:
            continue
        pairs.append(
            {
                "span_id": span.span_id,
                "chapter_id": span.chapter_id,
                "speaker_id": span.speaker_id,
                "duration_s": span.duration_s,
                "prompt": {"start_s": 0.0, "end_s": prompt_end},
                "reference": {"start_s": prompt_end, "end_s": span.duration_s},
                "transcript": span.transcript,
            }
        )
    return pairs
