"""Token streams, duration arithmetic, and the stream file formats.

A token stream is the universal currency here: a 1-D array of vocabulary
ids emitted at a fixed frame rate (default 25 tokens per second).  Streams
serialize either as JSON-lines records or as a raw little-endian binary
format with a 16-byte header.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import CorruptArchiveError, SchemaError
from .ioutil import write_bytes_atomic, write_text_atomic

DEFAULT_FRAME_RATE_HZ = 25.0

_BINARY_MAGIC = b"TOKS"
_BINARY_VERSION = 1
# magic, version, vocab_size, frame-rate numerator, frame-rate denominator
_BINARY_HEADER = struct.Struct("<4sIIHH")
assert _BINARY_HEADER.size == 16


def duration_to_tokens(seconds: float, frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ) -> int:
    """Number of tokens covering `seconds` of audio at `frame_rate_hz`.

    Rounds half up; fractional-frame durations never occur in practice but
    the rule is pinned so outputs are reproducible.
    """
    if seconds < 0:
        raise ValueError(f"duration must be non-negative, got {seconds}")
    if frame_rate_hz <= 0:
        raise ValueError(f"frame rate must be positive, got {frame_rate_hz}")
    return int(math.floor(seconds * frame_rate_hz + 0.5))


@dataclasses.dataclass(frozen=True)
class TokenStream:
    """Immutable sequence of vocabulary ids at a fixed frame rate."""

    ids: np.ndarray
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ

    def __post_init__(self):
        ids = np.ascontiguousarray(self.ids, dtype=np.int32)
        if ids.ndim != 1:
            raise ValueError(f"ids must be 1-D, got shape {ids.shape}")
        if ids.size and ids.min() < 0:
            raise ValueError("ids must be non-negative")
        if not self.frame_rate_hz > 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate_hz}")
        ids.flags.writeable = False
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return int(self.ids.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.frame_rate_hz

    def validate_vocab(self, vocab_size: int) -> None:
        if len(self) and int(self.ids.max()) >= vocab_size:
            raise ValueError(
                f"stream contains id {int(self.ids.max())} >= vocab_size {vocab_size}"
            )

    def slice(self, start: int, stop: int) -> "TokenStream":
        return TokenStream(self.ids[start:stop], self.frame_rate_hz)


def concat_streams(parts: list[TokenStream]) -> TokenStream:
    if not parts:
        raise ValueError("cannot concatenate zero streams")
    rates = {p.frame_rate_hz for p in parts}
    if len(rates) != 1:
        raise ValueError(f"frame rates disagree: {sorted(rates)}")
    return TokenStream(np.concatenate([p.ids for p in parts]), parts[0].frame_rate_hz)


# ---------------------------------------------------------------------------
# JSON-lines format: one {"ids": [...], "frame_rate_hz": ...} record per line.


def stream_to_record(stream: TokenStream) -> dict:
    return {"ids": stream.ids.tolist(), "frame_rate_hz": stream.frame_rate_hz}


def stream_from_record(record: dict) -> TokenStream:
    if "ids" not in record:
        raise SchemaError("stream record missing 'ids'")
    return TokenStream(
        np.asarray(record["ids"], dtype=np.int32),
        float(record.get("frame_rate_hz", DEFAULT_FRAME_RATE_HZ)),
    )


def write_streams_jsonl(path: str | Path, streams: list[TokenStream]) -> None:
    text = "".join(json.dumps(stream_to_record(s)) + "\n" for s in streams)
    write_text_atomic(path, text)


def read_streams_jsonl(path: str | Path) -> list[TokenStream]:
    streams = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                streams.append(stream_from_record(json.loads(line)))
    return streams


# ---------------------------------------------------------------------------
# Raw binary format: 16-byte header followed by little-endian int32 ids.


def pack_stream(stream: TokenStream, vocab_size: int = 0) -> bytes:
    frac = Fraction(stream.frame_rate_hz).limit_denominator(65535)
    if frac.numerator <= 0 or frac.numerator > 65535:
        raise ValueError(f"frame rate {stream.frame_rate_hz} not representable in header")
    header = _BINARY_HEADER.pack(
        _BINARY_MAGIC, _BINARY_VERSION, vocab_size, frac.numerator, frac.denominator
    )
    return header + stream.ids.astype("<i4").tobytes()


def unpack_stream(data: bytes) -> tuple[TokenStream, int]:
    """Returns (stream, vocab_size); vocab_size 0 means unspecified."""
    if len(data) < _BINARY_HEADER.size:
        raise CorruptArchiveError("stream file shorter than its 16-byte header")
    magic, version, vocab_size, num, den = _BINARY_HEADER.unpack_from(data)
    if magic != _BINARY_MAGIC:
        raise SchemaError(f"bad stream magic {magic!r}")
    if version != _BINARY_VERSION:
        raise SchemaError(f"unsupported stream format version {version}")
    if den == 0:
        raise CorruptArchiveError("frame-rate denominator is zero")
    payload = data[_BINARY_HEADER.size:]
    if len(payload) % 4 != 0:
        raise CorruptArchiveError("stream payload is not a whole number of int32 ids")
    ids = np.frombuffer(payload, dtype="<i4").astype(np.int32)
    stream = TokenStream(ids, num / den)
    if vocab_size:
        stream.validate_vocab(vocab_size)
    return stream, vocab_size


def write_stream_binary(path: str | Path, stream: TokenStream, vocab_size: int = 0) -> None:
    write_bytes_atomic(path, pack_stream(stream, vocab_size))


def read_stream_binary(path: str | Path) -> TokenStream:
    with open(path, "rb") as fh:
        stream, _ = unpack_stream(fh.read())
    return stream


def read_stream(path: str | Path) -> TokenStream:
    """Reads either format, chosen by extension (.jsonl/.json vs binary)."""
    path = Path(path)
    if path.suffix in (".jsonl", ".json"):
        streams = read_streams_jsonl(path)
        if len(streams) != 1:
            raise SchemaError(f"{path} holds {len(streams)} streams, expected exactly 1")
        return streams[0]
    return read_stream_binary(path)


def write_stream(path: str | Path, stream: TokenStream, vocab_size: int = 0) -> None:
    path = Path(path)
    if path.suffix in (".jsonl", ".json"):
        write_streams_jsonl(path, [stream])
    else:
        write_stream_binary(path, stream, vocab_size)
