"""Window planning oracles: midpoint-split enumeration, tiling, identity
round trips, pad arithmetic, and the synthesis boundary schedule."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longgen import (
    TokenStream,
    plan_final_window_padding,
    plan_synthesis_windows,
    plan_tokenization_windows,
)
from longgen.windowing import (
    apply_tail_drop,
    boundary_probe_spans,
    drop_padded_tokens,
    merge_windows,
    pad_stream,
    synthesize_windowed,
    tokenize_windowed,
    WindowPlan,
)


def enumerate_keep_ranges(stream_len, width, overlap):
    """Independent enumeration of the midpoint-split rule: walk window start
    positions, cut each overlap in the middle."""
    stride = width - overlap
    starts = [0]
    while starts[-1] + width < stream_len:
        starts.append(starts[-1] + stride)
    cuts = [0]
    for s in starts[1:]:
        cuts.append(s + overlap // 2)
    cuts.append(stream_len)
    return list(zip(cuts, cuts[1:]))


class TestTokenizationPlan:
    def test_reference_fixture(self):
        # 11 tokens, width 5, overlap 2.
        plan = plan_tokenization_windows(11, 5, 2)
        assert [(w.source_start, w.source_end) for w in plan.windows] == [
            (0, 5),
            (3, 8),
            (6, 11),
        ]
        assert [(w.keep_start, w.keep_end) for w in plan.windows] == [
            (0, 4),
            (4, 7),
            (7, 11),
        ]
        assert enumerate_keep_ranges(11, 5, 2) == [(0, 4), (4, 7), (7, 11)]

    def test_exact_fit_single_window(self):
        plan = plan_tokenization_windows(5, 5, 2)
        assert len(plan.windows) == 1
        assert plan.windows[0] == (0, 5, 0, 5)

    def test_stream_shorter_than_width_gives_single_window(self):
        plan = plan_tokenization_windows(3, 5, 2)
        assert len(plan.windows) == 1
        assert plan.windows[0] == (0, 3, 0, 3)

    def test_odd_overlap_rejected(self):
        with pytest.raises(ValueError, match="even"):
            plan_tokenization_windows(11, 5, 3)

    def test_overlap_bounds_enforced(self):
        with pytest.raises(ValueError):
            plan_tokenization_windows(11, 5, 0)
        with pytest.raises(ValueError):
            plan_tokenization_windows(11, 5, 6)

    @settings(max_examples=150, deadline=None)
    @given(
        stream_len=st.integers(min_value=1, max_value=500),
        width=st.integers(min_value=2, max_value=50),
        half_overlap=st.integers(min_value=1, max_value=24),
    )
    def test_keep_ranges_tile_stream(self, stream_len, width, half_overlap):
        overlap = 2 * half_overlap
        if overlap >= width:
            return
        plan = plan_tokenization_windows(stream_len, width, overlap)
        cursor = 0
        for w in plan.windows:
            assert w.keep_start == cursor
            assert w.source_start <= w.keep_start <= w.keep_end <= w.source_end
            cursor = w.keep_end
        assert cursor == stream_len
        # Consecutive full windows overlap by exactly `overlap`.
        for a, b in zip(plan.windows, plan.windows[1:]):
            assert a.source_end - b.source_start == overlap
        assert list(zip([w.keep_start for w in plan.windows],
                        [w.keep_end for w in plan.windows])) == enumerate_keep_ranges(
            stream_len, width, overlap
        )

    def test_plan_json_roundtrip(self):
        plan = plan_tokenization_windows(37, 10, 4)
        assert WindowPlan.from_dict(plan.to_dict()) == plan


class TestMergeWindows:
    def test_single_window_unchanged(self):
        plan = plan_tokenization_windows(7, 9, 2)
        out = merge_windows([np.arange(7)], plan)
        assert out.ids.tolist() == list(range(7))

    def test_identity_round_trip(self, rng):
        for _ in range(25):
            stream_len = int(rng.integers(5, 4000))
            width = int(rng.integers(2, 64))
            overlap = 2 * int(rng.integers(1, max(2, width // 2)))
            if overlap >= width:
                continue
            ids = rng.integers(0, 1000, stream_len)
            plan = plan_tokenization_windows(stream_len, width, overlap)
            pieces = tokenize_windowed(ids, plan, lambda w: w)
            merged = merge_windows(pieces, plan)
            assert np.array_equal(merged.ids, ids)

    def test_value_switch_at_overlap_midpoint(self):
        # Width 6, overlap 2 over 10 tokens: windows [0,6) and [4,10); the
        # merge must switch sources exactly at index 5.
        plan = plan_tokenization_windows(10, 6, 2)
        merged = merge_windows([np.zeros(6, int), np.ones(6, int)], plan)
        assert merged.ids.tolist() == [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]

    def test_length_mismatch_rejected(self):
        plan = plan_tokenization_windows(11, 5, 2)
        pieces = tokenize_windowed(np.arange(11), plan, lambda w: w)
        pieces[1] = pieces[1][:-1]
        with pytest.raises(ValueError):
            merge_windows(pieces, plan)
        with pytest.raises(ValueError):
            merge_windows(pieces[:2], plan)


class TestEosAvoidance:
    def test_full_final_window_needs_no_pad(self):
        plan = plan_final_window_padding(1500, 750)
        assert plan.pad_length == 0

    def test_remainder_padded_from_stream_start(self):
        plan = plan_final_window_padding(2000, 750)
        assert plan.pad_length == 250
        assert plan.pad_source == (0, 250)
        assert plan.post_tokenize_drop == (2000, 2250)

    def test_pad_and_drop_round_trip(self, rng):
        ids = rng.integers(0, 100, 2000)
        plan = plan_final_window_padding(2000, 750)
        padded = pad_stream(ids, plan)
        assert padded.shape[0] == 2250
        assert np.array_equal(padded[2000:], ids[:250])
        emitted = drop_padded_tokens(padded, plan)
        assert np.array_equal(emitted, ids)

    def test_emitted_stream_never_contains_pad_tokens(self, rng):
        # Mark the pad region with a sentinel after tokenization.
        ids = rng.integers(0, 100, 1100)
        plan = plan_final_window_padding(1100, 400)
        padded = pad_stream(ids, plan)
        tokenized = padded.copy()
        tokenized[plan.post_tokenize_drop[0] : plan.post_tokenize_drop[1]] = 999
        emitted = drop_padded_tokens(tokenized, plan)
        assert not np.any(emitted == 999)

    def test_overlapping_stride(self):
        # Stride below width changes where the final window starts: with
        # stride 3 the windows for 12 tokens start at 0, 3, 6, 9, so the
        # final window [9, 12) is short by 2.
        plan = plan_final_window_padding(12, 5, stride=3)
        assert plan.pad_length == 2
        # Whereas 11 tokens end on a full window [6, 11).
        assert plan_final_window_padding(11, 5, stride=3).pad_length == 0

    def test_stream_shorter_than_width_rejected(self):
        with pytest.raises(ValueError):
            plan_final_window_padding(5, 10)

    def test_tail_drop(self):
        stream = TokenStream(np.arange(1500), 25.0)  # 60 s
        dropped = apply_tail_drop(stream, 10.0)
        assert len(dropped) == 1250
        assert dropped.ids.tolist() == list(range(1250))


class TestSynthesisPlan:
    def test_default_boundary_schedule(self):
        plan = plan_synthesis_windows(240.0)
        want = [25.0 + 23.0 * n for n in range(len(plan.boundary_times))]
        assert list(plan.boundary_times) == want
        assert plan.boundary_times[:4] == (25.0, 48.0, 71.0, 94.0)

    def test_interior_windows_are_full_width(self):
        plan = plan_synthesis_windows(240.0)
        prompt_frames = plan.prompt_span[1]
        for w in plan.windows[:-1]:
            extent = prompt_frames + (w.content_span[1] - w.content_span[0])
            assert extent == 750  # 30 s at 25 Hz
        # Interior keeps are 23 s.
        for w in plan.windows[1:-1]:
            assert w.keep_span[1] - w.keep_span[0] == 575

    def test_short_continuation_single_window(self):
        plan = plan_synthesis_windows(20.0)
        assert len(plan.windows) == 1
        assert plan.windows[0].keep_span == (0, 500)
        assert plan.boundary_times == ()

    def test_keep_spans_tile_continuation(self):
        plan = plan_synthesis_windows(240.0)
        cursor = 0
        for w in plan.windows:
            assert w.keep_span[0] == cursor
            cursor = w.keep_span[1]
        assert cursor == 6000  # 240 s of frames

    def test_identity_synthesizer_round_trip(self, rng):
        for dur in (27.04, 100.0, 240.0, 241.32):
            plan = plan_synthesis_windows(dur)
            frames = rng.integers(0, 1 << 20, int(round(dur * 25)))
            out = synthesize_windowed(frames, plan, lambda w: w)
            assert np.array_equal(out, frames)

    def test_fractional_frame_duration_rejected(self):
        with pytest.raises(ValueError):
            plan_synthesis_windows(240.0, prompt_len_s=3.001)

    def test_every_window_carries_the_speaker_prompt(self):
        plan = plan_synthesis_windows(240.0)
        assert plan.prompt_span == (0, 75)
        assert all(w.prompt_prefix == (0, 75) for w in plan.windows)


class TestBoundaryProbes:
    def test_first_boundary_span(self):
        plan = plan_synthesis_windows(240.0)
        spans = boundary_probe_spans(plan, span_s=5.0)
        boundary_spans = [s for s in spans if s.center_kind == "boundary"]
        assert (boundary_spans[0].start_s, boundary_spans[0].end_s) == (22.5, 27.5)

    def test_single_window_has_only_midpoint(self):
        plan = plan_synthesis_windows(20.0)
        spans = boundary_probe_spans(plan)
        assert len(spans) == 1
        assert spans[0].center_kind == "midpoint"

    def test_span_count_is_boundaries_plus_chunks(self):
        plan = plan_synthesis_windows(240.0)
        spans = boundary_probe_spans(plan)
        assert len(spans) == len(plan.boundary_times) + len(plan.windows)
