"""Core types: duration arithmetic, stream formats, weight archives, init."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from longgen import (
    CorruptArchiveError,
    SchemaError,
    TokenStream,
    duration_to_tokens,
    init_random_weights,
    tensor_inventory,
)
from longgen.blocks import softplus
from longgen.streams import (
    pack_stream,
    read_stream,
    read_streams_jsonl,
    unpack_stream,
    write_stream,
    write_streams_jsonl,
)
from longgen.weights import archive_config, pack_weights, unpack_weights

from conftest import tiny_config


class TestDurationToTokens:
    def test_thirty_seconds_at_25hz(self):
        assert duration_to_tokens(30, 25) == 750

    def test_sixteen_minutes_at_25hz(self):
        assert duration_to_tokens(960, 25) == 24000

    def test_zero_duration(self):
        assert duration_to_tokens(0, 25) == 0

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            duration_to_tokens(-1.0, 25)

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(ValueError):
            duration_to_tokens(1.0, 0.0)

    def test_round_half_up(self):
        assert duration_to_tokens(0.06, 25) == 2  # 1.5 tokens rounds up

    @given(
        na=st.integers(min_value=0, max_value=10**6),
        nb=st.integers(min_value=0, max_value=10**6),
    )
    def test_linear_over_integer_frame_durations(self, na, nb):
        rate = 25.0
        a, b = na / rate, nb / rate
        assert duration_to_tokens(a, rate) + duration_to_tokens(b, rate) == duration_to_tokens(
            a + b, rate
        )


class TestTokenStream:
    def test_validation(self):
        with pytest.raises(ValueError):
            TokenStream(np.array([-1, 2]))
        with pytest.raises(ValueError):
            TokenStream(np.array([[1, 2]]))
        with pytest.raises(ValueError):
            TokenStream(np.array([1]), frame_rate_hz=0)

    def test_duration(self):
        s = TokenStream(np.arange(50), frame_rate_hz=25.0)
        assert s.duration_s == 2.0

    def test_ids_are_read_only(self):
        s = TokenStream(np.array([1, 2, 3]))
        with pytest.raises(ValueError):
            s.ids[0] = 9

    def test_vocab_validation(self):
        s = TokenStream(np.array([1, 31]))
        s.validate_vocab(32)
        with pytest.raises(ValueError):
            s.validate_vocab(31)


class TestStreamFormats:
    def test_jsonl_roundtrip(self, tmp_path):
        streams = [
            TokenStream(np.array([1, 2, 3], dtype=np.int32), 25.0),
            TokenStream(np.arange(10, dtype=np.int32), 50.0),
        ]
        path = tmp_path / "streams.jsonl"
        write_streams_jsonl(path, streams)
        loaded = read_streams_jsonl(path)
        assert len(loaded) == 2
        for orig, back in zip(streams, loaded):
            assert np.array_equal(orig.ids, back.ids)
            assert orig.frame_rate_hz == back.frame_rate_hz

    def test_binary_roundtrip(self, tmp_path):
        s = TokenStream(np.array([0, 7, 31, 2], dtype=np.int32), 25.0)
        path = tmp_path / "stream.tok"
        write_stream(path, s, vocab_size=32)
        back = read_stream(path)
        assert np.array_equal(back.ids, s.ids)
        assert back.frame_rate_hz == 25.0

    def test_binary_header_is_16_bytes(self):
        data = pack_stream(TokenStream(np.array([5], dtype=np.int32)))
        assert len(data) == 16 + 4

    def test_bad_magic_rejected(self):
        data = b"XXXX" + pack_stream(TokenStream(np.array([1])))[4:]
        with pytest.raises(SchemaError):
            unpack_stream(data)

    def test_truncated_header_rejected(self):
        with pytest.raises(CorruptArchiveError):
            unpack_stream(b"TOK")

    def test_ragged_payload_rejected(self):
        data = pack_stream(TokenStream(np.array([1, 2])))
        with pytest.raises(CorruptArchiveError):
            unpack_stream(data[:-2])

    def test_binary_vocab_checked(self):
        data = pack_stream(TokenStream(np.array([40])), vocab_size=32)
        with pytest.raises(ValueError):
            unpack_stream(data)


class TestWeightArchive:
    def test_roundtrip_bit_exact(self):
        config = tiny_config()
        params = init_random_weights(config, seed=7)
        data = pack_weights(params, config)
        back = unpack_weights(data, config)
        assert set(back) == set(params)
        for name in params:
            assert back[name].dtype == np.float32
            assert np.array_equal(back[name], params[name])
        # Second pack reproduces the same bytes.
        assert pack_weights(back, config) == data

    def test_embedded_config_roundtrip(self):
        config = tiny_config()
        data = pack_weights(init_random_weights(config, 0), config)
        assert archive_config(data) == config

    def test_missing_tensor_named_in_error(self):
        config = tiny_config()
        params = dict(init_random_weights(config, 0))
        del params["head.weight"]
        data = pack_weights(params, config)
        with pytest.raises(SchemaError, match="head.weight"):
            unpack_weights(data, config)

    def test_extra_tensor_rejected(self):
        config = tiny_config()
        params = dict(init_random_weights(config, 0))
        params["bogus.tensor"] = np.zeros(3, dtype=np.float32)
        data = pack_weights(params, config)
        with pytest.raises(SchemaError, match="bogus.tensor"):
            unpack_weights(data, config)

    def test_shape_mismatch_rejected(self):
        config = tiny_config()
        params = dict(init_random_weights(config, 0))
        params["final_norm.scale"] = np.ones(config.model_dim + 1, dtype=np.float32)
        data = pack_weights(params, config)
        with pytest.raises(SchemaError, match="final_norm.scale"):
            unpack_weights(data, config)

    def test_truncated_payload_rejected(self):
        config = tiny_config()
        data = pack_weights(init_random_weights(config, 0), config)
        with pytest.raises(CorruptArchiveError):
            unpack_weights(data[:-4], config)

    def test_inventory_covers_all_block_kinds(self):
        config = tiny_config()
        names = [n for n, _ in tensor_inventory(config)]
        assert "sb0.blk0.recurrent.w_rec" in names
        assert "sb0.blk2.local_attention.w_q" in names
        assert len(names) == len(set(names))


class TestInitRandomWeights:
    def test_deterministic_given_seed(self):
        config = tiny_config()
        a = init_random_weights(config, seed=3)
        b = init_random_weights(config, seed=3)
        for name in a:
            assert np.array_equal(a[name], b[name])

    def test_different_seeds_differ(self):
        config = tiny_config()
        a = init_random_weights(config, seed=3)
        b = init_random_weights(config, seed=4)
        assert any(not np.array_equal(a[n], b[n]) for n in a)

    def test_decays_strictly_inside_unit_interval(self):
        config = tiny_config(num_superblocks=2)
        for seed in range(5):
            params = init_random_weights(config, seed)
            for name in params:
                if name.endswith("decay_raw"):
                    decay = np.exp(
                        -config.recurrence_gate_constant
                        * softplus(params[name].astype(np.float64))
                    )
                    assert np.all(decay > 0.0) and np.all(decay < 1.0)

    def test_all_finite(self):
        params = init_random_weights(tiny_config(), 0)
        for name in params:
            assert np.isfinite(params[name]).all(), name
