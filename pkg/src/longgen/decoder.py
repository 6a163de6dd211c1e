"""Sequence models and decoding sessions.

Two model families behind one interface:

* `NeuralSequenceModel` assembles the configured block pattern into a
  decoder.  With the default pattern (recurrent, recurrent, local
  attention) the per-session state is a fixed byte size regardless of how
  many tokens have been processed.  With the full-attention pattern from
  `transformer_config` the KV cache grows by one row per layer per step;
  that variant exists as the efficiency baseline.
* `ScriptedModel` turns an explicit transition table into logits, giving
  exact, hand-checkable behavior for pipeline tests with no trained
  weights involved.

A `DecoderSession` owns the mutable state, a seeded sampler, and the
position counter; sessions over shared immutable parameters may run in
parallel, a single session is strictly sequential.
"""

from __future__ import annotations

import numpy as np

from .blocks import AttentionBlock, GatedMlp, GatedRecurrentBlock, rms_norm
from .config import BLOCK_FULL_ATTENTION, BLOCK_RECURRENT, ModelConfig
from .errors import SchemaError
from .streams import TokenStream
from .weights import ParameterSet, block_name, init_random_weights, tensor_inventory


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def sample_token(
    rng: np.random.Generator,
    logits: np.ndarray,
    temperature: float = 1.0,
    greedy: bool = False,
    top_k: int | None = None,
) -> int:
    """Draw one token id from a logits row. Greedy is a flag, not temperature 0."""
    logits = np.asarray(logits, dtype=np.float64)
    if greedy:
        return int(np.argmax(logits))
    if temperature <= 0:
        raise ValueError("temperature must be positive; pass greedy=True for argmax decoding")
    if top_k is not None:
        if top_k < 1:
            raise ValueError("top_k must be at least 1")
        if top_k < logits.size:
            thresh = np.partition(logits, -top_k)[-top_k]
            logits = np.where(logits >= thresh, logits, -np.inf)
    z = logits / temperature
    z = z - np.max(z)
    p = np.exp(z)
    p /= p.sum()
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(idx, logits.size - 1)


class _Layer:
    __slots__ = ("norm_temporal", "block", "norm_mlp", "mlp")

    def __init__(self, norm_temporal, block, norm_mlp, mlp):
        self.norm_temporal = norm_temporal
        self.block = block
        self.norm_mlp = norm_mlp
        self.mlp = mlp


class NeuralSequenceModel:
    """Decoder over the configured block pattern.

    Parameters are cast once to the working dtype (float64 by default, so
    step/parallel agreement is far inside test tolerances) and shared
    read-only; states returned by `init_state` are advanced in place by
    `step` and must not be shared between concurrent sessions.
    """

    def __init__(self, params: ParameterSet | dict, config: ModelConfig, dtype=np.float64):
        self.config = config
        self.dtype = np.dtype(dtype)
        cast: dict[str, np.ndarray] = {}
        for name, shape in tensor_inventory(config):
            if name not in params:
                raise SchemaError(f"parameter set is missing tensor {name!r}")
            arr = np.asarray(params[name], dtype=self.dtype)
            if arr.shape != shape:
                raise SchemaError(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
            arr = arr.copy()
            arr.flags.writeable = False
            cast[name] = arr

        self.embed = cast["embed.weight"]
        self.head = cast["head.weight"]
        self.final_scale = cast["final_norm.scale"]
        self.max_train_len: int | None = None

        def roles(prefix: str) -> dict[str, np.ndarray]:
            cut = len(prefix) + 1
            return {k[cut:]: v for k, v in cast.items() if k.startswith(prefix + ".")}

        self._layers: list[_Layer] = []
        slots = len(config.pattern)
        for bi, kind in enumerate(config.block_kinds):
            prefix = block_name(bi // slots, bi % slots)
            if kind == BLOCK_RECURRENT:
                block = GatedRecurrentBlock(
                    roles(f"{prefix}.recurrent"), config.recurrence_gate_constant
                )
            else:
                window = None if kind == BLOCK_FULL_ATTENTION else config.attention_window
                block = AttentionBlock(roles(f"{prefix}.{kind}"), config.num_query_heads, window)
            self._layers.append(
                _Layer(
                    cast[f"{prefix}.norm_temporal.scale"],
                    block,
                    cast[f"{prefix}.norm_mlp.scale"],
                    GatedMlp(roles(f"{prefix}.mlp")),
                )
            )

    @classmethod
    def from_random(cls, config: ModelConfig, seed: int | None = None, dtype=np.float64):
        return cls(init_random_weights(config, seed), config, dtype)

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    @property
    def constant_state(self) -> bool:
        return not self.config.has_unbounded_attention

    def init_state(self, batch_shape: tuple[int, ...] = ()) -> list:
        return [layer.block.init_state(batch_shape) for layer in self._layers]

    def _check_ids(self, ids: np.ndarray) -> None:
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise ValueError(
                f"token id out of range [0, {self.vocab_size}): "
                f"min {int(ids.min())}, max {int(ids.max())}"
            )

    def step(self, tokens, states: list) -> tuple[np.ndarray, list]:
        tokens = np.asarray(tokens)
        self._check_ids(np.atleast_1d(tokens))
        x = self.embed[tokens]
        for layer, state in zip(self._layers, states):
            y, _ = layer.block.step(rms_norm(x, layer.norm_temporal), state)
            x = x + y
            x = x + layer.mlp(rms_norm(x, layer.norm_mlp))
        x = rms_norm(x, self.final_scale)
        return x @ self.head, states

    def forward_parallel(self, ids) -> np.ndarray:
        """Per-position logits for a whole stream; causal, equal to stepping."""
        ids = np.asarray(ids)
        if ids.ndim != 1 or ids.size == 0:
            raise ValueError("forward_parallel expects a non-empty 1-D id array")
        self._check_ids(ids)
        x = self.embed[ids]
        for layer in self._layers:
            x = x + layer.block.forward(rms_norm(x, layer.norm_temporal))
            x = x + layer.mlp(rms_norm(x, layer.norm_mlp))
        x = rms_norm(x, self.final_scale)
        return x @ self.head

    def state_bytes(self, states: list) -> int:
        return sum(s.state_bytes() for s in states)

    def lane_state_bytes(self, position: int) -> int:
        """Analytic per-lane state size after `position` tokens.

        Constant for recurrent and windowed-attention blocks; for unbounded
        attention it is the KV bytes, position x (2 x head_dim x itemsize)
        per layer.
        """
        item = self.dtype.itemsize
        cfg = self.config
        total = 0
        for kind in cfg.block_kinds:
            if kind == BLOCK_RECURRENT:
                total += cfg.recurrence_dim * item
                total += (cfg.conv_width - 1) * cfg.recurrence_dim * item
            elif kind == BLOCK_FULL_ATTENTION:
                total += position * 2 * cfg.head_dim * item
            else:
                total += cfg.attention_window * 2 * cfg.head_dim * item
        return total

    def seed_states_to_position(self, states: list, position: int, rng: np.random.Generator) -> None:
        """Synthesize a state layout equivalent to having decoded `position`
        tokens (contents random); used by the efficiency harness."""
        for s in states:
            s.seed_to_position(position, rng)


class _ScriptedState:
    __slots__ = ("position",)

    def __init__(self):
        self.position = 0

    def state_bytes(self) -> int:
        return 0

    def seed_to_position(self, position: int, rng) -> None:
        self.position = position


class ScriptedModel:
    """Transition-table model: logits for the next token depend only on the
    current token.  Deterministic tables give probability-1 paths, which
    makes every downstream pipeline exactly checkable."""

    def __init__(self, logits_table: np.ndarray):
        table = np.asarray(logits_table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError(f"logits table must be square, got {table.shape}")
        table = table.copy()
        table.flags.writeable = False
        self.table = table
        self.max_train_len: int | None = None

    @classmethod
    def markov(cls, next_ids, vocab_size: int | None = None) -> "ScriptedModel":
        next_ids = np.asarray(next_ids, dtype=np.int64)
        v = vocab_size if vocab_size is not None else int(next_ids.size)
        if next_ids.size != v:
            raise ValueError("need one successor per vocabulary id")
        if next_ids.size and (next_ids.min() < 0 or next_ids.max() >= v):
            raise ValueError("successor ids out of range")
        table = np.full((v, v), -np.inf)
        table[np.arange(v), next_ids] = 0.0
        return cls(table)

    @classmethod
    def uniform(cls, vocab_size: int) -> "ScriptedModel":
        return cls(np.zeros((vocab_size, vocab_size)))

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScriptedModel":
        if "next" in obj:
            return cls.markov(obj["next"], obj.get("vocab_size"))
        if "logits" in obj:
            return cls(np.asarray(obj["logits"], dtype=np.float64))
        raise SchemaError("scripted model spec needs a 'next' list or a 'logits' matrix")

    @property
    def vocab_size(self) -> int:
        return self.table.shape[0]

    @property
    def constant_state(self) -> bool:
        return True

    def init_state(self, batch_shape: tuple[int, ...] = ()) -> list:
        return [_ScriptedState()]

    def step(self, tokens, states: list) -> tuple[np.ndarray, list]:
        tokens = np.asarray(tokens)
        if np.atleast_1d(tokens).max(initial=0) >= self.vocab_size or np.atleast_1d(tokens).min(initial=0) < 0:
            raise ValueError("token id out of range")
        states[0].position += 1
        return self.table[tokens], states

    def forward_parallel(self, ids) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.ndim != 1 or ids.size == 0:
            raise ValueError("forward_parallel expects a non-empty 1-D id array")
        return self.table[ids]

    def state_bytes(self, states: list) -> int:
        return 0

    def lane_state_bytes(self, position: int) -> int:
        return 0

    def seed_states_to_position(self, states: list, position: int, rng) -> None:
        states[0].position = position


class DecoderSession:
    """One decoding lane (or a batch of lanes) over a shared model.

    The position counter advances by exactly one per consumed or emitted
    token.  `state_bytes` reports the session's live state size; for
    constant-state models it is identical at every position.
    """

    def __init__(self, model, seed: int = 0, rng: np.random.Generator | None = None,
                 batch_shape: tuple[int, ...] = ()):
        self.model = model
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.batch_shape = batch_shape
        self.states = model.init_state(batch_shape)
        self.position = 0
        self.last_logits: np.ndarray | None = None

    def step(self, tokens) -> np.ndarray:
        logits, self.states = self.model.step(tokens, self.states)
        self.position += 1
        self.last_logits = logits
        return logits

    def consume(self, ids) -> np.ndarray | None:
        """Feed prompt tokens one at a time; returns the final logits row."""
        ids = np.asarray(ids, dtype=np.int64)
        logits = None
        for t in ids:
            logits = self.step(int(t))
        return logits

    def sample_tokens(self, n: int, temperature: float = 1.0, greedy: bool = False,
                      top_k: int | None = None) -> np.ndarray:
        if self.batch_shape != ():
            raise ValueError("sampling runs on single-lane sessions")
        if self.last_logits is None:
            raise ValueError("consume at least one prompt token before sampling")
        out = np.empty(n, dtype=np.int32)
        for i in range(n):
            tok = sample_token(self.rng, self.last_logits, temperature, greedy, top_k)
            out[i] = tok
            self.step(tok)
        return out

    def state_bytes(self) -> int:
        return self.model.state_bytes(self.states)


# ---------------------------------------------------------------------------
# Module-level operations.


def forward_parallel(model, tokens) -> np.ndarray:
    ids = tokens.ids if isinstance(tokens, TokenStream) else np.asarray(tokens)
    return model.forward_parallel(ids)


def sample_continuation(
    model,
    prompt: TokenStream,
    length: int,
    temperature: float = 1.0,
    seed: int = 0,
    greedy: bool = False,
    top_k: int | None = None,
) -> TokenStream:
    """Exactly `length` new tokens, deterministic given the seed; the prompt
    is consumed through the step path."""
    if length < 0:
        raise ValueError("length must be non-negative")
    if not greedy and temperature <= 0:
        raise ValueError("temperature must be positive; pass greedy=True for argmax decoding")
    if length == 0:
        return TokenStream(np.empty(0, dtype=np.int32), prompt.frame_rate_hz)
    if len(prompt) == 0:
        raise ValueError("prompt must hold at least one token")
    session = DecoderSession(model, seed=seed)
    session.consume(prompt.ids)
    ids = session.sample_tokens(length, temperature=temperature, greedy=greedy, top_k=top_k)
    return TokenStream(ids, prompt.frame_rate_hz)


def score_loglikelihood(model, tokens, bos: int | None = None) -> float:
    """Total log-probability of the realized next-token transitions.

    The first token is conditioning context unless an explicit `bos` id is
    supplied, in which case all tokens are scored.
    """
    ids = tokens.ids if isinstance(tokens, TokenStream) else np.asarray(tokens)
    if ids.size == 0:
        raise ValueError("cannot score an empty stream")
    session = DecoderSession(model)
    if bos is not None:
        targets = ids
        logits = session.step(int(bos))
    else:
        targets = ids[1:]
        logits = session.step(int(ids[0]))
    total = 0.0
    for t in targets:
        total += float(log_softmax(logits)[int(t)])
        logits = session.step(int(t))
    return total


def contrastive_accuracy(model, pairs, bos: int | None = None) -> float:
    """Fraction of pairs where the positive stream outscores the negative;
    ties count one half."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    credit = 0.0
    for positive, negative in pairs:
        sp = score_loglikelihood(model, positive, bos=bos)
        sn = score_loglikelihood(model, negative, bos=bos)
        if sp > sn:
            credit += 1.0
        elif sp == sn:
            credit += 0.5
    return credit / len(pairs)
