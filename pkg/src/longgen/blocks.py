"""Temporal and channel-mixing building blocks.

Three block kinds, each with a stateless parallel path over a whole
sequence and a stateful single-step path over a batch of lanes:

* gated linear recurrent unit behind a causal depthwise convolution,
* windowed multi-query attention over a fixed-capacity ring buffer
  (capacity None gives the unbounded full-attention variant),
* gated two-branch MLP (stateless).

Step inputs have shape (batch, dim); parallel inputs (time, dim).
No positional encoding of any kind is applied anywhere.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Evaluated piecewise to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def rms_norm(x: np.ndarray, scale: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    ms = np.mean(np.square(x), axis=-1, keepdims=True)
    return x / np.sqrt(ms + eps) * scale


# ---------------------------------------------------------------------------
# Linear recurrence h_t = a_t * h_{t-1} + b_t.


def rglru_scan(a: np.ndarray, b: np.ndarray, h0: np.ndarray | None = None) -> np.ndarray:
    """All hidden states of the diagonal linear recurrence, via parallel scan.

    Elements compose associatively as (a2*a1, a2*b1 + b2), so prefix states
    are computed in log2(T) vectorized rounds; the result equals the
    sequential recurrence.  Requires |a| <= 1 per channel so that composed
    decay products cannot grow.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"gate/input shapes disagree: {a.shape} vs {b.shape}")
    if a.ndim < 1 or a.shape[0] == 0:
        raise ValueError("need at least one timestep")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("NaN in recurrence inputs")
    if np.abs(a).max() > 1.0:
        raise ValueError("decay gates must satisfy |a| <= 1")

    # Prefix compositions: after the loop, acc_a[t] = prod(a[0..t]) and
    # acc_b[t] is the h_t of the zero-initial-state recurrence.
    acc_a = a.astype(a.dtype, copy=True)
    acc_b = b.astype(b.dtype, copy=True)
    t = a.shape[0]
    offset = 1
    while offset < t:
        # New values must come from pre-round arrays on both operands.
        new_a = acc_a.copy()
        new_b = acc_b.copy()
        new_b[offset:] = acc_a[offset:] * acc_b[:-offset] + acc_b[offset:]
        new_a[offset:] = acc_a[offset:] * acc_a[:-offset]
        acc_a, acc_b = new_a, new_b
        offset <<= 1
    if h0 is None:
        return acc_b
    return acc_a * np.asarray(h0) + acc_b


def recurrence_gradient(
    a: np.ndarray, b: np.ndarray, h0: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reverse-mode derivative of the final state of the linear recurrence.

    For loss = <upstream, h_T>, returns cotangents of (a, b, h0).  The
    adjoint runs the decay chain backwards: lambda_{t-1} = a_t * lambda_t.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    h0 = np.asarray(h0, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"gate/input shapes disagree: {a.shape} vs {b.shape}")
    if h0.shape != a.shape[1:]:
        raise ValueError(f"h0 shape {h0.shape} does not match channels {a.shape[1:]}")

    t = a.shape[0]
    h_prev = np.empty_like(a)
    h_prev[0] = h0
    h = h0
    for i in range(t - 1):
        h = a[i] * h + b[i]
        h_prev[i + 1] = h

    d_a = np.empty_like(a)
    d_b = np.empty_like(b)
    lam = upstream
    for i in range(t - 1, -1, -1):
        d_b[i] = lam
        d_a[i] = lam * h_prev[i]
        lam = a[i] * lam
    return d_a, d_b, lam


# ---------------------------------------------------------------------------
# Gated recurrent block.


class RecurrentState:
    """Fixed-size per-lane state: recurrence vector h plus the causal-conv tail."""

    __slots__ = ("h", "conv_tail")

    def __init__(self, h: np.ndarray, conv_tail: np.ndarray):
        self.h = h
        self.conv_tail = conv_tail

    def state_bytes(self) -> int:
        return self.h.nbytes + self.conv_tail.nbytes

    def seed_to_position(self, position: int, rng: np.random.Generator) -> None:
        # Layout and byte size are position-independent; contents are
        # synthesized for benchmarking at a given depth into a stream.
        self.h = rng.standard_normal(self.h.shape).astype(self.h.dtype)
        self.conv_tail = rng.standard_normal(self.conv_tail.shape).astype(self.conv_tail.dtype)


class GatedRecurrentBlock:
    """GeLU branch gating a conv-fed, input-gated linear recurrence.

    The decay gate is a_t = exp(-c * softplus(decay_raw) * r_t) with
    r_t = sigmoid(gate(x)), which keeps a_t in (0, 1) for finite inputs, and
    the recurrence input is scaled by sqrt(1 - a_t^2) so state magnitudes
    stay bounded.
    """

    def __init__(self, params: dict[str, np.ndarray], gate_constant: float):
        self.p = params
        self.gate_constant = float(gate_constant)
        self.recurrence_dim = params["b_rec"].shape[0]
        self.conv_width = params["conv_w"].shape[0]
        self.dtype = params["w_rec"].dtype

    def init_state(self, batch_shape: tuple[int, ...] = ()) -> RecurrentState:
        r = self.recurrence_dim
        return RecurrentState(
            np.zeros(batch_shape + (r,), dtype=self.dtype),
            np.zeros(batch_shape + (self.conv_width - 1, r), dtype=self.dtype),
        )

    def _gates(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.p
        r_gate = sigmoid(c @ p["w_decay_gate"] + p["b_decay_gate"])
        log_a = -self.gate_constant * softplus(p["decay_raw"]) * r_gate
        # Saturated gates can underflow log a to a magnitude below the float
        # epsilon, where exp would round to exactly 1; the cap keeps the
        # decay strictly inside (0, 1) at any dtype.
        log_a = np.minimum(log_a, -8.0 * np.finfo(log_a.dtype).eps)
        a = np.exp(log_a)
        # sqrt(1 - a^2) computed from log a for accuracy near a = 1.
        input_scale = np.sqrt(-np.expm1(2.0 * log_a))
        i_gate = sigmoid(c @ p["w_input_gate"] + p["b_input_gate"])
        return a, input_scale * (i_gate * c)

    def step(self, x: np.ndarray, state: RecurrentState) -> tuple[np.ndarray, RecurrentState]:
        p = self.p
        if x.shape[-1] != p["w_rec"].shape[0]:
            raise ValueError(f"input dim {x.shape[-1]} does not match block dim {p['w_rec'].shape[0]}")
        ga = gelu(x @ p["w_gelu"] + p["b_gelu"])
        v = x @ p["w_rec"] + p["b_rec"]
        window = np.concatenate([state.conv_tail, v[..., None, :]], axis=-2)
        c = np.einsum("...kr,kr->...r", window, p["conv_w"]) + p["conv_b"]
        a, drive = self._gates(c)
        h = a * state.h + drive
        y = (ga * h) @ p["w_out"] + p["b_out"]
        state.h = h
        state.conv_tail = window[..., 1:, :]
        return y, state

    def forward(self, x_seq: np.ndarray) -> np.ndarray:
        """Full-sequence path from a fresh state; x_seq is (T, dim)."""
        p = self.p
        ga = gelu(x_seq @ p["w_gelu"] + p["b_gelu"])
        v = x_seq @ p["w_rec"] + p["b_rec"]
        pad = np.zeros((self.conv_width - 1, v.shape[-1]), dtype=v.dtype)
        vp = np.concatenate([pad, v], axis=0)
        c = np.zeros_like(v) + p["conv_b"]
        for k in range(self.conv_width):
            c += p["conv_w"][k] * vp[k : k + v.shape[0]]
        a, drive = self._gates(c)
        h = rglru_scan(a, drive)
        return (ga * h) @ p["w_out"] + p["b_out"]


# ---------------------------------------------------------------------------
# Multi-query attention: many query heads, one shared K/V head, no
# positional encoding (softmax weights depend on content only, so the
# ring storage order is irrelevant).


class AttentionState:
    """K/V rows seen so far.  With a capacity, a ring buffer of the newest
    `capacity` rows (constant bytes); without, an unbounded cache whose
    logical size grows one row per step (physical storage doubles, byte
    accounting reports the logical rows)."""

    __slots__ = ("k", "v", "fill", "cursor", "capacity")

    def __init__(self, batch_shape: tuple[int, ...], head_dim: int, capacity: int | None, dtype):
        self.capacity = capacity
        init = capacity if capacity is not None else 8
        self.k = np.zeros(batch_shape + (init, head_dim), dtype=dtype)
        self.v = np.zeros(batch_shape + (init, head_dim), dtype=dtype)
        self.fill = 0
        self.cursor = 0

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        return self.k[..., : self.fill, :], self.v[..., : self.fill, :]

    def push(self, k_row: np.ndarray, v_row: np.ndarray) -> None:
        if self.capacity is None:
            if self.fill == self.k.shape[-2]:
                grow = self.k.shape[-2]
                self.k = np.concatenate([self.k, np.zeros_like(self.k[..., :grow, :])], axis=-2)
                self.v = np.concatenate([self.v, np.zeros_like(self.v[..., :grow, :])], axis=-2)
            self.k[..., self.fill, :] = k_row
            self.v[..., self.fill, :] = v_row
            self.fill += 1
        else:
            self.k[..., self.cursor, :] = k_row
            self.v[..., self.cursor, :] = v_row
            self.cursor = (self.cursor + 1) % self.capacity
            self.fill = min(self.fill + 1, self.capacity)

    def row_bytes_per_lane(self) -> int:
        head_dim = self.k.shape[-1]
        return 2 * head_dim * self.k.itemsize

    def state_bytes(self) -> int:
        lanes = int(np.prod(self.k.shape[:-2], dtype=np.int64)) if self.k.ndim > 2 else 1
        if self.capacity is not None:
            return self.k.nbytes + self.v.nbytes
        return lanes * self.fill * self.row_bytes_per_lane()

    def seed_to_position(self, position: int, rng: np.random.Generator) -> None:
        if self.capacity is None:
            shape = self.k.shape[:-2] + (position, self.k.shape[-1])
            self.k = rng.standard_normal(shape).astype(self.k.dtype)
            self.v = rng.standard_normal(shape).astype(self.v.dtype)
            self.fill = position
        else:
            self.k = rng.standard_normal(self.k.shape).astype(self.k.dtype)
            self.v = rng.standard_normal(self.v.shape).astype(self.v.dtype)
            self.fill = min(position, self.capacity)
            self.cursor = position % self.capacity


def _softmax_last(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


class AttentionBlock:
    def __init__(self, params: dict[str, np.ndarray], num_heads: int, window: int | None):
        self.p = params
        self.num_heads = num_heads
        self.head_dim = params["w_k"].shape[1]
        self.window = window
        self.capacity_unbounded = window is None
        self.dtype = params["w_k"].dtype

    def init_state(self, batch_shape: tuple[int, ...] = ()) -> AttentionState:
        return AttentionState(batch_shape, self.head_dim, self.window, self.dtype)

    def step(self, x: np.ndarray, state: AttentionState) -> tuple[np.ndarray, AttentionState]:
        p = self.p
        batch_shape = x.shape[:-1]
        q = (x @ p["w_q"]).reshape(batch_shape + (self.num_heads, self.head_dim))
        k_new = x @ p["w_k"]
        v_new = x @ p["w_v"]
        if self.capacity_unbounded:
            # Pushing first never evicts, so attending over the cache view
            # covers past plus current without copying the history.
            state.push(k_new, v_new)
            k_all, v_all = state.rows()
        else:
            k_past, v_past = state.rows()
            k_all = np.concatenate([k_past, k_new[..., None, :]], axis=-2)
            v_all = np.concatenate([v_past, v_new[..., None, :]], axis=-2)
        scores = np.einsum("...hd,...sd->...hs", q, k_all) / math.sqrt(self.head_dim)
        weights = _softmax_last(scores)
        ctx = np.einsum("...hs,...sd->...hd", weights, v_all)
        y = ctx.reshape(batch_shape + (self.num_heads * self.head_dim,)) @ p["w_out"]
        if not self.capacity_unbounded:
            state.push(k_new, v_new)
        return y, state

    def forward(self, x_seq: np.ndarray) -> np.ndarray:
        """Full-sequence path with a causal band mask; x_seq is (T, dim)."""
        p = self.p
        t = x_seq.shape[0]
        q = (x_seq @ p["w_q"]).reshape(t, self.num_heads, self.head_dim)
        k = x_seq @ p["w_k"]
        v = x_seq @ p["w_v"]
        scores = np.einsum("thd,sd->ths", q, k) / math.sqrt(self.head_dim)
        rows = np.arange(t)[:, None]
        cols = np.arange(t)[None, :]
        allowed = cols <= rows
        if self.window is not None:
            allowed &= cols >= rows - self.window
        scores = np.where(allowed[:, None, :], scores, -np.inf)
        weights = _softmax_last(scores)
        ctx = np.einsum("ths,sd->thd", weights, v)
        return ctx.reshape(t, self.num_heads * self.head_dim) @ p["w_out"]


# ---------------------------------------------------------------------------
# Gated MLP (stateless; same code serves step and parallel paths).


class GatedMlp:
    def __init__(self, params: dict[str, np.ndarray]):
        self.p = params

    def __call__(self, x: np.ndarray) -> np.ndarray:
        p = self.p
        gate = gelu(x @ p["w_gate"] + p["b_gate"])
        up = x @ p["w_up"] + p["b_up"]
        return (gate * up) @ p["w_down"] + p["b_down"]


def gated_mlp(x: np.ndarray, params: dict[str, np.ndarray]) -> np.ndarray:
    return GatedMlp(params)(x)
