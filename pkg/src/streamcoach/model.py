"""Action-token streaming sequence model.

A small gated recurrent network over interleaved token streams: each input
position is a token embedding concatenated with the embeddings of the
observation visible at that position (exercise id and variant id). Trained
with weighted cross-entropy (reduced NEXT weight) via manually implemented
backpropagation through time, and decoded greedily in streaming mode.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, fields

import numpy as np

from .core import (
    VARIANT_CORRECT,
    VARIANT_TRANSITION,
    Vocabulary,
    _interleave_ticks,
    feedbacks_by_tick,
    seconds_to_tick,
)
from .policy import Action, Policy

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    n_exercises: int  # embedding table rows incl. the sentinel id 0
    n_variants: int
    d_tok: int = 32
    d_obs: int = 16
    hidden: int = 64

    @property
    def d_in(self):
        return self.d_tok + 2 * self.d_obs


_PARAM_NAMES = (
    "tok_emb",
    "ex_emb",
    "var_emb",
    "w_z",
    "w_r",
    "w_c",
    "u_z",
    "u_r",
    "u_c",
    "b_z",
    "b_r",
    "b_c",
    "w_out",
    "b_out",
)


@dataclass
class ModelParams:
    dims: ModelDims
    tok_emb: np.ndarray
    ex_emb: np.ndarray
    var_emb: np.ndarray
    w_z: np.ndarray
    w_r: np.ndarray
    w_c: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_c: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_c: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def tensors(self):
        return {name: getattr(self, name) for name in _PARAM_NAMES}

    def copy(self):
        return ModelParams(self.dims, **{k: v.copy() for k, v in self.tensors().items()})


@dataclass(frozen=True)
class TrainConfig:
    next_token_weight: float = 0.1
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 0.01
    grad_clip_norm: float = 1.0
    eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.next_token_weight <= 1.0:
            raise ValueError("next_token_weight must be in (0, 1]")
        for name in ("learning_rate", "grad_clip_norm", "epochs", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def init_params(seed, dims):
    """Uniform(-a, a) per matrix with a = sqrt(6/(fan_in+fan_out)); zero biases."""
    rng = np.random.Generator(np.random.PCG64(seed))

    def glorot(shape):
        a = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-a, a, size=shape)

    d = dims
    return ModelParams(
        dims=d,
        tok_emb=glorot((d.vocab_size, d.d_tok)),
        ex_emb=glorot((d.n_exercises, d.d_obs)),
        var_emb=glorot((d.n_variants, d.d_obs)),
        w_z=glorot((d.d_in, d.hidden)),
        w_r=glorot((d.d_in, d.hidden)),
        w_c=glorot((d.d_in, d.hidden)),
        u_z=glorot((d.hidden, d.hidden)),
        u_r=glorot((d.hidden, d.hidden)),
        u_c=glorot((d.hidden, d.hidden)),
        b_z=np.zeros(d.hidden),
        b_r=np.zeros(d.hidden),
        b_c=np.zeros(d.hidden),
        w_out=glorot((d.hidden, d.vocab_size)),
        b_out=np.zeros(d.vocab_size),
    )


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def encode_stream(stream, observations):
    """TokenStream + observation events -> integer input arrays."""
    tokens = np.asarray(stream.tokens, dtype=np.int64)
    obs_index = np.asarray(stream.obs_index, dtype=np.int64)
    ex_ids = np.asarray([ev.symbol.exercise_id for ev in observations], dtype=np.int64)
    var_ids = np.asarray([ev.symbol.variant_id for ev in observations], dtype=np.int64)
    if obs_index.size and obs_index.max() >= len(observations):
        raise ValueError("obs_index exceeds observation list")
    weights = np.asarray(stream.loss_weight, dtype=np.float64)
    return tokens, ex_ids[obs_index], var_ids[obs_index], weights


def _forward_batch(params, tokens, obs_ex, obs_var, want_cache=False):
    """Batched recurrent forward. tokens/obs_* are (B, T) int arrays.

    Returns logits (B, T, V) and, optionally, the cache needed for BPTT.
    """
    d = params.dims
    if tokens.max() >= d.vocab_size or tokens.min() < 0:
        raise ValueError("token id out of vocabulary range")
    if obs_ex.max() >= d.n_exercises or obs_var.max() >= d.n_variants:
        raise ValueError("observation index out of embedding range")
    B, T = tokens.shape
    H = d.hidden
    x = np.concatenate(
        [params.tok_emb[tokens], params.ex_emb[obs_ex], params.var_emb[obs_var]],
        axis=2,
    )  # (B, T, d_in)
    # precompute input projections for all steps at once
    xz = x @ params.w_z + params.b_z
    xr = x @ params.w_r + params.b_r
    xc = x @ params.w_c + params.b_c
    h = np.zeros((B, H))
    hs = np.empty((B, T, H))
    zs = np.empty((B, T, H))
    rs = np.empty((B, T, H))
    cs = np.empty((B, T, H))
    h_prevs = np.empty((B, T, H))
    for t in range(T):
        h_prevs[:, t] = h
        z = _sigmoid(xz[:, t] + h @ params.u_z)
        r = _sigmoid(xr[:, t] + h @ params.u_r)
        c = np.tanh(xc[:, t] + (r * h) @ params.u_c)
        h = (1.0 - z) * h + z * c
        hs[:, t], zs[:, t], rs[:, t], cs[:, t] = h, z, r, c
    logits = hs @ params.w_out + params.b_out
    if not want_cache:
        return logits, None
    return logits, {"x": x, "hs": hs, "zs": zs, "rs": rs, "cs": cs, "h_prevs": h_prevs}


def forward(params, stream, observations):
    """Per-position next-token logits for one stream (strictly causal)."""
    tokens, obs_ex, obs_var, _ = encode_stream(stream, observations)
    logits, _ = _forward_batch(
        params, tokens[None, :], obs_ex[None, :], obs_var[None, :]
    )
    return logits[0]


def _softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def loss(logits, stream):
    """Weighted mean cross-entropy of predicting token p+1 from position p."""
    tokens = np.asarray(stream.tokens, dtype=np.int64)
    weights = np.asarray(stream.loss_weight, dtype=np.float64)
    if logits.shape[0] != len(tokens):
        raise ValueError("logits/stream length mismatch")
    if len(tokens) < 2:
        raise ValueError("stream too short to score")
    probs = _softmax(logits[:-1])
    nll = -np.log(probs[np.arange(len(tokens) - 1), tokens[1:]] + 1e-300)
    w = weights[1:]
    denom = w.sum()
    if denom == 0:
        return 0.0
    return float((w * nll).sum() / denom)


def _batch_loss_and_grads(params, tokens, obs_ex, obs_var, weights):
    """Mean over batch streams of per-stream weight-normalized loss + grads.

    Padded positions must carry zero loss weight; padding token/obs ids can be
    anything valid.
    """
    d = params.dims
    B, T = tokens.shape
    logits, cache = _forward_batch(params, tokens, obs_ex, obs_var, want_cache=True)
    probs = _softmax(logits[:, :-1])
    targets = tokens[:, 1:]
    w = weights[:, 1:]
    denom = w.sum(axis=1)  # per-stream normalizer
    safe_denom = np.where(denom > 0, denom, 1.0)
    idx_b, idx_t = np.meshgrid(np.arange(B), np.arange(T - 1), indexing="ij")
    nll = -np.log(probs[idx_b, idx_t, targets] + 1e-300)
    per_stream = (w * nll).sum(axis=1) / safe_denom
    total_loss = float(per_stream.mean())

    # d loss / d logits
    dlogits = np.zeros_like(logits)
    coef = (w / safe_denom[:, None]) / B  # (B, T-1)
    dl = probs.copy()
    dl[idx_b, idx_t, targets] -= 1.0
    dlogits[:, :-1] = dl * coef[:, :, None]

    hs, zs, rs, cs, h_prevs, x = (
        cache["hs"],
        cache["zs"],
        cache["rs"],
        cache["cs"],
        cache["h_prevs"],
        cache["x"],
    )
    g = {name: np.zeros_like(t) for name, t in params.tensors().items()}
    g["w_out"] = np.einsum("bth,btv->hv", hs, dlogits)
    g["b_out"] = dlogits.sum(axis=(0, 1))

    dh_next = np.zeros((B, d.hidden))
    dx = np.zeros_like(x)
    for t in range(T - 1, -1, -1):
        dh = dh_next + dlogits[:, t] @ params.w_out.T
        z, r, c, h_prev = zs[:, t], rs[:, t], cs[:, t], h_prevs[:, t]
        dz = dh * (c - h_prev) * z * (1.0 - z)
        dc = dh * z * (1.0 - c * c)
        dr = (dc @ params.u_c.T) * h_prev * r * (1.0 - r)
        g["w_z"] += x[:, t].T @ dz
        g["w_r"] += x[:, t].T @ dr
        g["w_c"] += x[:, t].T @ dc
        g["u_z"] += h_prev.T @ dz
        g["u_r"] += h_prev.T @ dr
        g["u_c"] += (r * h_prev).T @ dc
        g["b_z"] += dz.sum(axis=0)
        g["b_r"] += dr.sum(axis=0)
        g["b_c"] += dc.sum(axis=0)
        dx[:, t] = dz @ params.w_z.T + dr @ params.w_r.T + dc @ params.w_c.T
        dh_next = (
            dh * (1.0 - z)
            + dz @ params.u_z.T
            + dr @ params.u_r.T
            + (dc @ params.u_c.T) * r
        )
    dtok = dx[:, :, : d.d_tok]
    dex = dx[:, :, d.d_tok : d.d_tok + d.d_obs]
    dvar = dx[:, :, d.d_tok + d.d_obs :]
    np.add.at(g["tok_emb"], tokens, dtok)
    np.add.at(g["ex_emb"], obs_ex, dex)
    np.add.at(g["var_emb"], obs_var, dvar)
    return total_loss, g


def backward(params, stream, observations):
    """Exact gradients of loss(forward(...), stream) for one stream."""
    tokens, obs_ex, obs_var, weights = encode_stream(stream, observations)
    _, g = _batch_loss_and_grads(
        params, tokens[None, :], obs_ex[None, :], obs_var[None, :], weights[None, :]
    )
    return g


def adam_step(params, grads, state, cfg):
    """AdamW update: global-norm clip, bias-corrected moments, decoupled decay."""
    for name in _PARAM_NAMES:
        if not np.all(np.isfinite(grads[name])):
            raise ValueError(f"non-finite gradient in parameter {name!r}")
    norm = np.sqrt(sum(float((grads[n] ** 2).sum()) for n in _PARAM_NAMES))
    scale = 1.0
    if norm > cfg.grad_clip_norm:
        scale = cfg.grad_clip_norm / norm
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name in _PARAM_NAMES:
        gt = grads[name] * scale
        if name not in state.m:
            state.m[name] = np.zeros_like(gt)
            state.v[name] = np.zeros_like(gt)
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * gt
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * gt**2
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p = getattr(params, name)
        p -= cfg.learning_rate * (
            m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p
        )
    return params, state


# ---------------------------------------------------------------------------
# Training on per-segment crops


def segment_streams(session, vocab, next_token_weight):
    """Interleaved token streams cropped to single exercise segments."""
    crops = []
    tick_len = session.tick_len
    for seg in session.segments:
        first = seconds_to_tick(seg.start + 1e-9, tick_len)
        n = int(round(seg.duration / tick_len))
        fbs = [
            f
            for f in session.gt_feedbacks
            if seg.start - 1e-9 <= f.t < seg.end - 1e-9
        ]
        for f in fbs:
            for w in f.words:
                if w not in vocab:
                    raise ValueError(f"feedback word not in vocabulary: {w!r}")
        fb_map = feedbacks_by_tick(fbs, tick_len, n, t_offset=seg.start)
        stream = _interleave_ticks(n, fb_map, vocab, next_token_weight)
        obs = session.observations[first : first + n]
        crops.append((stream, obs))
    return crops


def _pad_batch(batch):
    """Stack encoded streams into padded (B, T) arrays; pad weight is 0."""
    encoded = [encode_stream(stream, obs) for stream, obs in batch]
    T = max(len(e[0]) for e in encoded)
    B = len(encoded)
    tokens = np.zeros((B, T), dtype=np.int64)
    obs_ex = np.zeros((B, T), dtype=np.int64)
    obs_var = np.zeros((B, T), dtype=np.int64)
    weights = np.zeros((B, T), dtype=np.float64)
    for i, (tok, ex, var, w) in enumerate(encoded):
        L = len(tok)
        tokens[i, :L] = tok
        obs_ex[i, :L] = ex
        obs_var[i, :L] = var
        weights[i, :L] = w
    return tokens, obs_ex, obs_var, weights


def train(sessions, vocab, cfg=TrainConfig(), dims=None, progress=None):
    """Train on per-segment crops; returns (params, per-epoch loss curve)."""
    sessions = list(sessions)
    if not sessions:
        raise ValueError("no sessions to train on")
    if dims is None:
        n_ex = 1 + max(
            (ev.symbol.exercise_id for s in sessions for ev in s.observations),
            default=0,
        )
        n_var = 1 + max(
            (ev.symbol.variant_id for s in sessions for ev in s.observations),
            default=0,
        )
        dims = ModelDims(vocab_size=vocab.size, n_exercises=n_ex, n_variants=n_var)
    crops = []
    for s in sessions:
        crops.extend(segment_streams(s, vocab, cfg.next_token_weight))
    params = init_params(cfg.seed, dims)
    state = AdamState()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, 1))))
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(crops))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [crops[i] for i in order[start : start + cfg.batch_size]]
            tokens, obs_ex, obs_var, weights = _pad_batch(batch)
            batch_loss, grads = _batch_loss_and_grads(
                params, tokens, obs_ex, obs_var, weights
            )
            params, state = adam_step(params, grads, state, cfg)
            epoch_loss += batch_loss
            n_batches += 1
        curve.append(epoch_loss / n_batches)
        if progress is not None:
            progress(epoch, curve[-1])
    return params, curve


# ---------------------------------------------------------------------------
# Streaming decode

MAX_FEEDBACK_WORDS = 20


class StreamingModelPolicy(Policy):
    """Greedy streaming decode of the trained model as a policy.

    Hidden state persists across ticks and resets when a new segment's
    transition phase begins (mirroring segment-cropped training). Argmax
    ties break toward the lowest token id, so decoding is deterministic.
    """

    name = "stream_model"

    def __init__(self, params, vocab):
        if params.dims.vocab_size != vocab.size:
            raise ValueError("params/vocabulary size mismatch")
        self.params = params
        self.vocab = vocab
        self.reset()

    def reset(self):
        self._h = np.zeros(self.params.dims.hidden)
        self._was_active = False

    def _step_token(self, token_id, ex_id, var_id):
        p = self.params
        x = np.concatenate([p.tok_emb[token_id], p.ex_emb[ex_id], p.var_emb[var_id]])
        z = _sigmoid(x @ p.w_z + self._h @ p.u_z + p.b_z)
        r = _sigmoid(x @ p.w_r + self._h @ p.u_r + p.b_r)
        c = np.tanh(x @ p.w_c + (r * self._h) @ p.u_c + p.b_c)
        self._h = (1.0 - z) * self._h + z * c
        return int(np.argmax(self._h @ p.w_out + p.b_out))

    def step(self, event):
        sym = event.symbol
        active = sym.variant_id not in (0, VARIANT_TRANSITION)
        if self._was_active and not active:
            self._h = np.zeros_like(self._h)  # segment boundary
        self._was_active = active
        ex, var = sym.exercise_id, sym.variant_id
        nxt = self._step_token(Vocabulary.NEXT, ex, var)
        if nxt != Vocabulary.FEEDBACK:
            return Action.next()
        words = []
        tok = Vocabulary.FEEDBACK
        while len(words) < MAX_FEEDBACK_WORDS:
            tok = self._step_token(tok, ex, var)
            if tok in (Vocabulary.NEXT, Vocabulary.FEEDBACK):
                break
            words.append(self.vocab.word(tok))
        if not words:
            return Action.next()
        return Action.feedback(words)


def stream_decode(params, vocab):
    return StreamingModelPolicy(params, vocab)


class ModelForcedGenerator:
    """Feedback source for turn-based baselines: runs the trained model over
    the stream but only speaks when the schedule forces a FEEDBACK token."""

    def __init__(self, params, vocab):
        self.policy = StreamingModelPolicy(params, vocab)

    def reset(self):
        self.policy.reset()

    def __call__(self, event):
        pol = self.policy
        sym = event.symbol
        ex, var = sym.exercise_id, sym.variant_id
        pol._step_token(Vocabulary.NEXT, ex, var)
        words = []
        tok = Vocabulary.FEEDBACK
        while len(words) < MAX_FEEDBACK_WORDS:
            tok = pol._step_token(tok, ex, var)
            if tok in (Vocabulary.NEXT, Vocabulary.FEEDBACK):
                break
            words.append(pol.vocab.word(tok))
        return tuple(words) if words else ("keep", "going")


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path, params, vocab):
    arrays = {name: np.ascontiguousarray(t) for name, t in params.tensors().items()}
    blob = b"".join(arrays[name].tobytes() for name in _PARAM_NAMES)
    meta = {
        "version": CHECKPOINT_VERSION,
        "dims": {f.name: getattr(params.dims, f.name) for f in fields(ModelDims)},
        "vocab": list(vocab.words),
        "vocab_hash": vocab.content_hash(),
        "checksum": hashlib.sha256(blob).hexdigest(),
    }
    import json

    with open(path, "wb") as f:
        np.savez(f, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path, expected_vocab=None):
    import json

    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        arrays = {name: data[name] for name in _PARAM_NAMES}
    blob = b"".join(np.ascontiguousarray(arrays[name]).tobytes() for name in _PARAM_NAMES)
    if hashlib.sha256(blob).hexdigest() != meta["checksum"]:
        raise ValueError("checkpoint checksum mismatch")
    vocab = Vocabulary(meta["vocab"])
    if vocab.content_hash() != meta["vocab_hash"]:
        raise ValueError("checkpoint vocabulary hash mismatch")
    if expected_vocab is not None and expected_vocab.content_hash() != meta["vocab_hash"]:
        raise ValueError("checkpoint was trained on a different vocabulary")
    dims = ModelDims(**meta["dims"])
    return ModelParams(dims, **arrays), vocab
