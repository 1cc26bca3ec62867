"""Core domain types: sessions, vocabularies, and token-stream interleaving.

Everything here is immutable after construction and all operations are pure,
so the types are safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

DEFAULT_TICK_LEN = 0.25

# Variant index layout (fixed so embeddings have stable semantics).
VARIANT_IDLE = 0
VARIANT_TRANSITION = 1
VARIANT_CORRECT = 2
VARIANT_FAST = 3
VARIANT_SLOW = 4
VARIANT_MISTAKE_BASE = 5  # mistake k of an exercise -> 5 + k

# Exercise id 0 is the sentinel for exercise-independent variants (idle,
# transition); real exercises are 1-based.
EXERCISE_NONE = 0

_WORD_RE = re.compile(r"[a-z0-9]+")


def normalize_words(text):
    """Lowercase, strip punctuation, whitespace-split. Returns a word tuple."""
    return tuple(_WORD_RE.findall(text.lower()))


def seconds_to_tick(t, tick_len=DEFAULT_TICK_LEN):
    """Tick index whose half-open interval [k*tick_len, (k+1)*tick_len) holds t."""
    if t < 0:
        raise ValueError(f"negative time {t}")
    return int(t / tick_len + 1e-9)


def quantize(t, tick_len=DEFAULT_TICK_LEN):
    """Snap t onto the tick grid."""
    return seconds_to_tick(t, tick_len) * tick_len


def is_on_grid(t, tick_len=DEFAULT_TICK_LEN):
    return abs(t - round(t / tick_len) * tick_len) < 1e-6


@dataclass(frozen=True)
class ObservationSymbol:
    """One tick of recognized user activity: which exercise, doing what."""

    exercise_id: int
    variant_id: int

    def __post_init__(self):
        if self.exercise_id < 0 or self.variant_id < 0:
            raise ValueError("negative observation index")
        if self.variant_id in (VARIANT_IDLE, VARIANT_TRANSITION):
            if self.exercise_id != EXERCISE_NONE:
                raise ValueError(
                    "idle/transition variants carry the sentinel exercise id 0"
                )


@dataclass(frozen=True)
class ObservationEvent:
    t: float
    symbol: ObservationSymbol


@dataclass(frozen=True)
class TimedFeedback:
    t: float
    words: tuple
    kind: str  # corrective | affirmative | instructional

    def __post_init__(self):
        if not self.words:
            raise ValueError("feedback words must be non-empty")
        if len(self.words) > 20:
            raise ValueError("feedback longer than 20 words")
        if self.kind not in ("corrective", "affirmative", "instructional"):
            raise ValueError(f"unknown feedback kind {self.kind!r}")

    @property
    def text(self):
        return " ".join(self.words)


@dataclass(frozen=True)
class SegmentSpec:
    """A single-exercise span of a session.

    behavior_script, when present, is the realized user phase plan: ordered
    (phase_kind, dwell_ticks) pairs that tile the segment exactly.
    """

    exercise_id: int
    start: float
    duration: float
    behavior_script: tuple = ()

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")

    @property
    def end(self):
        return self.start + self.duration


@dataclass(frozen=True)
class Session:
    id: str
    seed: int
    segments: tuple
    observations: tuple
    gt_feedbacks: tuple
    tick_len: float = DEFAULT_TICK_LEN

    @property
    def duration(self):
        return self.segments[-1].end if self.segments else 0.0

    @property
    def n_ticks(self):
        return len(self.observations)

    def segment_at(self, t):
        for seg in self.segments:
            if seg.start - 1e-9 <= t < seg.end - 1e-9:
                return seg
        return None


def validate_session(session):
    """Check every Session invariant; raises ValueError on the first violation."""
    segs = session.segments
    if not segs:
        raise ValueError("session has no segments")
    for prev, cur in zip(segs, segs[1:]):
        if abs(prev.end - cur.start) > 1e-9:
            raise ValueError("segments are not contiguous")
    n_ticks = seconds_to_tick(session.duration - 1e-9, session.tick_len) + 1
    if len(session.observations) != n_ticks:
        raise ValueError(
            f"expected {n_ticks} observations, got {len(session.observations)}"
        )
    for k, ev in enumerate(session.observations):
        if abs(ev.t - k * session.tick_len) > 1e-6:
            raise ValueError(f"observation {k} off the tick grid: t={ev.t}")
    last_t = -1.0
    for fb in session.gt_feedbacks:
        if fb.t <= last_t:
            raise ValueError("gt feedbacks not strictly sorted by time")
        last_t = fb.t
        if not is_on_grid(fb.t, session.tick_len):
            raise ValueError(f"feedback at {fb.t} is off the tick grid")
        if session.segment_at(fb.t) is None:
            raise ValueError(f"feedback at {fb.t} lies outside every segment")
    return session


class Vocabulary:
    """Bijective word<->id maps with reserved action tokens at ids 0 and 1."""

    NEXT_TOKEN = "<next>"
    FEEDBACK_TOKEN = "<feedback>"
    NEXT = 0
    FEEDBACK = 1

    def __init__(self, words):
        words = list(words)
        if words[:2] != [self.NEXT_TOKEN, self.FEEDBACK_TOKEN]:
            words = [self.NEXT_TOKEN, self.FEEDBACK_TOKEN] + words
        self._id_to_word = tuple(words)
        self._word_to_id = {w: i for i, w in enumerate(words)}
        if len(self._word_to_id) != len(words):
            raise ValueError("duplicate word in vocabulary")

    @property
    def size(self):
        return len(self._id_to_word)

    @property
    def words(self):
        return self._id_to_word

    def __contains__(self, word):
        return word in self._word_to_id

    def id(self, word):
        try:
            return self._word_to_id[word]
        except KeyError:
            raise ValueError(f"word not in vocabulary: {word!r}") from None

    def word(self, token_id):
        if not 0 <= token_id < self.size:
            raise ValueError(f"token id out of range: {token_id}")
        return self._id_to_word[token_id]

    def content_hash(self):
        import hashlib

        return hashlib.sha256("\n".join(self._id_to_word).encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and other._id_to_word == self._id_to_word


def build_vocabulary(corpus):
    """Vocabulary over a corpus of word sequences, first-occurrence order."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    seen = {}
    for seq in corpus:
        for w in seq:
            if w in (Vocabulary.NEXT_TOKEN, Vocabulary.FEEDBACK_TOKEN):
                raise ValueError(f"corpus word collides with reserved token: {w!r}")
            if w not in seen:
                seen[w] = None
    return Vocabulary(list(seen))


@dataclass(frozen=True)
class TokenStream:
    """Interleaved action/word token sequence with aligned observations.

    obs_index[p] is the index of the observation visible when token p is fed
    to the model; loss_weight[p] scales token p's contribution when it is a
    prediction target.
    """

    tokens: tuple
    obs_index: tuple
    loss_weight: tuple

    def __post_init__(self):
        if not (len(self.tokens) == len(self.obs_index) == len(self.loss_weight)):
            raise ValueError("token stream field lengths differ")
        for a, b in zip(self.obs_index, self.obs_index[1:]):
            if b < a:
                raise ValueError("obs_index must be non-decreasing")

    def __len__(self):
        return len(self.tokens)


def _interleave_ticks(n_ticks, feedback_by_tick, vocab, next_token_weight):
    """Shared interleaving core over a window of n_ticks.

    feedback_by_tick maps tick -> word tuple. The burst for tick k precedes
    tick k's NEXT token and carries the last observation delivered before it
    (tick k-1, clamped at 0).
    """
    tokens, obs_index, weights = [], [], []
    for k in range(n_ticks):
        words = feedback_by_tick.get(k)
        if words is not None:
            burst_obs = max(k - 1, 0)
            tokens.append(Vocabulary.FEEDBACK)
            obs_index.append(burst_obs)
            weights.append(1.0)
            for w in words:
                tokens.append(vocab.id(w))
                obs_index.append(burst_obs)
                weights.append(1.0)
        tokens.append(Vocabulary.NEXT)
        obs_index.append(k)
        weights.append(next_token_weight)
    return TokenStream(tuple(tokens), tuple(obs_index), tuple(weights))


def feedbacks_by_tick(feedbacks, tick_len, n_ticks, t_offset=0.0):
    """Map each feedback to its covering tick; reject collisions/overflow."""
    out = {}
    for fb in feedbacks:
        k = seconds_to_tick(fb.t - t_offset, tick_len)
        if k >= n_ticks:
            raise ValueError(f"feedback at {fb.t} has no covering tick")
        if k in out:
            raise ValueError(f"two feedbacks land in tick {k}")
        out[k] = fb.words
    return out


def interleave(session, vocab, tick_len=None, next_token_weight=0.1):
    """Turn a session into the interleaved training token stream.

    One NEXT per tick; a tick containing a ground-truth feedback gets
    FEEDBACK + word tokens immediately before its NEXT. The model finishes a
    feedback and then requests the next observation via NEXT, so NEXT doubles
    as the end-of-feedback delimiter.
    """
    tick_len = session.tick_len if tick_len is None else tick_len
    n_ticks = session.n_ticks
    fb_map = feedbacks_by_tick(session.gt_feedbacks, tick_len, n_ticks)
    return _interleave_ticks(n_ticks, fb_map, vocab, next_token_weight)


def deinterleave(stream, vocab):
    """Recover (tick, words) for every feedback burst in a token stream."""
    bursts = []
    tick = 0
    i = 0
    n = len(stream.tokens)
    while i < n:
        tok = stream.tokens[i]
        if tok == Vocabulary.NEXT:
            tick += 1
            i += 1
        elif tok == Vocabulary.FEEDBACK:
            i += 1
            words = []
            while i < n and stream.tokens[i] not in (
                Vocabulary.NEXT,
                Vocabulary.FEEDBACK,
            ):
                words.append(vocab.word(stream.tokens[i]))
                i += 1
            bursts.append((tick, tuple(words)))
        else:
            raise ValueError(f"stray word token at position {i}")
    return bursts


# ---------------------------------------------------------------------------
# Session JSONL (one session per line, fixed field order, 3-decimal times)


def _fmt(t):
    return f"{t:.3f}"


def session_to_jsonl(session):
    import json

    segs = ", ".join(
        '{"exercise": %d, "start": %s, "duration": %s}'
        % (s.exercise_id, _fmt(s.start), _fmt(s.duration))
        for s in session.segments
    )
    obs = ", ".join(
        "[%d, %d, %d]" % (k, ev.symbol.exercise_id, ev.symbol.variant_id)
        for k, ev in enumerate(session.observations)
    )
    fbs = ", ".join(
        '{"t": %s, "kind": %s, "text": %s}'
        % (_fmt(f.t), json.dumps(f.kind), json.dumps(f.text))
        for f in session.gt_feedbacks
    )
    return (
        '{"id": %s, "seed": %d, "tick_len": %s, "segments": [%s], '
        '"observations": [%s], "feedbacks": [%s]}'
        % (json.dumps(session.id), session.seed, _fmt(session.tick_len), segs, obs, fbs)
    )


def session_from_jsonl(line):
    import json

    rec = json.loads(line)
    tick_len = rec["tick_len"]
    segments = tuple(
        SegmentSpec(s["exercise"], s["start"], s["duration"]) for s in rec["segments"]
    )
    observations = tuple(
        ObservationEvent(k * tick_len, ObservationSymbol(ex, var))
        for k, ex, var in rec["observations"]
    )
    feedbacks = tuple(
        TimedFeedback(f["t"], normalize_words(f["text"]), f["kind"])
        for f in rec["feedbacks"]
    )
    return Session(
        id=rec["id"],
        seed=rec["seed"],
        segments=segments,
        observations=observations,
        gt_feedbacks=feedbacks,
        tick_len=tick_len,
    )


def load_sessions(path):
    sessions = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                sessions.append(session_from_jsonl(line))
    return sessions


def save_sessions(sessions, path):
    with open(path, "w") as f:
        for s in sessions:
            f.write(session_to_jsonl(s) + "\n")
