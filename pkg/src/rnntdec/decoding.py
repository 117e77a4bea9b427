"""Greedy and beam transducer decoding, plus lookup-table conversion.

Both decoders are frame-synchronous: at each encoder frame a hypothesis may
emit up to ``max_symbols_per_frame`` non-blank labels before a blank advances
time.  Since the prediction network only sees the last ``history_len``
labels, its outputs are cached per history window during a decode (the
dynamic form of the lookup-table conversion below).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .config import DecoderConfig
from .errors import CapacityError, ConfigError
from .mathops import log_softmax, logaddexp
from .nets import PredictionState, joint_forward, prediction_forward
from .weights import ModelWeights, check_variant


@dataclass
class Hypothesis:
    """One beam-search hypothesis: emitted labels and their merged log-prob.

    ``state`` is the history window after the labels; ``pn_out`` caches the
    prediction-network output for that window.
    """

    labels: tuple[int, ...]
    log_prob: float
    state: PredictionState | None = None
    pn_out: np.ndarray | None = None

    def sort_key(self):
        return (-self.log_prob, self.labels)


@dataclass
class GreedyResult:
    labels: list[int]
    log_prob: float
    step_times_ms: list[float] = field(default_factory=list)


class _PnCache:
    """Per-decode cache of prediction outputs keyed by history window."""

    def __init__(self, weights: ModelWeights, config: DecoderConfig):
        self.weights = weights
        self.config = config
        self._table: dict[tuple[int, ...], np.ndarray] = {}

    def get(self, state: PredictionState) -> np.ndarray:
        g = self._table.get(state.ids)
        if g is None:
            g = prediction_forward(state, self.weights, self.config)
            self._table[state.ids] = g
        return g


def greedy_decode(
    enc_frames: np.ndarray, weights: ModelWeights, config: DecoderConfig
) -> GreedyResult:
    """Frame-synchronous argmax decoding.

    A non-blank argmax emits the label, feeds it back into the prediction
    network and stays on the frame; blank (or hitting the per-frame symbol
    cap) advances to the next frame.  Blanks never appear in the output.
    """
    check_variant(weights, config)
    cache = _PnCache(weights, config)
    state = PredictionState.initial(config)
    g = cache.get(state)
    labels: list[int] = []
    log_prob = 0.0
    step_times: list[float] = []
    blank = config.blank_id
    for t in range(enc_frames.shape[0]):
        f_t = enc_frames[t]
        emitted = 0
        while True:
            t0 = time.perf_counter()
            logp = log_softmax(joint_forward(f_t, g, weights, config))
            k = int(np.argmax(logp))
            log_prob += float(logp[k])
            if k == blank:
                step_times.append((time.perf_counter() - t0) * 1e3)
                break
            labels.append(k)
            state = state.push(k)
            g = cache.get(state)
            emitted += 1
            step_times.append((time.perf_counter() - t0) * 1e3)
            if emitted >= config.max_symbols_per_frame:
                break
    return GreedyResult(labels, log_prob, step_times)


def beam_decode(
    enc_frames: np.ndarray,
    weights: ModelWeights,
    config: DecoderConfig,
    beam_width: int,
) -> list[Hypothesis]:
    """Time-synchronous beam search with label-sequence merging.

    Hypotheses with identical label sequences are merged by log-sum-exp of
    their alignment log-probs.  Within a frame, each hypothesis may extend by
    at most ``max_symbols_per_frame`` labels; taking blank moves it to the
    next frame's beam.  Returns the n-best list sorted by descending
    log-prob.
    """
    check_variant(weights, config)
    if beam_width < 1:
        raise ConfigError(f"beam width must be >= 1, got {beam_width}")
    cache = _PnCache(weights, config)
    blank = config.blank_id
    vocab = config.vocab_size

    def top_b(d: dict[tuple[int, ...], float]) -> dict[tuple[int, ...], float]:
        if len(d) <= beam_width:
            return d
        kept = sorted(d.items(), key=lambda kv: (-kv[1], kv[0]))[:beam_width]
        return dict(kept)

    beams: dict[tuple[int, ...], float] = {(): 0.0}
    for t in range(enc_frames.shape[0]):
        f_t = enc_frames[t]
        next_beams: dict[tuple[int, ...], float] = {}
        frontier = beams
        for round_idx in range(config.max_symbols_per_frame + 1):
            extended: dict[tuple[int, ...], float] = {}
            for labels, lp in frontier.items():
                g = cache.get(PredictionState.from_labels(labels, config))
                logp = log_softmax(joint_forward(f_t, g, weights, config))
                blank_lp = lp + float(logp[blank])
                prev = next_beams.get(labels)
                next_beams[labels] = blank_lp if prev is None else logaddexp(prev, blank_lp)
                if round_idx < config.max_symbols_per_frame:
                    for v in range(vocab):
                        seq = labels + (v,)
                        cand = lp + float(logp[v])
                        prev = extended.get(seq)
                        extended[seq] = cand if prev is None else logaddexp(prev, cand)
            frontier = top_b(extended)
            if not frontier:
                break
        beams = top_b(next_beams)

    nbest = []
    for labels, lp in beams.items():
        state = PredictionState.from_labels(labels, config)
        nbest.append(Hypothesis(labels, lp, state, cache.get(state)))
    nbest.sort(key=Hypothesis.sort_key)
    return nbest


@dataclass
class LookupTable:
    """Precomputed prediction outputs for every length-N history window.

    ``table[idx]`` is the output for the window whose most-recent-first ids
    form the base-(V+1) digits of ``idx`` (pad id included).
    """

    context_arity: int
    vocab_ext: int
    table: np.ndarray  # ((V+1)^N, pn_out)

    def index_of(self, ids_recent_first) -> int:
        idx = 0
        for i in ids_recent_first:
            idx = idx * self.vocab_ext + i
        return idx

    def lookup(self, state: PredictionState) -> np.ndarray:
        return self.table[self.index_of(state.recent_first())]

    def contexts(self):
        """All windows in table order, as recent-first tuples."""
        return itertools.product(range(self.vocab_ext), repeat=self.context_arity)


def convert_to_lookup(
    weights: ModelWeights,
    config: DecoderConfig,
    max_entries: int = 1_000_000,
) -> LookupTable:
    """Enumerate every history window and precompute the PN output.

    Raises CapacityError before doing any work when (V+1)^N exceeds
    ``max_entries`` (large vocabularies make the table impractical).
    """
    check_variant(weights, config)
    n = config.history_len
    entries = config.vocab_ext**n
    if entries > max_entries:
        raise CapacityError(
            f"lookup table needs {entries} entries "
            f"({config.vocab_ext}^{n}), budget is {max_entries}"
        )
    table = np.empty((entries, config.pn_out_dim), dtype=weights.dtype)
    lt = LookupTable(n, config.vocab_ext, table)
    for ctx in lt.contexts():
        state = PredictionState(ctx[::-1], config.pad_id)
        table[lt.index_of(ctx)] = prediction_forward(state, weights, config)
    return lt
