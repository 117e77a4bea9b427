"""Transducer alignment lattice: forward-backward loss and its gradient.

The lattice is the standard T x (U+1) grid: a blank emission advances the
frame index t, a label emission advances the target index u, and every
complete path ends with a blank at (T-1, U).  All recursions run in the log
domain in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .mathops import log_softmax, logaddexp

NEG_INF = -np.inf


@dataclass
class TransducerLattice:
    """Forward/backward log-probability grids for one (frames, target) pair."""

    T: int
    U: int
    log_alpha: np.ndarray  # (T, U+1)
    log_beta: np.ndarray  # (T, U+1)
    lp_blank: np.ndarray  # (T, U+1) log P(blank | t, u)
    lp_label: np.ndarray  # (T, U)   log P(target[u] | t, u)
    log_likelihood: float


@dataclass
class LossResult:
    loss: float
    dlogits: np.ndarray  # (T, U+1, V+1)
    lattice: TransducerLattice


def transducer_loss(
    logits_grid: np.ndarray,
    target,
    max_symbols_per_frame: int | None = None,
) -> LossResult:
    """Negative log-probability of ``target`` summed over all alignments.

    ``logits_grid`` is (T, U+1, V+1) with blank as the last class.  The
    gradient w.r.t. the logits is computed analytically from the alpha/beta
    grids.  ``max_symbols_per_frame``, when given, only bounds feasibility
    (U <= T * cap); the lattice itself is the standard uncapped recursion.
    """
    target = list(target)
    U = len(target)
    logits_grid = np.asarray(logits_grid, dtype=np.float64)
    if logits_grid.ndim != 3:
        raise ShapeError(f"logits grid must be (T, U+1, V+1), got {logits_grid.shape}")
    T, u_rows, num_logits = logits_grid.shape
    if u_rows != U + 1:
        raise ShapeError(f"logits grid has {u_rows} target rows, expected U+1={U + 1}")
    if not np.all(np.isfinite(logits_grid)):
        raise DomainError("logits grid contains non-finite entries")
    if any(not 0 <= y < num_logits - 1 for y in target):
        raise DomainError("target contains ids outside the non-blank vocabulary")
    if T == 0:
        if U > 0:
            raise DomainError(f"cannot align {U} labels over zero frames")
        lattice = TransducerLattice(0, 0, np.zeros((0, 1)), np.zeros((0, 1)),
                                    np.zeros((0, 1)), np.zeros((0, 0)), 0.0)
        return LossResult(0.0, np.zeros_like(logits_grid), lattice)
    if max_symbols_per_frame is not None and U > T * max_symbols_per_frame:
        raise DomainError(
            f"{U} labels cannot be emitted in {T} frames at "
            f"{max_symbols_per_frame} symbols per frame"
        )

    lp = log_softmax(logits_grid)
    blank = num_logits - 1
    lp_blank = lp[:, :, blank]
    lp_label = np.empty((T, U))
    for u, y in enumerate(target):
        lp_label[:, u] = lp[:, u, y]

    log_alpha = np.full((T, U + 1), NEG_INF)
    log_alpha[0, 0] = 0.0
    for t in range(T):
        for u in range(U + 1):
            if t == 0 and u == 0:
                continue
            from_blank = log_alpha[t - 1, u] + lp_blank[t - 1, u] if t > 0 else NEG_INF
            from_label = log_alpha[t, u - 1] + lp_label[t, u - 1] if u > 0 else NEG_INF
            log_alpha[t, u] = logaddexp(from_blank, from_label)
    ll_alpha = log_alpha[T - 1, U] + lp_blank[T - 1, U]

    log_beta = np.full((T, U + 1), NEG_INF)
    log_beta[T - 1, U] = lp_blank[T - 1, U]
    for t in range(T - 1, -1, -1):
        for u in range(U, -1, -1):
            if t == T - 1 and u == U:
                continue
            via_blank = lp_blank[t, u] + log_beta[t + 1, u] if t < T - 1 else NEG_INF
            via_label = lp_label[t, u] + log_beta[t, u + 1] if u < U else NEG_INF
            log_beta[t, u] = logaddexp(via_blank, via_label)

    ll = ll_alpha
    loss = -ll

    # Arc occupancies: posterior probability of traversing each arc.
    occ_blank = np.zeros((T, U + 1))
    if T > 1:
        occ_blank[:-1, :] = np.exp(log_alpha[:-1] + lp_blank[:-1] + log_beta[1:] - ll)
    occ_blank[T - 1, :] = 0.0
    occ_blank[T - 1, U] = np.exp(log_alpha[T - 1, U] + lp_blank[T - 1, U] - ll)
    occ_label = np.zeros((T, U))
    if U > 0:
        occ_label[:, :] = np.exp(log_alpha[:, :U] + lp_label + log_beta[:, 1:] - ll)

    node_occ = occ_blank.copy()
    node_occ[:, :U] += occ_label
    dlogits = node_occ[:, :, None] * np.exp(lp)
    dlogits[:, :, blank] -= occ_blank
    for u, y in enumerate(target):
        dlogits[:, u, y] -= occ_label[:, u]

    lattice = TransducerLattice(T, U, log_alpha, log_beta, lp_blank, lp_label, ll)
    return LossResult(loss, dlogits, lattice)


def sequence_log_prob(logits_grid: np.ndarray, target) -> float:
    """log P(target) marginalized over alignments: -transducer_loss."""
    return -transducer_loss(logits_grid, target).loss
