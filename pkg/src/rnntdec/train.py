"""Toy-scale training: SGD with momentum on the transducer loss, plus the
EMBR fine-tuning phase that follows it.

Everything is single-threaded and deterministic given the hyperparameter
seed.  Per-epoch metrics can be appended to a JSON-lines log.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .backprop import backprop_decoder, forward_grid, zero_grads
from .config import DecoderConfig
from .decoding import greedy_decode
from .embr import dataset_risk, edit_distance, embr_batch_grads
from .errors import ConfigError, DivergenceError, DomainError
from .lattice import transducer_loss
from .rng import SeededRng
from .toy import ToyTaskSpec, Utterance, encode_backward, make_toy_dataset, toy_encode
from .weights import ModelWeights, init_encoder_stub, init_weights, trainable_tensors


@dataclass
class Hyperparams:
    lr: float = 0.1
    momentum: float = 0.9
    batch_size: int = 4
    epochs: int = 15
    seed: int = 0
    grad_clip: float = 1.0  # global grad-norm ceiling; 0 disables

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


class SgdMomentum:
    """v <- momentum * v - lr * g;  w <- w + v.  In-place on the tensors.

    ``grad_clip`` rescales the whole gradient when its global L2 norm
    exceeds the ceiling; the LayerNorm pathways of the reduced decoder spike
    hard during the blank-dominance escape and a single global learning rate
    cannot absorb that unclipped.
    """

    def __init__(self, lr: float, momentum: float, grad_clip: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.grad_clip = grad_clip
        self._velocity: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        scale = 1.0
        if self.grad_clip > 0.0:
            total = np.sqrt(sum(float((grads[n] ** 2).sum()) for n in tensors))
            if total > self.grad_clip:
                scale = self.grad_clip / total
        for name, w in tensors.items():
            g = grads[name]
            v = self._velocity.get(name)
            if v is None:
                v = np.zeros_like(w)
                self._velocity[name] = v
            v *= self.momentum
            v -= (self.lr * scale) * g
            w += v


def utterance_loss_grads(utt: Utterance, weights: ModelWeights, config: DecoderConfig):
    """Transducer loss and gradients for one utterance (features or frames)."""
    if weights.enc_stub is not None:
        frames = toy_encode(utt.features, weights.enc_stub)
    else:
        frames = utt.features
    logits, cache = forward_grid(frames, utt.labels, weights, config)
    result = transducer_loss(logits, utt.labels)
    grads, dframes = backprop_decoder(result.dlogits, cache, weights, config)
    if weights.enc_stub is not None:
        encode_backward(utt.features, dframes, grads)
    return result.loss, grads


def token_error_rate(
    utts: list[Utterance], weights: ModelWeights, config: DecoderConfig
) -> float:
    """Greedy-decode edit distance over reference length, summed over utts."""
    errors = total = 0
    for utt in utts:
        if weights.enc_stub is not None:
            frames = toy_encode(utt.features, weights.enc_stub)
        else:
            frames = utt.features
        hyp = greedy_decode(frames, weights, config).labels
        errors += edit_distance(hyp, utt.labels)
        total += len(utt.labels)
    return errors / total if total else 0.0


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    dev_token_error_rate: float
    wall_s: float

    def to_json_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "dev_token_error_rate": self.dev_token_error_rate,
            "wall_s": self.wall_s,
        }


@dataclass
class TrainResult:
    weights: ModelWeights
    metrics: list[EpochMetrics]
    train_steps: int
    train_set: list[Utterance] = field(repr=False, default_factory=list)
    dev_set: list[Utterance] = field(repr=False, default_factory=list)


def _mean_batch_grads(batch, weights, config):
    grads = zero_grads(weights)
    loss_sum = 0.0
    for utt in batch:
        loss, utt_grads = utterance_loss_grads(utt, weights, config)
        loss_sum += loss
        for name, g in utt_grads.items():
            grads[name] += g
    for g in grads.values():
        g /= len(batch)
    return loss_sum / len(batch), grads


def train(
    config: DecoderConfig,
    task: ToyTaskSpec,
    hp: Hyperparams,
    metrics_path: str | None = None,
) -> TrainResult:
    """Train a fresh decoder (plus encoder stub) on the toy task.

    Raises DivergenceError as soon as a batch loss goes non-finite.
    """
    if config.vocab_size != task.vocab_size:
        raise ConfigError(
            f"decoder vocab_size {config.vocab_size} != task vocab_size {task.vocab_size}"
        )
    rng = SeededRng(hp.seed)
    train_set, dev_set = make_toy_dataset(task, seed=rng.derive(1).seed)
    weights = init_weights(config, seed=rng.derive(2).seed)
    weights.enc_stub = init_encoder_stub(task.feature_dim, config.d_enc, rng.derive(3).seed)
    shuffle_rng = rng.derive(4)

    optimizer = SgdMomentum(hp.lr, hp.momentum, hp.grad_clip)
    tensors = trainable_tensors(weights)
    metrics: list[EpochMetrics] = []
    steps = 0
    for epoch in range(hp.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), hp.batch_size):
            batch = [train_set[int(i)] for i in order[start : start + hp.batch_size]]
            try:
                loss, grads = _mean_batch_grads(batch, weights, config)
            except DomainError as e:
                raise DivergenceError(
                    f"diverged (non-finite forward) at epoch {epoch}, step {steps}: {e}"
                ) from e
            if not np.isfinite(loss) or loss > 1e12:
                raise DivergenceError(
                    f"diverged (loss={loss:.3e}) at epoch {epoch}, step {steps} (lr={hp.lr})"
                )
            optimizer.step(tensors, grads)
            losses.append(loss)
            steps += 1
        entry = EpochMetrics(
            epoch=epoch,
            loss=float(np.mean(losses)) if losses else 0.0,
            dev_token_error_rate=token_error_rate(dev_set, weights, config),
            wall_s=time.perf_counter() - t0,
        )
        metrics.append(entry)
        if metrics_path:
            with open(metrics_path, "a") as fh:
                fh.write(json.dumps(entry.to_json_dict(), sort_keys=True) + "\n")
    return TrainResult(weights, metrics, steps, train_set, dev_set)


@dataclass
class EmbrParams:
    beam_width: int = 4
    steps: int = 0  # 0 means: pick steps as main_steps // 10
    lr: float = 0.02
    momentum: float = 0.9
    batch_size: int = 4
    seed: int = 0
    add_reference: bool = False
    posterior_scale: float = 1.0
    grad_clip: float = 1.0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "EmbrParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown embr config keys: {sorted(unknown)}")
        return cls(**d)


def embr_step(
    batch: list[Utterance],
    weights: ModelWeights,
    config: DecoderConfig,
    beam_width: int,
    optimizer: SgdMomentum,
    posterior_scale: float = 1.0,
    add_reference: bool = False,
):
    """One minimum-risk update on a batch; returns the batch stats."""
    grads, stats = embr_batch_grads(
        batch, weights, config, beam_width,
        posterior_scale=posterior_scale, add_reference=add_reference,
    )
    if stats.used:
        optimizer.step(trainable_tensors(weights), grads)
    return stats


@dataclass
class EmbrPhaseResult:
    weights: ModelWeights
    step_risks: list[float]
    skipped: int
    steps: int


def embr_phase(
    weights: ModelWeights,
    config: DecoderConfig,
    train_set: list[Utterance],
    params: EmbrParams,
    main_train_steps: int | None = None,
) -> EmbrPhaseResult:
    """Risk fine-tuning after regular training.

    Runs for ``params.steps`` updates, defaulting to one tenth of the main
    training step count.  Batches are drawn by deterministic shuffling.
    """
    steps = params.steps
    if steps <= 0:
        if main_train_steps is None:
            raise ConfigError("embr steps not set and main step count unknown")
        steps = max(1, main_train_steps // 10)
    rng = SeededRng(params.seed).derive(0xE3B)
    optimizer = SgdMomentum(params.lr, params.momentum, params.grad_clip)
    step_risks: list[float] = []
    skipped = 0
    order: list[int] = []
    for _ in range(steps):
        if len(order) < params.batch_size:
            order.extend(int(i) for i in rng.permutation(len(train_set)))
        batch = [train_set[i] for i in order[: params.batch_size]]
        del order[: params.batch_size]
        stats = embr_step(
            batch, weights, config, params.beam_width, optimizer,
            posterior_scale=params.posterior_scale,
            add_reference=params.add_reference,
        )
        step_risks.append(stats.mean_risk)
        skipped += stats.skipped
    return EmbrPhaseResult(weights, step_risks, skipped, steps)


def dev_risk(
    dev_set: list[Utterance],
    weights: ModelWeights,
    config: DecoderConfig,
    params: EmbrParams,
) -> float:
    return dataset_risk(dev_set, weights, config, params.beam_width, params.posterior_scale)
