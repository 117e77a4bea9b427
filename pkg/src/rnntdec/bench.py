"""Wall-clock benchmarking of single decoder steps.

One step is one prediction-network forward plus one joint forward, the work
a decoder does per emitted symbol.  Inputs (frames, history states) are
generated ahead of time; the timed region contains only the step function.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import DecoderConfig
from .errors import ConfigError
from .nets import PredictionState, joint_forward, prediction_forward
from .rng import SeededRng
from .weights import ModelWeights, step_flops


@dataclass
class TimingStats:
    mean_ms: float
    std_ms: float
    times_ms: np.ndarray


def step_timer(step_fn, runs: int, warmup: int | None = None) -> TimingStats:
    """Time ``runs`` calls of ``step_fn`` after ``warmup`` unrecorded calls.

    ``warmup`` defaults to 10% of ``runs``.  Reports mean and population
    standard deviation in milliseconds.
    """
    if runs < 1:
        raise ConfigError(f"benchmark needs runs >= 1, got {runs}")
    if warmup is None:
        warmup = runs // 10
    for _ in range(warmup):
        step_fn()
    times = np.empty(runs, dtype=np.float64)
    clock = time.perf_counter
    for i in range(runs):
        t0 = clock()
        step_fn()
        times[i] = clock() - t0
    times *= 1e3
    return TimingStats(float(times.mean()), float(times.std()), times)


def make_step_fn(
    weights: ModelWeights,
    config: DecoderConfig,
    seed: int = 0,
    pool_size: int = 16,
):
    """Closure running one decode step on pre-generated frames/states.

    Cycles through ``pool_size`` random (frame, populated-history) pairs so
    repeated calls do not hit one identical cached input.
    """
    rng = SeededRng(seed).derive(0xBE7C)
    frames = [
        rng.normal(config.d_enc, dtype=weights.dtype) for _ in range(pool_size)
    ]
    states = []
    for _ in range(pool_size):
        labels = rng.integers(config.history_len, 0, config.vocab_size)
        states.append(PredictionState.from_labels([int(x) for x in labels], config))
    idx = 0  # rotating index, plain int for speed

    def step():
        nonlocal idx
        i = idx
        idx = (i + 1) % pool_size
        g = prediction_forward(states[i], weights, config)
        return joint_forward(frames[i], g, weights, config)

    return step


@dataclass
class BenchRecord:
    core_label: str
    decoder_name: str
    runs: int
    mean_ms: float
    std_ms: float

    def to_json_dict(self) -> dict:
        return {
            "core_label": self.core_label,
            "decoder_name": self.decoder_name,
            "runs": self.runs,
            "mean_ms": self.mean_ms,
            "std_ms": self.std_ms,
        }


def cpu_label() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    import platform

    return platform.processor() or platform.machine() or "unknown-cpu"


def bench_decoder(
    name: str,
    weights: ModelWeights,
    config: DecoderConfig,
    runs: int,
    warmup: int | None = None,
    seed: int = 0,
) -> BenchRecord:
    stats = step_timer(make_step_fn(weights, config, seed=seed), runs, warmup)
    return BenchRecord(cpu_label(), name, runs, stats.mean_ms, stats.std_ms)


def flops_ratio(config_a: DecoderConfig, config_b: DecoderConfig) -> float:
    """Analytic per-step FLOP ratio b/a."""
    return step_flops(config_b) / step_flops(config_a)
