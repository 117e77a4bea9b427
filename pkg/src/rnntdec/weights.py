"""Model weight storage, initialization, and parameter/FLOP accounting.

Tying is implemented as real aliasing: in a tied model ``out_w`` is a numpy
view of the non-pad rows of the embedding matrix, so there is a single
storage location and mutating either view mutates the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import CONCAT_2EMB, LSTM, REDUCED, DecoderConfig
from .errors import ConfigError, ValidationError
from .rng import SeededRng


@dataclass
class LstmLayer:
    """One LSTM-with-projection layer; gates packed [i, f, g, o]."""

    w_x: np.ndarray  # (in_dim, 4*units)
    w_h: np.ndarray  # (proj, 4*units)
    bias: np.ndarray  # (4*units,)
    w_p: np.ndarray  # (units, proj)


@dataclass
class EncoderStub:
    """Per-frame affine feature map standing in for a real encoder."""

    w: np.ndarray  # (d_feat, d_enc)
    b: np.ndarray  # (d_enc,)


@dataclass
class ModelWeights:
    """All decoder tensors for one DecoderConfig.

    ``emb`` has ``vocab_size + 1`` rows; the last row is the start-pad
    embedding, fixed at zero and never trained.  ``out_w`` holds one output
    row per non-blank token; the blank output row is always ``blank_w``.
    """

    config: DecoderConfig
    emb: np.ndarray  # (V+1, d_e)
    enc_w: np.ndarray  # (d_enc, d_h)
    pred_w: np.ndarray  # (pn_out_dim, d_h)
    joint_b: np.ndarray  # (d_h,)
    out_w: np.ndarray  # (V, d_h); view of emb[:V] when tied
    blank_w: np.ndarray  # (d_h,)
    out_b: np.ndarray  # (V+1,)
    positions: np.ndarray | None = None  # (H, N, d_e), reduced only
    proj_w: np.ndarray | None = None  # (d_e, d_e), reduced only
    proj_b: np.ndarray | None = None
    ln_gamma: np.ndarray | None = None
    ln_beta: np.ndarray | None = None
    lstm: list[LstmLayer] = field(default_factory=list)
    enc_stub: EncoderStub | None = None

    @property
    def dtype(self):
        return self.emb.dtype

    def validate(self) -> None:
        """Check structural invariants; raises ValidationError."""
        cfg = self.config
        if self.emb.shape != (cfg.vocab_ext, cfg.d_e):
            raise ValidationError(f"embedding shape {self.emb.shape} != {(cfg.vocab_ext, cfg.d_e)}")
        if np.any(self.emb[cfg.pad_id] != 0.0):
            raise ValidationError("start-pad embedding row must be all zeros")
        if cfg.tied:
            if self.out_w.base is None or not np.shares_memory(self.out_w, self.emb):
                raise ValidationError("tied model must alias out_w to the embedding rows")
        elif self.out_w.shape != (cfg.vocab_size, cfg.d_h):
            raise ValidationError(f"out_w shape {self.out_w.shape} != {(cfg.vocab_size, cfg.d_h)}")
        for name in ("emb", "enc_w", "pred_w", "joint_b", "out_w", "blank_w", "out_b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"non-finite entries in {name}")

    def tie_output(self) -> None:
        """(Re)install the output alias; no-op for untied models."""
        if self.config.tied:
            self.out_w = self.emb[: self.config.vocab_size]


def _lstm_in_dim(config: DecoderConfig, layer: int) -> int:
    return config.d_e if layer == 0 else config.lstm_proj


def init_weights(config: DecoderConfig, seed: int, dtype=np.float64) -> ModelWeights:
    """Deterministic Gaussian init: std 1/sqrt(fan_in) per tensor.

    Position vectors are drawn once and stay fixed unless
    ``config.position_trainable`` is set.  The pad embedding row is zeroed.
    """
    rng = SeededRng(seed)

    def gauss(shape, fan_in):
        return rng.normal(shape, std=1.0 / np.sqrt(fan_in), dtype=dtype)

    def zeros(shape):
        return np.zeros(shape, dtype=dtype)

    cfg = config
    emb = gauss((cfg.vocab_ext, cfg.d_e), cfg.d_e)
    emb[cfg.pad_id] = 0.0

    positions = proj_w = proj_b = ln_gamma = ln_beta = None
    lstm: list[LstmLayer] = []
    if cfg.variant == REDUCED:
        positions = gauss((cfg.num_heads, cfg.history_len, cfg.d_e), cfg.d_e)
        proj_w = gauss((cfg.d_e, cfg.d_e), cfg.d_e)
        proj_b = zeros(cfg.d_e)
        ln_gamma = np.ones(cfg.d_e, dtype=dtype)
        ln_beta = zeros(cfg.d_e)
    elif cfg.variant == LSTM:
        for layer in range(cfg.lstm_layers):
            in_dim = _lstm_in_dim(cfg, layer)
            lstm.append(
                LstmLayer(
                    w_x=gauss((in_dim, 4 * cfg.lstm_units), in_dim),
                    w_h=gauss((cfg.lstm_proj, 4 * cfg.lstm_units), cfg.lstm_proj),
                    bias=zeros(4 * cfg.lstm_units),
                    w_p=gauss((cfg.lstm_units, cfg.lstm_proj), cfg.lstm_units),
                )
            )

    enc_w = gauss((cfg.d_enc, cfg.d_h), cfg.d_enc)
    pred_w = gauss((cfg.pn_out_dim, cfg.d_h), cfg.pn_out_dim)
    joint_b = zeros(cfg.d_h)
    blank_w = gauss(cfg.d_h, cfg.d_h)
    out_b = zeros(cfg.vocab_ext)
    if cfg.tied:
        out_w = emb[: cfg.vocab_size]
    else:
        out_w = gauss((cfg.vocab_size, cfg.d_h), cfg.d_h)

    return ModelWeights(
        config=cfg, emb=emb, enc_w=enc_w, pred_w=pred_w, joint_b=joint_b,
        out_w=out_w, blank_w=blank_w, out_b=out_b, positions=positions,
        proj_w=proj_w, proj_b=proj_b, ln_gamma=ln_gamma, ln_beta=ln_beta,
        lstm=lstm,
    )


def init_encoder_stub(d_feat: int, d_enc: int, seed: int, dtype=np.float64) -> EncoderStub:
    rng = SeededRng(seed).derive(0xE7C)
    w = rng.normal((d_feat, d_enc), std=1.0 / np.sqrt(d_feat), dtype=dtype)
    return EncoderStub(w=w, b=np.zeros(d_enc, dtype=dtype))


def param_count(config: DecoderConfig) -> dict[str, int]:
    """Exact per-tensor parameter counts plus ``total``.

    The start-pad embedding row is excluded (it is not a trainable
    parameter).  In tied mode the non-blank output rows cost nothing extra,
    which is exactly ``d_h * vocab_size`` fewer parameters than untied.
    """
    cfg = config
    counts: dict[str, int] = {"embedding": cfg.vocab_size * cfg.d_e}
    if cfg.variant == REDUCED:
        counts["positions"] = cfg.num_heads * cfg.history_len * cfg.d_e
        counts["proj_w"] = cfg.d_e * cfg.d_e
        counts["proj_b"] = cfg.d_e
        counts["ln_gamma"] = cfg.d_e
        counts["ln_beta"] = cfg.d_e
    elif cfg.variant == LSTM:
        for layer in range(cfg.lstm_layers):
            in_dim = _lstm_in_dim(cfg, layer)
            counts[f"lstm{layer}_w_x"] = in_dim * 4 * cfg.lstm_units
            counts[f"lstm{layer}_w_h"] = cfg.lstm_proj * 4 * cfg.lstm_units
            counts[f"lstm{layer}_bias"] = 4 * cfg.lstm_units
            counts[f"lstm{layer}_w_p"] = cfg.lstm_units * cfg.lstm_proj
    counts["enc_w"] = cfg.d_enc * cfg.d_h
    counts["pred_w"] = cfg.pn_out_dim * cfg.d_h
    counts["joint_b"] = cfg.d_h
    counts["out_w"] = 0 if cfg.tied else cfg.vocab_size * cfg.d_h
    counts["blank_w"] = cfg.d_h
    counts["out_b"] = cfg.vocab_ext
    counts["total"] = sum(counts.values())
    return counts


def tied_savings(config: DecoderConfig) -> int:
    """Parameters saved by tying: d_h * vocab_size."""
    return config.d_h * config.vocab_size


def step_flops(config: DecoderConfig) -> int:
    """Analytic FLOPs for one decode step (prediction + joint forward).

    Convention: a dot product of length n costs 2n (multiply + add);
    scalar nonlinearities cost 4 each.  Embedding lookups are free.
    """
    cfg = config
    act = 4
    flops = 0
    if cfg.variant == REDUCED:
        flops += 2 * cfg.num_heads * cfg.history_len * cfg.d_e  # attention weights
        flops += 2 * cfg.history_len * cfg.d_e  # weighted average
        flops += 2 * cfg.d_e * cfg.d_e + cfg.d_e  # projection + bias
        flops += 8 * cfg.d_e  # layer norm
        flops += act * cfg.d_e  # swish
    elif cfg.variant == CONCAT_2EMB:
        flops += 0  # concat of two lookups
    elif cfg.variant == LSTM:
        for layer in range(cfg.lstm_layers):
            in_dim = _lstm_in_dim(cfg, layer)
            per_step = (
                2 * (in_dim + cfg.lstm_proj) * 4 * cfg.lstm_units
                + 4 * cfg.lstm_units  # bias add
                + act * 6 * cfg.lstm_units  # gate activations + state blend
                + 2 * cfg.lstm_units * cfg.lstm_proj
            )
            flops += per_step * cfg.history_len
    flops += 2 * cfg.d_enc * cfg.d_h  # encoder projection
    flops += 2 * cfg.pn_out_dim * cfg.d_h  # prediction projection
    flops += cfg.d_h + act * cfg.d_h  # joint bias + tanh
    flops += 2 * cfg.d_h * cfg.num_logits + cfg.num_logits  # output rows + bias
    return flops


def trainable_tensors(weights: ModelWeights) -> dict[str, np.ndarray]:
    """Name -> array for every trainable tensor, in a fixed order.

    Tied models expose no separate ``out_w`` entry (its storage is ``emb``);
    frozen position vectors are excluded unless ``position_trainable``.
    The pad embedding row is included in ``emb`` but its gradient is always
    zero, so updates never move it.
    """
    cfg = weights.config
    out: dict[str, np.ndarray] = {"emb": weights.emb}
    if cfg.variant == REDUCED:
        if cfg.position_trainable:
            out["positions"] = weights.positions
        out["proj_w"] = weights.proj_w
        out["proj_b"] = weights.proj_b
        out["ln_gamma"] = weights.ln_gamma
        out["ln_beta"] = weights.ln_beta
    elif cfg.variant == LSTM:
        for i, layer in enumerate(weights.lstm):
            out[f"lstm{i}_w_x"] = layer.w_x
            out[f"lstm{i}_w_h"] = layer.w_h
            out[f"lstm{i}_bias"] = layer.bias
            out[f"lstm{i}_w_p"] = layer.w_p
    out["enc_w"] = weights.enc_w
    out["pred_w"] = weights.pred_w
    out["joint_b"] = weights.joint_b
    if not cfg.tied:
        out["out_w"] = weights.out_w
    out["blank_w"] = weights.blank_w
    out["out_b"] = weights.out_b
    if weights.enc_stub is not None:
        out["enc_stub_w"] = weights.enc_stub.w
        out["enc_stub_b"] = weights.enc_stub.b
    return out


def clone_weights(weights: ModelWeights) -> ModelWeights:
    """Deep copy preserving the tying alias."""
    cfg = weights.config
    w = ModelWeights(
        config=cfg,
        emb=weights.emb.copy(),
        enc_w=weights.enc_w.copy(),
        pred_w=weights.pred_w.copy(),
        joint_b=weights.joint_b.copy(),
        out_w=weights.out_w.copy(),
        blank_w=weights.blank_w.copy(),
        out_b=weights.out_b.copy(),
        positions=None if weights.positions is None else weights.positions.copy(),
        proj_w=None if weights.proj_w is None else weights.proj_w.copy(),
        proj_b=None if weights.proj_b is None else weights.proj_b.copy(),
        ln_gamma=None if weights.ln_gamma is None else weights.ln_gamma.copy(),
        ln_beta=None if weights.ln_beta is None else weights.ln_beta.copy(),
        lstm=[
            LstmLayer(l.w_x.copy(), l.w_h.copy(), l.bias.copy(), l.w_p.copy())
            for l in weights.lstm
        ],
        enc_stub=None
        if weights.enc_stub is None
        else EncoderStub(weights.enc_stub.w.copy(), weights.enc_stub.b.copy()),
    )
    w.tie_output()
    return w


def check_variant(weights: ModelWeights, config: DecoderConfig) -> None:
    """Raise ConfigError when weights and config disagree on the variant."""
    if weights.config.variant != config.variant:
        raise ConfigError(
            f"weights built for variant {weights.config.variant!r}, "
            f"config asks for {config.variant!r}"
        )
    if config.variant == REDUCED and weights.positions is None:
        raise ConfigError("reduced decoder weights are missing position vectors")
    if config.variant == LSTM and not weights.lstm:
        raise ConfigError("lstm decoder weights are missing recurrent layers")
