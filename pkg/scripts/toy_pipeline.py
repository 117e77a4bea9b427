#!/usr/bin/env python3
"""End-to-end toy experiment: train the small tied decoder, inspect a few
dev decodes, run the risk fine-tuning phase, and report before/after risk."""

import argparse

from rnntdec import DecoderConfig, ToyTaskSpec, greedy_decode
from rnntdec.toy import toy_encode
from rnntdec.train import EmbrParams, Hyperparams, dev_risk, embr_phase, train

DECODER = DecoderConfig(
    variant="reduced", vocab_size=5, d_e=32, d_h=32, d_enc=32,
    history_len=2, num_heads=4, tied=True, max_symbols_per_frame=6,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=15)
    args = ap.parse_args()

    task = ToyTaskSpec()
    hp = Hyperparams(seed=args.seed, epochs=args.epochs)
    print(f"training {DECODER.variant} (tied={DECODER.tied}) for {hp.epochs} epochs...")
    result = train(DECODER, task, hp)
    for m in result.metrics[:: max(1, len(result.metrics) // 6)]:
        print(f"  epoch {m.epoch:>3}: loss {m.loss:7.4f}  dev TER {m.dev_token_error_rate:.4f}")
    print(f"final dev TER: {result.metrics[-1].dev_token_error_rate:.4f}")

    print("\nsample dev decodes:")
    for utt in result.dev_set[:5]:
        frames = toy_encode(utt.features, result.weights.enc_stub)
        hyp = greedy_decode(frames, result.weights, DECODER)
        print(f"  ref {utt.labels}  hyp {hyp.labels}  log_prob {hyp.log_prob:.3f}")

    params = EmbrParams(seed=args.seed)
    before = dev_risk(result.dev_set, result.weights, DECODER, params)
    phase = embr_phase(
        result.weights, DECODER, result.train_set, params,
        main_train_steps=result.train_steps,
    )
    after = dev_risk(result.dev_set, phase.weights, DECODER, params)
    print(f"\nrisk fine-tuning: {phase.steps} steps "
          f"(one tenth of {result.train_steps} training steps)")
    print(f"dev expected edit distance: {before:.6f} -> {after:.6f}")


if __name__ == "__main__":
    main()
