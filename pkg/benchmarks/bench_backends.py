#!/usr/bin/env python3
"""Benchmark the compiled sampling/objective kernels against the pure-Python twin.

Runs the two hot paths (group rollout sampling and the clipped-surrogate
objective with gradients) on both backends, checks they agree bitwise, and
reports the throughput ratio.

    python benchmarks/bench_backends.py [--steps N]
"""

import argparse
import time

import numpy as np

from prefalign.grpo import GRPOConfig, grpo_objective
from prefalign.kernels import get_backend
from prefalign.policy import RolloutGroup, Runtime, sample_pair_responses, sample_rating_response
from prefalign.states import PolicySpec, primed_logits
from prefalign.training import build_pair_instances
from prefalign.world import WorldConfig, generate_corpus


def bench_sampling(rt, logits, pairs, steps):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    tokens = 0
    for step in range(steps):
        pair = pairs[step % len(pairs)]
        for _ in range(8):
            ep = sample_rating_response(rt, logits, step % 5, step % 10, rng)
            tokens += len(ep.tokens)
            ep_a, ep_b = sample_pair_responses(rt, logits, pair.buckets_a, pair.buckets_b, rng)
            tokens += len(ep_a.tokens) + len(ep_b.tokens)
    return time.perf_counter() - start, tokens


def bench_objective(rt, logits, pairs, steps):
    rng = np.random.default_rng(1)
    cfg = GRPOConfig()
    # one fixed batch, evaluated repeatedly
    groups = []
    for g in range(4):
        pair = pairs[g]
        episodes = []
        for _ in range(8):
            ep_a, ep_b = sample_pair_responses(rt, logits, pair.buckets_a, pair.buckets_b, rng)
            from prefalign.policy import concat_episodes

            ep = concat_episodes(ep_a, ep_b)
            ep.reward = float(rng.integers(0, 4))
            episodes.append(ep)
        groups.append(RolloutGroup(episodes))
    start = time.perf_counter()
    loss = None
    for _ in range(steps):
        loss, grad, _ = grpo_objective(logits, logits, groups, cfg, backend=rt.backend)
    return time.perf_counter() - start, loss


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=200, help="benchmark iterations per path")
    args = parser.parse_args()

    spec = PolicySpec()
    world = WorldConfig(seed=1)
    corpus = generate_corpus(world, 50, 4)
    pairs = build_pair_instances(corpus, world, spec)
    logits = primed_logits(spec) + 0.3 * np.random.default_rng(2).standard_normal((spec.n_states, spec.vocab.size))

    backends = {"pure-python": get_backend("pure")}
    try:
        backends["compiled"] = get_backend("compiled")
    except ImportError:
        print("compiled extension not available; benchmarking the fallback only")

    results = {}
    for name, impl in backends.items():
        rt = Runtime(spec, backend=impl)
        t_sample, tokens = bench_sampling(rt, logits, pairs, args.steps)
        t_obj, loss = bench_objective(rt, logits, pairs, args.steps)
        results[name] = (t_sample, tokens, t_obj, loss)
        print(
            f"{name:12s} sampling: {t_sample:7.3f}s ({tokens / t_sample / 1e3:8.1f}k tokens/s)   "
            f"objective: {t_obj:7.3f}s ({args.steps / t_obj:6.1f} batches/s)"
        )

    if len(results) == 2:
        p, c = results["pure-python"], results["compiled"]
        assert p[3] == c[3], "backends disagree on the objective value"
        print(f"\nspeedup: sampling {p[0] / c[0]:.1f}x, objective {p[2] / c[2]:.1f}x (losses bit-identical)")


if __name__ == "__main__":
    main()
