"""Command-line pipeline: gen-world, train-scdr, train-hcr, align, eval.

Every command takes ``--config`` (flat key-value file), ``--profile``
(desk/paper), repeatable ``--set key=value`` overrides, ``--seed`` and
``--out``.  The default output root comes from ``PREFALIGN_OUT_ROOT`` when
set.  Commands exit 0 on success; failures print a single JSON line to stderr
and exit nonzero.

Stage naming: ``train-scdr`` runs stage 1 (single-dimension rating with the
format/accuracy/consistency rubric), ``train-hcr`` runs stage 2 (pairwise
comparison with the scaffold/block/verdict rubric), ``align`` runs stage 3
(generator alignment from scored pairs).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .align import AlignConfig, OracleScorer, PolicyScorer, align_run, build_preference_pairs, save_pairs, static_biased_weights
from .config import RunConfig, derive_seed, parse_value, resolve_flat, save_config_file
from .errors import InputError, PrefalignError
from .generator import ToyGenerator, dynamic_degree, load_generator, save_generator
from .jsonl import read_jsonl, write_jsonl
from .metrics import PrefRecord, dim_accuracy, preference_accuracy, summarize_run_file, write_curves_csv
from .policy import Runtime, TablePolicy, load_checkpoint, predict_rating, save_checkpoint
from .training import (
    build_pair_instances,
    evaluate_pairs,
    split_by_key,
    train_comparison_stage,
    train_rating_stage,
)
from .world import (
    correlation_matrix,
    factorize,
    generate_corpus,
    load_corpus,
    load_instances,
    motion_static_correlation,
    oracle_preference,
    save_corpus,
    save_instances,
)

STAGE_RATING = 1
STAGE_PAIR = 2
STAGE_ALIGN = 3


def _out_dir(cfg: RunConfig) -> Path:
    root = os.environ.get("PREFALIGN_OUT_ROOT", "")
    path = Path(root) / cfg.out_dir if root else Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise InputError(f"missing {what}: {path}")
    return path


def _load_cfg(args) -> RunConfig:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = parse_value(value)
    flat = resolve_flat(
        profile=args.profile,
        config_file=args.config,
        overrides=overrides,
        seed=args.seed,
        out_dir=args.out,
    )
    return RunConfig.from_flat(flat)


def _split_corpus(cfg: RunConfig, out: Path):
    corpus = load_corpus(_require(out / "corpus.csv", "corpus (run gen-world first)"))
    instances = load_instances(_require(out / "instances.csv", "factorized instances (run gen-world first)"), corpus)
    return corpus, instances


# --- commands ------------------------------------------------------------------------


def cmd_gen_world(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    corpus = generate_corpus(cfg.world, int(cfg.flat["corpus.n_prompts"]), int(cfg.flat["corpus.videos_per_prompt"]))
    instances = factorize(corpus, cfg.world)
    save_corpus(out / "corpus.csv", corpus, cfg.world)
    save_instances(out / "instances.csv", instances)
    save_config_file(out / "config.resolved", cfg.flat)
    corr = motion_static_correlation(corpus, cfg.world)
    print(
        f"gen-world: {len(corpus)} videos, {len(instances)} instances, "
        f"motion-static corr {corr:+.3f} (target {cfg.world.motion_quality_corr:+.2f}) -> {out}"
    )
    return 0


def cmd_train_rating(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    corpus, instances = _split_corpus(cfg, out)
    train, heldout = split_by_key(instances, lambda i: i.video.video_id, float(cfg.flat["heldout_fraction"]), cfg.seed)
    heldout = heldout[: int(cfg.flat["rating.heldout_max"])]
    rt = Runtime(cfg.spec)
    logits = None
    opt_state = None
    start_step = 0
    if args.resume:
        policy, opt_state, meta = load_checkpoint(args.resume)
        logits, start_step = policy.logits, int(meta["step"])
    result = train_rating_stage(
        rt,
        train,
        heldout,
        cfg.rating,
        seed=derive_seed(cfg.seed, STAGE_RATING),
        logits=logits,
        opt_state=opt_state,
        start_step=start_step,
        reward_mode=args.reward_mode,
    )
    save_checkpoint(
        out / "rm_rating.npz",
        TablePolicy(cfg.spec, result.logits),
        optimizer_state=result.opt_state,
        step=cfg.rating.steps,
        config_hash=cfg.hash,
    )
    write_jsonl(out / "rating_metrics.jsonl", result.steps)
    write_jsonl(out / "rating_evals.jsonl", result.evals)
    acc = result.final_eval("accuracy")
    print(f"train-scdr: {cfg.rating.steps} steps, held-out accuracy {acc:.3f} -> {out / 'rm_rating.npz'}")
    return 0


def cmd_train_pair(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    corpus, _ = _split_corpus(cfg, out)
    pairs = build_pair_instances(corpus, cfg.world, cfg.spec)
    train, heldout = split_by_key(pairs, lambda p: p.video_a.prompt_id, float(cfg.flat["heldout_fraction"]), cfg.seed)
    heldout = heldout[: int(cfg.flat["pair.heldout_max"])]
    rt = Runtime(cfg.spec)
    logits = None
    if not args.from_scratch:
        ckpt = Path(args.warm_start) if args.warm_start else out / "rm_rating.npz"
        policy, _, _ = load_checkpoint(_require(ckpt, "stage-1 checkpoint (or pass --from-scratch)"))
        logits = policy.logits
    result = train_comparison_stage(
        rt,
        train,
        heldout,
        cfg.pair,
        seed=derive_seed(cfg.seed, STAGE_PAIR),
        logits=logits,
    )
    save_checkpoint(
        out / "rm_pair.npz",
        TablePolicy(cfg.spec, result.logits),
        optimizer_state=result.opt_state,
        step=cfg.pair.steps,
        config_hash=cfg.hash,
    )
    write_jsonl(out / "pair_metrics.jsonl", result.steps)
    write_jsonl(out / "pair_evals.jsonl", result.evals)
    tau = result.final_eval("tau")
    print(f"train-hcr: {cfg.pair.steps} steps, held-out tau {tau:.3f} -> {out / 'rm_pair.npz'}")
    return 0


def _make_scorer(cfg: RunConfig, out: Path, name: str):
    if name == "oracle":
        return OracleScorer(cfg.world)
    if name == "static":
        return OracleScorer(cfg.world, static_biased_weights(cfg.world, float(cfg.flat["align.static_share"])))
    if name == "rm":
        policy, _, _ = load_checkpoint(_require(out / "rm_rating.npz", "stage-1 checkpoint for the rm scorer"))
        return PolicyScorer(Runtime(cfg.spec), policy.logits, cfg.world, static_biased_weights(cfg.world, float(cfg.flat["align.static_share"])))
    raise InputError(f"unknown scorer {name!r}")


def _run_align_mode(cfg: RunConfig, out: Path, scorer, mode: str):
    align_cfg = AlignConfig(
        mode=mode,
        beta2=cfg.align.beta2,
        learning_rate=cfg.align.learning_rate,
        epochs=cfg.align.epochs,
        batch_size=cfg.align.batch_size,
        n_candidates=cfg.align.n_candidates,
        max_pairs=cfg.align.max_pairs,
    )
    gen = ToyGenerator.pretrained(
        cfg.world,
        embed_dim=int(cfg.flat["align.embed_dim"]),
        noise_scale=float(cfg.flat["align.noise_scale"]),
        embed_seed=derive_seed(cfg.seed, 17),
    )
    prompts = [f"align_p{i:05d}" for i in range(int(cfg.flat["align.n_prompts"]))]
    align_seed = derive_seed(cfg.seed, STAGE_ALIGN)
    save_pairs(out / f"pairs_{mode}.csv", build_preference_pairs(gen, prompts, scorer, align_cfg, align_seed))
    trained, history = align_run(gen, prompts, scorer, align_cfg, seed=align_seed)
    save_generator(out / f"generator_{mode}.npz", trained)
    write_jsonl(out / f"align_{mode}_metrics.jsonl", history)
    return history


def cmd_align(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    scorer = _make_scorer(cfg, out, str(cfg.flat["align.scorer"]))
    modes = ["sft", "dpo", "mcdpo"] if args.compare_modes else [cfg.align.mode]
    summary = {}
    for mode in modes:
        history = _run_align_mode(cfg, out, scorer, mode)
        summary[mode] = {
            "initial_dd": history[0]["dynamic_degree"],
            "final_dd": history[-1]["dynamic_degree"],
            "final_overall": history[-1]["overall_score_mean"],
        }
        print(
            f"align[{mode}]: dynamic degree {summary[mode]['initial_dd']:.4f} -> {summary[mode]['final_dd']:.4f}, "
            f"overall {summary[mode]['final_overall']:.4f}"
        )
    if args.compare_modes:
        lines = ["alignment mode comparison", ""]
        for mode, row in summary.items():
            delta = row["final_dd"] - row["initial_dd"]
            lines.append(
                f"{mode:6s} dynamic_degree {row['initial_dd']:.4f} -> {row['final_dd']:.4f} ({delta:+.4f}), "
                f"overall {row['final_overall']:.4f}"
            )
        (out / "align_comparison.txt").write_text("\n".join(lines) + "\n")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    corpus, instances = _split_corpus(cfg, out)
    lines = ["evaluation report", ""]
    csv_jobs = []

    corr = correlation_matrix(corpus)
    lines.append(f"corpus: {len(corpus)} videos")
    lines.append(f"motion-static correlation: {motion_static_correlation(corpus, cfg.world):+.4f}")

    pairs = build_pair_instances(corpus, cfg.world, cfg.spec)
    _, heldout_pairs = split_by_key(pairs, lambda p: p.video_a.prompt_id, float(cfg.flat["heldout_fraction"]), cfg.seed)
    heldout_pairs = heldout_pairs[: int(cfg.flat["pair.heldout_max"])]
    _, heldout_inst = split_by_key(instances, lambda i: i.video.video_id, float(cfg.flat["heldout_fraction"]), cfg.seed)
    heldout_inst = heldout_inst[: int(cfg.flat["rating.heldout_max"])]

    if args.scorer == "oracle":
        records = [
            PrefRecord(prediction=oracle_preference(p.video_a, p.video_b, cfg.world), label=p.label)
            for p in heldout_pairs
        ]
        lines.append(f"oracle scorer tau: {preference_accuracy(records, 'tau'):.4f}")
        lines.append(f"oracle scorer diff: {preference_accuracy(records, 'diff'):.4f}")

    rm_pair = out / "rm_pair.npz"
    if rm_pair.exists():
        policy, _, _ = load_checkpoint(rm_pair)
        rt = Runtime(policy.spec)
        records = evaluate_pairs(rt, policy.logits, heldout_pairs)
        lines.append(f"reward model tau: {preference_accuracy(records, 'tau'):.4f}")
        lines.append(f"reward model diff: {preference_accuracy(records, 'diff'):.4f}")

    rm_rating = out / "rm_rating.npz"
    if rm_rating.exists():
        policy, _, _ = load_checkpoint(rm_rating)
        rt = Runtime(policy.spec)
        preds = [predict_rating(rt, policy.logits, i.video, i.dim) for i in heldout_inst]
        lines.append(f"held-out dimension accuracy: {dim_accuracy(preds, [i.label for i in heldout_inst]):.4f}")

    for mode in ("sft", "dpo", "mcdpo"):
        gen_path = out / f"generator_{mode}.npz"
        metrics_path = out / f"align_{mode}_metrics.jsonl"
        if gen_path.exists():
            gen = load_generator(gen_path)
            prompts = [f"align_p{i:05d}" for i in range(min(64, int(cfg.flat["align.n_prompts"])))]
            dd = dynamic_degree(gen, prompts, 8, np.random.default_rng(np.random.SeedSequence([cfg.seed, 19])))
            lines.append(f"{mode} generator dynamic degree: {dd:.4f}")
        if metrics_path.exists():
            csv_jobs.append((mode, metrics_path))

    if args.require_rm and not rm_pair.exists():
        raise InputError(f"missing artifact: {rm_pair}")

    for name, path in (("rating", out / "rating_metrics.jsonl"), ("pair", out / "pair_metrics.jsonl")):
        if path.exists():
            rows = read_jsonl(path)
            write_curves_csv(out / f"curves_{name}_reward.csv", rows, ["step", "mean_reward", "loss", "kl", "grad_norm"])
            report = summarize_run_file(path)
            lines.append(f"{name} training: {report.n_rows} steps, mean reward {report.means.get('mean_reward', float('nan')):.4f}")
    for mode, path in csv_jobs:
        rows = read_jsonl(path)
        write_curves_csv(out / f"curves_align_{mode}.csv", rows, ["step", "loss", "w_w_mean", "dynamic_degree", "overall_score_mean"])
        lines.append(
            f"{mode} alignment: dynamic_degree {rows[0]['dynamic_degree']:.4f} -> {rows[-1]['dynamic_degree']:.4f}"
        )

    report_text = "\n".join(lines) + "\n"
    (out / "eval_report.txt").write_text(report_text)
    print(report_text, end="")
    return 0


# --- entry point --------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key-value config file")
    parser.add_argument("--profile", default="desk", help="named preset: desk or paper")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefalign", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--backend", action="store_true", help="print the active kernel backend and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-world", help="generate the synthetic corpus and factorized instances")
    _add_common(p)
    p.set_defaults(fn=cmd_gen_world)

    p = sub.add_parser("train-scdr", help="stage 1: train the rating reward model")
    _add_common(p)
    p.add_argument("--resume", help="resume from a stage-1 checkpoint")
    p.add_argument("--reward-mode", default="full", choices=["full", "accuracy_only"], help="accuracy_only = no-reasoning ablation")
    p.set_defaults(fn=cmd_train_rating)

    p = sub.add_parser("train-hcr", help="stage 2: train the pairwise-comparison reward model")
    _add_common(p)
    p.add_argument("--from-scratch", action="store_true", help="skip the stage-1 warm start (ablation)")
    p.add_argument("--warm-start", help="explicit stage-1 checkpoint path")
    p.set_defaults(fn=cmd_train_pair)

    p = sub.add_parser("align", help="stage 3: align the toy generator")
    _add_common(p)
    p.add_argument("--compare-modes", action="store_true", help="run sft/dpo/mcdpo on the same data and write a comparison report")
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("eval", help="evaluate artifacts and write report + curve CSVs")
    _add_common(p)
    p.add_argument("--scorer", default="oracle", choices=["oracle", "none"], help="include oracle-scorer protocol rows")
    p.add_argument("--require-rm", action="store_true", help="fail if the stage-2 checkpoint is missing")
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend:
        print(kernels.BACKEND_NAME)
        return 0
    if not getattr(args, "fn", None):
        parser.print_help()
        return 2
    try:
        return args.fn(args)
    except PrefalignError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc), "path": getattr(exc, "filename", None)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
