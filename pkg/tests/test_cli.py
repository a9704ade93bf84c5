import json
import os

import pytest

from prefalign.cli import main
from prefalign.config import DESK_DEFAULTS, RunConfig, config_hash, load_config_file, resolve_flat, save_config_file
from prefalign.errors import ConfigurationError
from prefalign.jsonl import canonical_lines, read_jsonl

# small world so CLI runs stay fast
FAST = [
    "--set", "corpus.n_prompts=40",
    "--set", "rating.steps=40",
    "--set", "rating.eval_every=20",
    "--set", "rating.heldout_max=30",
    "--set", "pair.steps=40",
    "--set", "pair.eval_every=20",
    "--set", "pair.heldout_max=20",
    "--set", "align.n_prompts=20",
    "--set", "align.epochs=2",
]


def run(argv, capsys=None):
    code = main(argv)
    return code


@pytest.fixture()
def out_dir(tmp_path):
    return str(tmp_path / "run")


# --- config machinery ------------------------------------------------------------------


def test_resolve_flat_profiles_and_overrides():
    flat = resolve_flat(profile="desk")
    assert flat == {**DESK_DEFAULTS}
    paper = resolve_flat(profile="paper")
    assert paper["align.beta2"] == 2500.0
    assert paper["rating.learning_rate"] == 1e-6
    custom = resolve_flat(overrides={"align.beta2": 7.5}, seed=3, out_dir="x")
    assert custom["align.beta2"] == 7.5 and custom["seed"] == 3 and custom["out_dir"] == "x"
    with pytest.raises(ConfigurationError):
        resolve_flat(profile="galaxy")
    with pytest.raises(ConfigurationError):
        resolve_flat(overrides={"nonsense.key": 1})


def test_config_file_roundtrip(tmp_path):
    flat = resolve_flat(seed=9)
    path = tmp_path / "cfg.txt"
    save_config_file(path, flat)
    loaded = load_config_file(path)
    assert loaded == flat
    assert config_hash(loaded) == config_hash(flat)


def test_config_file_syntax_error(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("this is not a config\n")
    with pytest.raises(ConfigurationError):
        load_config_file(path)


def test_run_config_builds_components():
    cfg = RunConfig.from_flat(resolve_flat(seed=5))
    assert cfg.world.seed == 5
    assert cfg.spec.n_dims == cfg.world.n_dims
    assert cfg.rating.group_size == 8
    assert cfg.align.mode == "mcdpo"
    assert len(cfg.hash) == 16


# --- commands ----------------------------------------------------------------------------


def test_backend_flag(capsys):
    assert main(["--backend"]) == 0
    assert capsys.readouterr().out.strip() in ("compiled", "pure-python")


def test_gen_world_outputs_and_reproducibility(out_dir):
    argv = ["gen-world", "--seed", "3", "--out", out_dir] + FAST
    assert run(argv) == 0
    corpus = open(os.path.join(out_dir, "corpus.csv")).read()
    instances = open(os.path.join(out_dir, "instances.csv")).read()
    assert len(corpus.splitlines()) == 1 + 40 * 4
    assert len(instances.splitlines()) == 1 + 40 * 4 * 5
    assert run(argv) == 0
    assert open(os.path.join(out_dir, "corpus.csv")).read() == corpus  # byte-identical rerun
    assert open(os.path.join(out_dir, "instances.csv")).read() == instances


def test_train_rating_requires_corpus(out_dir, capsys):
    assert run(["train-scdr", "--seed", "3", "--out", out_dir] + FAST) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert "missing" in err["message"]


def test_pipeline_end_to_end_small(out_dir, capsys):
    seed = ["--seed", "3", "--out", out_dir]
    assert run(["gen-world"] + seed + FAST) == 0
    assert run(["train-scdr"] + seed + FAST) == 0
    assert os.path.exists(os.path.join(out_dir, "rm_rating.npz"))
    metrics = read_jsonl(os.path.join(out_dir, "rating_metrics.jsonl"))
    assert len(metrics) == 40
    assert {"step", "mean_reward", "loss", "kl", "grad_norm", "ts"} <= set(metrics[0])

    assert run(["train-hcr"] + seed + FAST) == 0
    assert os.path.exists(os.path.join(out_dir, "rm_pair.npz"))
    evals = read_jsonl(os.path.join(out_dir, "pair_evals.jsonl"))
    assert evals[0]["step"] == 0

    assert run(["align"] + seed + FAST) == 0
    assert os.path.exists(os.path.join(out_dir, "generator_mcdpo.npz"))
    align_metrics = read_jsonl(os.path.join(out_dir, "align_mcdpo_metrics.jsonl"))
    assert {"step", "loss", "w_w_mean", "dynamic_degree", "overall_score_mean", "ts"} <= set(align_metrics[0])
    pairs_csv = open(os.path.join(out_dir, "pairs_mcdpo.csv")).read().splitlines()
    assert pairs_csv[0] == "prompt_id,video_id_w,video_id_l,s_w,s_l,s_w_om,s_l_om,s_w_cm,s_l_cm"
    assert len(pairs_csv) > 1

    assert run(["eval"] + seed + FAST) == 0
    capsys.readouterr()
    report = open(os.path.join(out_dir, "eval_report.txt")).read()
    assert "oracle scorer tau: 1.0000" in report
    assert "reward model tau" in report
    assert "held-out dimension accuracy" in report
    assert os.path.exists(os.path.join(out_dir, "curves_rating_reward.csv"))
    assert os.path.exists(os.path.join(out_dir, "curves_align_mcdpo.csv"))
    # one CSV row per metric event
    for csv_name, jsonl_name in (
        ("curves_rating_reward.csv", "rating_metrics.jsonl"),
        ("curves_align_mcdpo.csv", "align_mcdpo_metrics.jsonl"),
    ):
        n_csv = len(open(os.path.join(out_dir, csv_name)).read().splitlines()) - 1
        n_jsonl = len(read_jsonl(os.path.join(out_dir, jsonl_name)))
        assert n_csv == n_jsonl

    # --require-rm errors only when the stage-2 checkpoint is absent
    assert run(["eval", "--require-rm"] + seed + FAST) == 0


def test_train_hcr_missing_checkpoint_and_from_scratch(out_dir, capsys):
    seed = ["--seed", "4", "--out", out_dir]
    assert run(["gen-world"] + seed + FAST) == 0
    assert run(["train-hcr"] + seed + FAST) == 2
    capsys.readouterr()
    assert run(["eval", "--require-rm"] + seed + FAST) == 2
    capsys.readouterr()
    assert run(["train-hcr", "--from-scratch"] + seed + FAST) == 0


def test_metrics_reproducible_modulo_timestamps(out_dir, tmp_path):
    seed = ["--seed", "5"]
    other = str(tmp_path / "other")
    for target in (out_dir, other):
        assert run(["gen-world", "--out", target] + seed + FAST) == 0
        assert run(["train-scdr", "--out", target] + seed + FAST) == 0
    a = canonical_lines(os.path.join(out_dir, "rating_metrics.jsonl"))
    b = canonical_lines(os.path.join(other, "rating_metrics.jsonl"))
    assert a == b


def test_resume_reproduces_metrics(out_dir, tmp_path):
    seed = ["--seed", "6", "--out", out_dir]
    assert run(["gen-world"] + seed + FAST) == 0
    assert run(["train-scdr"] + seed + FAST) == 0
    full = canonical_lines(os.path.join(out_dir, "rating_metrics.jsonl"))

    half_dir = str(tmp_path / "half")
    half_fast = list(FAST)
    half_fast[half_fast.index("rating.steps=40")] = "rating.steps=20"
    seed_half = ["--seed", "6", "--out", half_dir]
    assert run(["gen-world"] + seed_half + half_fast) == 0
    assert run(["train-scdr"] + seed_half + half_fast) == 0
    # resume the half checkpoint out to 40 steps in a third directory
    resume_dir = str(tmp_path / "resumed")
    seed_res = ["--seed", "6", "--out", resume_dir]
    assert run(["gen-world"] + seed_res + FAST) == 0
    ckpt = os.path.join(half_dir, "rm_rating.npz")
    assert run(["train-scdr", "--resume", ckpt] + seed_res + FAST) == 0
    resumed = canonical_lines(os.path.join(resume_dir, "rating_metrics.jsonl"))
    assert resumed == full[20:]


def test_align_compare_modes(out_dir):
    seed = ["--seed", "7", "--out", out_dir]
    assert run(["gen-world"] + seed + FAST) == 0
    assert run(["align", "--compare-modes"] + seed + FAST) == 0
    report = open(os.path.join(out_dir, "align_comparison.txt")).read()
    for mode in ("sft", "dpo", "mcdpo"):
        assert mode in report
        assert os.path.exists(os.path.join(out_dir, f"generator_{mode}.npz"))


def test_env_var_out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("PREFALIGN_OUT_ROOT", str(tmp_path / "root"))
    assert run(["gen-world", "--seed", "8", "--out", "nested/run"] + FAST) == 0
    assert (tmp_path / "root" / "nested" / "run" / "corpus.csv").exists()


def test_paper_profile_accepted(out_dir):
    # the 'paper' profile presets must parse and run gen-world (training at
    # that scale is not exercised here)
    argv = ["gen-world", "--profile", "paper", "--seed", "1", "--out", out_dir,
            "--set", "corpus.n_prompts=10"]
    assert run(argv) == 0


def test_unknown_set_key_fails(out_dir, capsys):
    assert run(["gen-world", "--out", out_dir, "--set", "bogus=1"]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigurationError"
