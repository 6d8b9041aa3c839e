import math

import pytest

from srgdqn.cli import main
from srgdqn.config import TABLE1, ConfigError, ExperimentSpec, TaskConfig, load_config, parse_seeds
from srgdqn.experiment import aggregate_logs, mean_std, read_csv, run_exact_anchor, run_experiment

TINY = dict(budget=96, batch_size=8, inner_steps=2, diag_every=32)


# ---------------------------------------------------------------- config


def test_empty_file_gives_task_defaults(tmp_path):
    cfg_file = tmp_path / "empty.cfg"
    cfg_file.write_text("")
    spec = load_config(cfg_file, task="mountaincar")
    cfg = spec.task_config(0)
    for key, value in TABLE1["mountaincar"].items():
        assert getattr(cfg, key) == value
    assert (cfg.hidden_nodes, cfg.batch_size, cfg.inner_steps, cfg.gamma) == (20, 64, 16, 0.9)
    assert cfg.eps_adam == 1e-8 and cfg.learn_freq == 16 and cfg.replay_capacity == 10_000


def test_table_defaults_per_task():
    cp, pd = TaskConfig.for_task("cartpole"), TaskConfig.for_task("pendulum")
    assert (cp.hidden_nodes, cp.gamma, cp.budget, cp.budget_unit) == (8, 0.99, 800, "episodes")
    assert (pd.eta, pd.batch_size, pd.budget) == (1e-3, 32, 20_000)


def test_override_and_comments(tmp_path):
    cfg_file = tmp_path / "x.cfg"
    cfg_file.write_text("task = pendulum  # swing-up\ngamma = 0.5\nseeds = 0-2\nsvrg_adam = false\n")
    spec = load_config(cfg_file)
    cfg = spec.task_config(1)
    assert cfg.task == "pendulum" and cfg.gamma == 0.5 and not cfg.svrg_adam and cfg.seed == 1
    assert cfg.eta == 1e-3
    assert spec.seeds == [0, 1, 2]


def test_unknown_key_is_named(tmp_path):
    cfg_file = tmp_path / "typo.cfg"
    cfg_file.write_text("gama = 0.5\n")
    with pytest.raises(ConfigError, match="gama"):
        load_config(cfg_file, task="mountaincar")


def test_missing_task(tmp_path):
    cfg_file = tmp_path / "none.cfg"
    cfg_file.write_text("gamma = 0.5\n")
    with pytest.raises(ConfigError, match="task"):
        load_config(cfg_file)


@pytest.mark.parametrize("text", ["gamma = 1.5", "batch_size = 0", "gamma = fast", "just words"])
def test_bad_values(tmp_path, text):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text(text + "\n")
    with pytest.raises(ConfigError):
        load_config(cfg_file, task="cartpole")


def test_parse_seeds():
    assert parse_seeds("0-4") == [0, 1, 2, 3, 4]
    assert parse_seeds("1,5,7") == [1, 5, 7]
    assert parse_seeds("0-1,9") == [0, 1, 9]
    with pytest.raises(ConfigError):
        parse_seeds("a-b")


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(task="mountaincar", algos=["adam"])
    with pytest.raises(ConfigError):
        ExperimentSpec(task="mountaincar", seeds=[])


# ---------------------------------------------------------------- aggregation


def test_mean_std_constant_curves():
    assert mean_std([1.0, 3.0]) == (2.0, 1.0)
    assert mean_std([2.0, math.nan]) == (2.0, 0.0)
    assert all(math.isnan(v) for v in mean_std([math.nan]))


def test_aggregate_identical_runs_has_zero_std():
    run = [{"epoch": e, "avg_reward": 0.1 * e, "window_avg_reward_100": -e,
            "episode_length": 5, "delta_norm_mean": 2.0 ** -e} for e in (1, 2, 3)]
    agg = aggregate_logs([run, run, run])
    for row, src in zip(agg, run):
        assert row["n_runs"] == 3
        assert row["avg_reward_mean"] == src["avg_reward"]
        assert row["avg_reward_std"] == 0.0


def test_aggregate_uneven_lengths():
    a = [{"epoch": 1, "avg_reward": 1.0}, {"epoch": 2, "avg_reward": 1.0}]
    b = [{"epoch": 1, "avg_reward": 3.0}]
    agg = aggregate_logs([a, b], metrics=("avg_reward",))
    assert [(r["n_runs"], r["avg_reward_mean"], r["avg_reward_std"]) for r in agg] == [(2, 2.0, 1.0), (1, 1.0, 0.0)]


# ---------------------------------------------------------------- sweeps


def _spec(out, **kw):
    base = dict(task="mountaincar", algos=["sarah_adam"], seeds=[0, 1], overrides=dict(TINY), out=out)
    base.update(kw)
    return ExperimentSpec(**base)


def test_sweep_writes_runs_and_aggregate(tmp_path):
    assert run_experiment(_spec(tmp_path)) == 0
    runs = sorted(p.name for p in (tmp_path / "runs").iterdir())
    assert runs == ["mountaincar_sarah_adam_seed0.csv", "mountaincar_sarah_adam_seed1.csv"]
    assert [p.name for p in (tmp_path / "aggregate").iterdir()] == ["mountaincar_sarah_adam.csv"]
    rows = read_csv(tmp_path / "runs" / runs[0])
    assert list(rows[0]) == ["env_step", "epoch", "episode", "avg_reward", "window_avg_reward_100",
                             "episode_length", "epsilon", "delta_norm_mean", "ifo_cumulative"]
    assert len(rows) == 96 // 16
    agg = read_csv(tmp_path / "aggregate" / "mountaincar_sarah_adam.csv")
    assert all(r["n_runs"] == "2" for r in agg)
    diag = read_csv(tmp_path / "diagnostics" / "mountaincar_aggregate.csv")
    assert [r["checkpoint_step"] for r in diag] == ["32", "64", "96"]


def _snapshot(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_repeat_sweeps_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(_spec(a, algos=["sgd", "svrg"]))
    run_experiment(_spec(b, algos=["sgd", "svrg"]))
    assert _snapshot(a) == _snapshot(b) and _snapshot(a)


def test_parallel_sweep_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(_spec(a, algos=["sgd", "sarah"]))
    run_experiment(_spec(b, algos=["sgd", "sarah"]), jobs=2)
    assert _snapshot(a) == _snapshot(b)


def test_failed_cell_sets_exit_status(tmp_path, monkeypatch):
    import srgdqn.experiment as experiment

    def boom(config, algo):
        raise RuntimeError("diverged")

    monkeypatch.setattr(experiment, "run_training", boom)
    assert run_experiment(_spec(tmp_path)) == 1


def test_exact_anchor_outputs(tmp_path):
    spec = _spec(tmp_path, algos=["svrg"], seeds=[3])
    assert run_exact_anchor(spec) == 0
    names = sorted(p.name for p in (tmp_path / "exact_anchor").iterdir())
    assert names == ["mountaincar_seed3_batch.csv", "mountaincar_seed3_exact.csv", "mountaincar_summary.csv"]
    summary = read_csv(tmp_path / "exact_anchor" / "mountaincar_summary.csv")
    assert summary[0]["seed"] == "3"


# ---------------------------------------------------------------- command line


def test_cli_run(tmp_path):
    code = main(["run", "--task", "mountaincar", "--algo", "sgd", "--seeds", "0", "--budget", "64",
                 "--out", str(tmp_path), "--quiet"])
    assert code == 0
    assert (tmp_path / "runs" / "mountaincar_sgd_seed0.csv").exists()


def test_cli_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("task = cartpole\nbudget = 2\nbatch_size = 8\n")
    assert main(["run", "--config", str(cfg), "--algo", "svrg", "--out", str(tmp_path / "o"), "--quiet"]) == 0
    cfg.write_text("gama = 1\n")
    assert main(["run", "--config", str(cfg), "--task", "cartpole", "--quiet"]) == 2
    assert "gama" in capsys.readouterr().err
    assert main(["run", "--quiet"]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--task", "acrobot"])
