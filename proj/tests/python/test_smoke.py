import json
import math
import os
from pathlib import Path

import pytest

import trajx

DATA = Path(os.environ.get("TRAJX_TEST_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture(scope="module")
def grid3():
    env = trajx.make_env("grid3")
    q, checkpoints = trajx.train(env, episodes=300, seed=1)
    data = trajx.collect(env, checkpoints, per_checkpoint=4, seed=1)
    return env, q, checkpoints, data


def test_presets_and_env():
    assert {"grid1x2", "grid3", "grid5", "lander"} <= set(trajx.presets())
    env = trajx.make_env("grid5")
    assert env.state_count == 25
    assert env.action_count == 4
    assert len(env.config_hash) == 16
    layout = json.loads(env.layout_json())
    assert (layout["kind"], layout["width"], layout["height"]) == ("grid", 5, 5)
    with pytest.raises(trajx.ConfigError):
        trajx.make_env("nowhere")


def test_one_by_two_oracle_values():
    env = trajx.make_env("grid1x2")
    q = trajx.value_iteration(env, gamma=0.9, tol=1e-12)
    assert q.value(0, 3) == pytest.approx(-1.0, abs=1e-9)
    assert q.value(0, 2) == pytest.approx(-1.9, abs=1e-9)


def test_train_and_collect(grid3):
    env, q, checkpoints, data = grid3
    assert [c.episode for c in checkpoints] == [30, 75, 150, 225, 300]
    assert len(data) == 20
    assert data.config_hash == env.config_hash
    t = data.trajectories[0]
    assert t.length == len(json.loads(t.to_json())["transitions"])
    assert data[t.id].id == t.id


def test_metric_helpers():
    assert trajx.entropy_confidence([0.25] * 4) == 0.0
    assert trajx.entropy_confidence([1.0, 0.0]) == 1.0
    assert trajx.kl_divergence([1.0, 0.0, 0.0, 0.0], [0.25] * 4) == pytest.approx(math.log(4))
    assert trajx.order_by_score([3.2, 5.1, 5.1, 0.4]) == [1, 2, 0, 3]
    with pytest.raises(trajx.DataError):
        trajx.kl_divergence([0.5, 0.5], [1.0, 0.0])


def test_importance_and_rank(grid3):
    env, q, _, data = grid3
    b = trajx.importance(env, q, data.trajectories[0], "vgoal")
    products = [s["product"] for s in b["steps"]]
    assert b["i_tau"] == pytest.approx(sum(products) / len(products))
    report = trajx.rank(env, q, data, "classic", k=3)
    assert len(report["top_k"]) == 3
    scores = [r["score"] for r in report["ranked"]]
    assert scores == sorted(scores, reverse=True)
    with pytest.raises(trajx.ConfigError):
        trajx.rank(env, q, data, "kl")


def test_counterfactuals(grid3):
    env, _, _, _ = grid3
    oracle = trajx.value_iteration(env)
    _, checkpoints = trajx.train(env, episodes=2000, seed=1)
    data = trajx.collect(env, checkpoints[-1:], per_checkpoint=1, greedy=True)
    original = data.trajectories[0]
    assert original.length == 4
    cf = trajx.counterfactuals(env, oracle, original)
    assert len(cf["rollouts"]) == 12
    assert all(r["length"] >= 4 for r in cf["rollouts"])
    with pytest.raises(trajx.InvalidAction):
        trajx.rollout(env, oracle, original, 0, json.loads(original.to_json())["transitions"][0][1])


def test_hash_mismatch(grid3):
    env, _, _, data = grid3
    other = trajx.make_env("grid5")
    q5, _ = trajx.train(other, episodes=10)
    with pytest.raises(trajx.HashMismatch):
        trajx.rank(env, q5, data)


def test_checked_in_fixture_loads():
    base = DATA / "classic-failure"
    env = trajx.load_env(base / "env.cfg")
    q = trajx.load_qtable(base / "qtable.json")
    data = trajx.load_dataset(base / "dataset.traj.jsonl")
    report = trajx.rank(env, q, data, "classic")
    target = data[report["selected_id"]]
    cf = trajx.counterfactuals(env, q, target)
    assert any(r["length"] < target.length for r in cf["rollouts"])


def test_cli_round_trip(tmp_path):
    out = str(tmp_path)
    code, _, _ = trajx.run_cli(["train", "--env", "grid1x2", "--episodes", "100", "--out", out])
    assert code == 0
    code, _, _ = trajx.run_cli(["collect", "--out", out, "--greedy", "--episodes-per-checkpoint", "1"])
    assert code == 0
    assert (tmp_path / "dataset.traj.jsonl").exists()
    code, _, _ = trajx.run_cli(["rank", "--out", out, "--bogus"])
    assert code == 2
