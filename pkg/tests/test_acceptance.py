"""
端到端场景

种子扫描与长时间运行较慢，用 -m "not slow" 跳过。
"""

from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from stairsim.gossip import SimNetwork, run_scenario
from stairsim.invariants import agreement
from stairsim.models import FaultBehavior, ScenarioConfig
from stairsim.observer import FindingKind
from stairsim.orchestrator import ScenarioOrchestrator, golden_name
from tests.conftest import FIVE_NODES, SCENARIOS, make_config

GOLDEN = Path(__file__).resolve().parent.parent / "golden"


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(1, 6))
def test_five_node_agreement_across_seeds(seed):
    report = run_scenario(make_config(seed=seed, max_ticks=200))
    assert report.passed, report.violations
    assert agreement(report.finality_logs) == []
    logs = list(report.finality_logs.values())
    assert all([r.block_id for r in log] == [r.block_id for r in logs[0]] for log in logs)
    assert report.metrics["frames_decided"] > 0


@pytest.mark.slow
def test_silent_minority_does_not_stall():
    # u3 的权重 1 远小于 ⌊(3003-1)/3⌋
    report = run_scenario(make_config(faults=["u3:silent_after:50"], max_ticks=300))
    assert report.passed, report.violations
    assert set(report.finality_logs) == {"u1", "u2", "v1", "v2"}
    assert report.metrics["messages_dropped"] > 0


@pytest.mark.slow
def test_runs_are_reproducible():
    config = make_config(max_ticks=150)
    first = run_scenario(config)
    second = run_scenario(config)
    assert first.to_kv() == second.to_kv()
    assert first.finality_logs == second.finality_logs

    other = run_scenario(config.with_seed(43))
    ref = first.metrics["reference_node"]
    assert [r.block_id for r in other.finality_logs[ref]] != [
        r.block_id for r in first.finality_logs[ref]
    ]


@pytest.mark.slow
def test_cross_type_scenario():
    config = ScenarioConfig.load(SCENARIOS / "cross_type.toml").with_overrides({"max_ticks": "400"})
    report = run_scenario(config)
    assert report.passed, report.violations
    assert report.metrics["finalized_blocks"] > 0
    assert all(a.is_clean for a in report.audits)


@pytest.mark.slow
def test_equivocator_detected_and_burned():
    config = ScenarioConfig.load(SCENARIOS / "equivocator.toml").with_overrides({"max_ticks": "600"})
    report = run_scenario(config)
    assert report.passed, report.violations
    assert report.metrics["forks_detected"] > 0

    forks = [f for a in report.audits for f in a.by_kind(FindingKind.FORK_PAIR)]
    assert forks
    assert {f.account for f in forks} == {"v3"}

    burned = sum((r.burn for r in report.bundle.rewards if r.account == "v3"), Decimal(0))
    reward = sum((r.reporter_reward for r in report.bundle.rewards if r.account == "o1"), Decimal(0))
    assert burned == Decimal("900.00")
    assert reward == Decimal("100.00")


@pytest.mark.slow
def test_checkpoint_cadence_and_stake_changes():
    config = ScenarioConfig.load(SCENARIOS / "checkpoint_100.toml")
    network = SimNetwork(config)
    report = run_scenario(config, network)
    assert report.passed, report.violations

    engine = network.reference_node().engine
    interval = config.params.checkpoint_frame_interval
    assert engine.last_decided >= interval
    assert [c.frame for c in engine.checkpoints] == list(
        range(interval, engine.last_decided + 1, interval)
    )
    first = engine.checkpoints[0]
    assert [(c.account, c.amount) for c in first.applied] == [("v1", 1000)]
    assert network.schedule.powers(0)["v1"] == 1000
    assert network.schedule.powers(1)["v1"] == 2000
    for checkpoint in engine.checkpoints:
        assert checkpoint.ledger_digest == network.schedule.digest(checkpoint.frame // interval)


@pytest.mark.slow
def test_five_node_golden_order(tmp_path):
    config = ScenarioConfig.load(SCENARIOS / "five_node.toml")
    golden_dir = GOLDEN
    if not (GOLDEN / golden_name(config)).is_file():
        # 未提交 golden 时，用独立的两次运行互相比对
        golden_dir = tmp_path
        assert not ScenarioOrchestrator(config).golden(golden_dir).matched
        assert ScenarioOrchestrator(config).golden(golden_dir, update=True).updated
    result = ScenarioOrchestrator(config).golden(golden_dir)
    assert result.matched, f"first difference at line {result.first_difference}"


@pytest.mark.slow
def test_unrenewed_validator_lapses():
    # 续期周期 2 天，每 10 帧 1 天；除 v3 外每两个检查点续期一次
    renewing = ["u1", "u2", "u3", "v1", "v2"]
    changes = [
        {"checkpoint": cp, "account": a, "kind": "renew"}
        for cp in range(20, 2001, 20)
        for a in renewing
    ]
    config = make_config(
        nodes=FIVE_NODES + ["v3:1000"],
        lambda_days=2,
        checkpoint_interval=10,
        frames_per_day=10,
        stake_changes=changes,
        max_ticks=500,
    )
    config.validate()
    network = SimNetwork(config)
    report = run_scenario(config, network)
    assert report.passed, report.violations

    schedule = network.schedule
    assert schedule.powers(2)["v3"] == 1000
    assert schedule.powers(3)["v3"] == 0
    assert schedule.total_power(3) == 3003

    engine = network.reference_node().engine
    assert engine.max_frame > 40
    v3_roots = [r for r in engine.roots.values() if r.creator == "v3"]
    assert v3_roots
    assert max(r.frame for r in v3_roots) <= 30


def _mixed_fault_config(seed: int) -> ScenarioConfig:
    """5 到 20 个节点，一个静默 User 加一个制造分叉的节点，故障权重不超过预算"""
    rng = np.random.default_rng(seed)
    size = int(rng.integers(5, 21))
    n_validators = int(rng.integers(2, max(3, size // 2) + 1))
    users = [f"u{i}" for i in range(1, size - n_validators + 1)]
    validators = [f"v{i}" for i in range(1, n_validators + 1)]
    stakes = {u: int(rng.integers(1, 1000)) for u in users}
    stakes.update({v: 1000 * int(rng.integers(1, 4)) for v in validators})

    budget = (len(users) + sum(stakes[v] for v in validators) - 1) // 3
    silent = users[int(rng.integers(len(users)))]
    smallest = min(validators, key=lambda v: (stakes[v], v))
    if 1 + stakes[smallest] <= budget:
        equivocator = smallest
    else:
        equivocator = next(u for u in users if u != silent)

    return make_config(
        name="mixed_faults",
        seed=seed,
        nodes=[f"{a}:{s}" for a, s in stakes.items()] + ["o1:0"],
        faults=[
            f"{silent}:silent_after:{int(rng.integers(50, 250))}",
            f"{equivocator}:equivocate:0.2",
        ],
        max_ticks=300,
    )


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(1, 21))
def test_silent_and_equivocating_mix_across_seeds(seed):
    config = _mixed_fault_config(seed)
    report = run_scenario(config)
    assert report.passed, report.violations
    assert report.metrics["frames_decided"] > 0
    assert report.metrics["forks_detected"] > 0
    silent = next(f.node_id for f in config.faults if f.behavior == FaultBehavior.SILENT_AFTER)
    assert silent not in report.finality_logs


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(1, 21))
def test_cross_type_across_seeds(seed):
    config = (
        ScenarioConfig.load(SCENARIOS / "cross_type.toml")
        .with_overrides({"max_ticks": "300"})
        .with_seed(seed)
    )
    report = run_scenario(config)
    assert report.passed, report.violations
    assert report.metrics["finalized_blocks"] > 0
    assert all(a.is_clean for a in report.audits)
