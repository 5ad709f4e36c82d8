import dataclasses
from decimal import Decimal

import numpy as np
import pytest

from stairsim.dag import XDag
from stairsim.exceptions import BelowMinimum, DuplicateReport, MalformedExport
from stairsim.ledger import EpochSchedule, Role, StakeLedger
from stairsim.models import ProtocolParams
from stairsim.observer import (
    AuditReport,
    Finding,
    FindingKind,
    ObserverState,
    ReportDesk,
    brute_force_score,
    load_bundle,
    post_validate,
    report_and_reward,
    upgrade_observer,
)
from stairsim.observer.exports import DAG_FILE, SPV_ACCOUNT
from stairsim.observer.verifier import BlockVerifier
from stairsim.rewards import RewardTracker, SagaLedger
from tests.conftest import make_config


def _copy(bundle, **changes):
    """浅拷贝导出，避免修改会话共享的运行结果"""
    fields = {
        "dag": list(bundle.dag),
        "finality": {k: list(v) for k, v in bundle.finality.items()},
        "rewards": list(bundle.rewards),
        "saga": list(bundle.saga),
    }
    fields.update(changes)
    return dataclasses.replace(bundle, **fields)


def _pick_non_leaf(bundle):
    return next(i for i, row in enumerate(bundle.dag) if not row.is_leaf)


# ---------------------------------------------------------------------------
# 审计
# ---------------------------------------------------------------------------


def test_honest_export_is_clean(observed_report):
    report = post_validate(observed_report.bundle, reporter="o1")
    assert report.is_clean, report.to_text()
    assert report.verdict == "clean"
    assert report.blocks_scanned == len(observed_report.bundle.dag)
    assert all(a.is_clean for a in observed_report.audits)


def test_brute_force_scores_match_export(observed_report):
    bundle = observed_report.bundle
    scores = brute_force_score(bundle.dag, bundle.powers(), bundle.params.checkpoint_frame_interval)
    assert scores == {row.id: row.score for row in bundle.dag}


def test_score_mismatch_detected(observed_report):
    bundle = _copy(observed_report.bundle)
    i = _pick_non_leaf(bundle)
    row = bundle.dag[i]
    bundle.dag[i] = dataclasses.replace(row, score=row.score + 1)

    report = post_validate(bundle)
    assert [f.subjects for f in report.findings] == [(row.id,)]
    assert report.findings[0].kind == FindingKind.SCORE_MISMATCH
    assert report.findings[0].account == row.creator


def test_frame_claim_detected(observed_report):
    bundle = _copy(observed_report.bundle)
    i = _pick_non_leaf(bundle)
    row = bundle.dag[i]
    bundle.dag[i] = dataclasses.replace(row, frame=row.frame + 1, root=not row.root)

    report = post_validate(bundle)
    found = report.by_kind(FindingKind.THRESHOLD_VIOLATION)
    assert [f.subjects for f in found] == [(row.id,)]
    assert report.counts()[FindingKind.THRESHOLD_VIOLATION.value] == 1


def test_order_divergence_detected(observed_report):
    bundle = _copy(observed_report.bundle)
    log = bundle.finality["v1"]
    assert len(log) >= 2
    log[0], log[1] = log[1], log[0]

    report = post_validate(bundle)
    found = report.by_kind(FindingKind.ORDER_DIVERGENCE)
    assert [f.subjects for f in found] == [("v1", log[0].block_id)]
    assert "position=0" in found[0].evidence


def test_truncated_log_detected(observed_report):
    bundle = _copy(observed_report.bundle)
    bundle.finality["u1"].pop()

    report = post_validate(bundle)
    found = report.by_kind(FindingKind.ORDER_DIVERGENCE)
    assert [f.subjects[0] for f in found] == ["u1"]


def test_tampered_block_is_invalid(observed_report):
    bundle = _copy(observed_report.bundle)
    i = _pick_non_leaf(bundle)
    row = bundle.dag[i]
    bundle.dag[i] = dataclasses.replace(row, payload_digest="00" * 16)

    report = post_validate(bundle)
    invalid = {f.subjects[0] for f in report.by_kind(FindingKind.INVALID_BLOCK)}
    assert row.id in invalid
    assert not report.is_clean


def test_duplicate_row_is_invalid(observed_report):
    bundle = _copy(observed_report.bundle)
    bundle.dag.append(bundle.dag[0])

    report = post_validate(bundle)
    assert [f.subjects for f in report.by_kind(FindingKind.INVALID_BLOCK)] == [(bundle.dag[0].id,)]


def test_reward_tampering_breaks_conservation(observed_report):
    bundle = _copy(observed_report.bundle)
    i = next(
        i
        for i, row in enumerate(bundle.rewards)
        if row.account != SPV_ACCOUNT and row.validation_reward > 0
    )
    row = bundle.rewards[i]
    bundle.rewards[i] = dataclasses.replace(
        row, validation_reward=row.validation_reward + Decimal("0.01")
    )

    report = post_validate(bundle)
    found = report.by_kind(FindingKind.CONSERVATION_BREAK)
    assert [f.subjects for f in found] == [(f"day{row.day}",)]


def test_negative_credit_flagged(observed_report):
    bundle = _copy(observed_report.bundle)
    i = next(i for i, row in enumerate(bundle.rewards) if row.account != SPV_ACCOUNT)
    row = bundle.rewards[i]
    bundle.rewards[i] = dataclasses.replace(row, burn=Decimal("-1.00"))

    report = post_validate(bundle)
    subjects = [f.subjects for f in report.by_kind(FindingKind.CONSERVATION_BREAK)]
    assert (str(row.day), row.account) in subjects


def test_saga_claim_checked(observed_report):
    bundle = _copy(observed_report.bundle)
    row = bundle.saga[0]
    bundle.saga[0] = dataclasses.replace(row, earned=row.earned + 1, points=row.points + 1)

    report = post_validate(bundle)
    found = report.by_kind(FindingKind.CONSERVATION_BREAK)
    assert [f.subjects for f in found] == [(row.account,)]


def _twin(row, payload_digest: str):
    """同一创建者同一 seq、仅负载不同的合法双块"""
    twin = dataclasses.replace(row, payload_digest=payload_digest)
    return dataclasses.replace(twin, id=BlockVerifier.calc_id(twin))


def test_fork_twin_reported_once(observed_run):
    network, report = observed_run
    atroposes = set(network.reference_node().engine.atroposes)
    bundle = _copy(report.bundle)
    # 选一个引用了 Atropos 的非根区块，双块同样有资格获得 Saga 积分
    row = next(
        r
        for r in bundle.dag
        if not r.is_leaf and not r.root and atroposes & set(r.other_parents)
    )
    twin = _twin(row, "ab" * 16)
    bundle.dag.append(twin)

    audit = post_validate(bundle)
    assert [(f.kind, f.subjects) for f in audit.findings] == [
        (FindingKind.FORK_PAIR, tuple(sorted([row.id, twin.id])))
    ]
    assert audit.findings[0].account == row.creator
    assert not audit.by_kind(FindingKind.CONSERVATION_BREAK)


def _mutate_score(bundle, rng):
    i = int(rng.integers(len(bundle.dag)))
    row = bundle.dag[i]
    bundle.dag[i] = dataclasses.replace(row, score=row.score + int(rng.integers(1, 1000)))
    return FindingKind.SCORE_MISMATCH, (row.id,)


def _mutate_frame(bundle, rng):
    i = int(rng.integers(len(bundle.dag)))
    row = bundle.dag[i]
    if rng.random() < 0.5:
        bundle.dag[i] = dataclasses.replace(row, root=not row.root)
    else:
        bundle.dag[i] = dataclasses.replace(row, frame=row.frame + int(rng.integers(1, 4)))
    return FindingKind.THRESHOLD_VIOLATION, (row.id,)


def _mutate_order(bundle, rng):
    node_id = sorted(bundle.finality)[int(rng.integers(len(bundle.finality)))]
    log = bundle.finality[node_id]
    i = int(rng.integers(len(log) - 1))
    log[i], log[i + 1] = log[i + 1], log[i]
    return FindingKind.ORDER_DIVERGENCE, (node_id, log[i].block_id)


def _mutate_fork(bundle, rng):
    candidates = [r for r in bundle.dag if not r.is_leaf and not r.root]
    row = candidates[int(rng.integers(len(candidates)))]
    twin = _twin(row, rng.bytes(16).hex())
    bundle.dag.append(twin)
    return FindingKind.FORK_PAIR, tuple(sorted([row.id, twin.id]))


def _mutate_reward(bundle, rng):
    candidates = [i for i, r in enumerate(bundle.rewards) if r.account != SPV_ACCOUNT]
    i = candidates[int(rng.integers(len(candidates)))]
    row = bundle.rewards[i]
    name = ("validation_reward", "fees", "delegation_share", "commission")[int(rng.integers(4))]
    delta = Decimal(int(rng.integers(1, 10000))) / 100
    bundle.rewards[i] = dataclasses.replace(row, **{name: getattr(row, name) + delta})
    return FindingKind.CONSERVATION_BREAK, (f"day{row.day}",)


def _mutate_saga(bundle, rng):
    i = int(rng.integers(len(bundle.saga)))
    row = bundle.saga[i]
    bundle.saga[i] = dataclasses.replace(row, earned=row.earned + int(rng.integers(1, 6)))
    return FindingKind.CONSERVATION_BREAK, (row.account,)


MUTATIONS = {
    "score": _mutate_score,
    "frame": _mutate_frame,
    "order": _mutate_order,
    "fork": _mutate_fork,
    "reward": _mutate_reward,
    "saga": _mutate_saga,
}


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(MUTATIONS))
def test_each_mutation_flagged_exactly_once(observed_report, name):
    rng = np.random.default_rng(sorted(MUTATIONS).index(name))
    for _ in range(200):
        bundle = _copy(observed_report.bundle)
        kind, subjects = MUTATIONS[name](bundle, rng)
        audit = post_validate(bundle)
        assert [(f.kind, f.subjects) for f in audit.findings] == [(kind, subjects)]


def test_report_text_lists_findings():
    finding = Finding(FindingKind.FORK_PAIR, ("aa", "bb"), "v1 seq=3", "v1")
    report = AuditReport(findings=[finding], blocks_scanned=10, reporter="o1")
    text = report.to_text()
    assert text.splitlines() == [
        "reporter=o1",
        "verdict=violations",
        "blocks_scanned=10",
        "findings=1",
        "ForkPair\taa,bb\tv1 seq=3",
    ]


# ---------------------------------------------------------------------------
# 导出读取
# ---------------------------------------------------------------------------


def test_written_export_loads_and_audits_clean(export_dir, observed_report):
    bundle = load_bundle(export_dir)
    assert bundle.dag == observed_report.bundle.dag
    assert bundle.finality == observed_report.bundle.finality
    assert post_validate(bundle).is_clean


def test_missing_export_dir(tmp_path):
    with pytest.raises(MalformedExport):
        load_bundle(tmp_path / "nope")


def test_missing_export_file(export_dir):
    (export_dir / DAG_FILE).unlink()
    with pytest.raises(MalformedExport):
        load_bundle(export_dir)


def test_bad_header(export_dir):
    path = export_dir / DAG_FILE
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(["id\tcreator"] + lines[1:]) + "\n", encoding="utf-8")
    with pytest.raises(MalformedExport):
        load_bundle(export_dir)


def test_bad_field(export_dir):
    path = export_dir / DAG_FILE
    lines = path.read_text(encoding="utf-8").splitlines()
    values = lines[1].split("\t")
    values[2] = "x"
    path.write_text("\n".join([lines[0], "\t".join(values)] + lines[2:]) + "\n", encoding="utf-8")
    with pytest.raises(MalformedExport):
        load_bundle(export_dir)


# ---------------------------------------------------------------------------
# 举报与升级
# ---------------------------------------------------------------------------


@pytest.fixture
def tracker():
    config = make_config(nodes=["u1:1", "u2:1", "u3:1", "v1:1000", "v2:2000", "o1:0", "o2:0"])
    ledger = StakeLedger.from_scenario(config)
    schedule = EpochSchedule(ledger, config.stake_changes, config.params, config.frames_per_day)
    return RewardTracker(config, XDag(config.params.k), schedule, ledger.copy())


def _finding(subject: str, kind=FindingKind.SCORE_MISMATCH, account=None) -> Finding:
    return Finding(kind, (subject,), "test", account)


def test_first_reporter_rewarded(tracker):
    desk = ReportDesk()
    report = AuditReport(findings=[_finding("a"), _finding("b")])
    first = ObserverState("o1")
    outcome = report_and_reward(first, report, tracker, desk)
    assert len(outcome.accepted) == 2
    assert outcome.saga_points == 2
    assert first.saga_points == 2
    assert tracker.saga.alpha("o1") == 2
    assert len(desk) == 2

    with pytest.raises(DuplicateReport):
        report_and_reward(ObserverState("o2"), report, tracker, desk)
    assert tracker.saga.alpha("o2") == 0


def test_partial_duplicate_report(tracker):
    desk = ReportDesk()
    report_and_reward(ObserverState("o1"), AuditReport(findings=[_finding("a")]), tracker, desk)
    outcome = report_and_reward(
        ObserverState("o2"), AuditReport(findings=[_finding("a"), _finding("c")]), tracker, desk
    )
    assert [f.subjects for f in outcome.accepted] == [("c",)]
    assert [f.subjects for f in outcome.duplicates] == [("a",)]
    assert tracker.saga.alpha("o2") == 1


def test_clean_report_earns_nothing(tracker):
    outcome = report_and_reward(ObserverState("o1"), AuditReport(), tracker, ReportDesk())
    assert outcome.accepted == []
    assert outcome.saga_points == 0


def test_fork_report_burns_flagged_creator(tracker):
    tracker.flag(["v2"])
    report = AuditReport(findings=[_finding("aa", FindingKind.FORK_PAIR, "v2")])
    outcome = report_and_reward(ObserverState("o1"), report, tracker, ReportDesk())

    assert len(outcome.burns) == 1
    burn = outcome.burns[0]
    assert burn.credits["v2"].burn == Decimal("1800.00")
    assert burn.credits["o1"].reporter_reward == Decimal("200.00")
    assert outcome.saga_points == 0
    assert tracker.flagged == set()
    assert tracker.ledger.get("v2").validation_staked == 0
    assert tracker.statements[-1].burned_total == Decimal("1800.00")


def test_fork_report_in_saga_mode(tracker):
    tracker.config = make_config(observer_reward="saga", points_per_finding=3)
    tracker.flag(["v2"])
    report = AuditReport(findings=[_finding("aa", FindingKind.FORK_PAIR, "v2")])
    outcome = report_and_reward(ObserverState("o1"), report, tracker, ReportDesk())
    assert outcome.saga_points == 3
    assert tracker.saga.alpha("o1") == 3
    assert tracker.statements[-1].credits["v2"].burn == Decimal("2000.00")


def test_upgrade_keeps_saga_points():
    ledger = StakeLedger(ProtocolParams())
    saga = SagaLedger()
    observer = ObserverState("o1", saga_points=5)
    assert observer.validating_power == 0

    assert upgrade_observer(observer, 1000, ledger, saga) == Role.VALIDATOR
    assert saga.alpha("o1") == 5
    assert ledger.power("o1") == 1000
    assert ledger.get("o1").validation_staked == 1000


def test_upgrade_to_user():
    ledger = StakeLedger(ProtocolParams())
    saga = SagaLedger()
    assert upgrade_observer(ObserverState("o2", saga_points=1), 1, ledger, saga) == Role.USER
    assert ledger.power("o2") == 1


def test_upgrade_below_minimum():
    ledger = StakeLedger(ProtocolParams())
    with pytest.raises(BelowMinimum):
        upgrade_observer(ObserverState("o1"), 0, ledger, SagaLedger())
    assert "o1" not in ledger
