from decimal import Decimal

import pytest

from stairsim.dag import Transaction, XDag
from stairsim.exceptions import ForkDetected, NotFlagged
from stairsim.ledger import Role, StakeKind, StakeLedger
from stairsim.models import ProtocolParams
from stairsim.models.config import FeeMode, ObserverRewardMode
from stairsim.observer.replay import recount_saga, replay_dag
from stairsim.rewards import (
    RewardStatement,
    RewardTracker,
    SagaLedger,
    award_saga_points,
    burn_deposit,
    daily_block_reward,
    distribute_validation_rewards,
    money,
    route_transaction_fees,
    split_with_delegators,
)


def _ledger(**holdings) -> StakeLedger:
    ledger = StakeLedger(ProtocolParams())
    for account_id, tokens in holdings.items():
        ledger.open_account(account_id, tokens)
    return ledger


def _saga(**points) -> SagaLedger:
    saga = SagaLedger()
    for account_id, amount in points.items():
        saga.grant(account_id, amount)
    return saga


# ---------------------------------------------------------------------------
# 金额与区块奖励
# ---------------------------------------------------------------------------


def test_money_rounds_down():
    assert money("1.239") == Decimal("1.23")
    assert money(0.1) == Decimal("0.10")
    assert money(Decimal("-0.001")) == Decimal("0.00")


def test_daily_block_reward(params):
    assert daily_block_reward(0, params) == Decimal("682425.46")
    assert daily_block_reward(1459, params) == Decimal("682425.46")
    assert daily_block_reward(1460, params) == Decimal("0.00")
    with pytest.raises(ValueError):
        daily_block_reward(-1, params)


def test_statement_rejects_negative_credit():
    statement = RewardStatement()
    with pytest.raises(ValueError):
        statement.credit("u1", "fees", Decimal("-1"))
    statement.credit("u1", "fees", Decimal("0"))
    assert statement.credits == {}


# ---------------------------------------------------------------------------
# 交易费
# ---------------------------------------------------------------------------


def test_fee_split_between_creator_and_spv(params):
    fragment = route_transaction_fees([("u1", 100)], _ledger(u1=1), params)
    assert fragment.credits["u1"].fees == Decimal("70.00")
    assert fragment.spv_credit == Decimal("30.00")
    assert fragment.fees_collected == Decimal("100")
    assert fragment.is_conserved()


def test_small_fee_split(params):
    fragment = route_transaction_fees([("u1", 1)], _ledger(u1=1), params)
    assert fragment.credits["u1"].fees == Decimal("0.70")
    assert fragment.spv_credit == Decimal("0.30")


def test_zero_fee_produces_no_credits(params):
    fragment = route_transaction_fees([("u1", 0)], _ledger(u1=1), params)
    assert fragment.credits == {}
    assert fragment.fees_collected == 0
    assert fragment.spv_credit == 0


def test_equal_split_fee_dust_goes_to_spv(params):
    fragment = route_transaction_fees(
        [("u1", 10)],
        _ledger(),
        params,
        fee_mode=FeeMode.EQUAL_SPLIT,
        validating_accounts=["v1", "v2", "v3"],
    )
    assert [fragment.credits[v].fees for v in ("v1", "v2", "v3")] == [Decimal("2.33")] * 3
    assert fragment.spv_credit == Decimal("3.01")
    assert fragment.is_conserved()


# ---------------------------------------------------------------------------
# 委托分账
# ---------------------------------------------------------------------------


def test_delegator_share_with_commission(params):
    ledger = _ledger(v1=1000, d1=1000)
    ledger.delegate("d1", "v1", 1000, lock_days=1)
    fragment = split_with_delegators(Decimal("100"), "v1", ledger, params)
    assert fragment.credits["d1"].delegation_share == Decimal("42.50")
    assert fragment.credits["v1"].validation_reward == Decimal("50.00")
    assert fragment.credits["v1"].commission == Decimal("7.50")
    assert fragment.account_total("v1") == Decimal("57.50")
    assert fragment.spv_credit == 0


def test_delegators_paid_pro_rata(params):
    ledger = _ledger(v1=1000, d1=600, d2=400)
    ledger.delegate("d1", "v1", 600, lock_days=1)
    ledger.delegate("d2", "v1", 400, lock_days=1)
    fragment = split_with_delegators(Decimal("100"), "v1", ledger, params)
    assert fragment.credits["d1"].delegation_share == Decimal("25.50")
    assert fragment.credits["d2"].delegation_share == Decimal("17.00")
    assert fragment.distributed_total == Decimal("100.00")


def test_no_delegators_keeps_everything(params):
    fragment = split_with_delegators(Decimal("12.34"), "v1", _ledger(v1=1000), params)
    assert fragment.account_total("v1") == Decimal("12.34")


# ---------------------------------------------------------------------------
# 验证奖励
# ---------------------------------------------------------------------------


def test_reward_weighted_by_saga_and_power(params):
    saga = _saga(a=2, b=1)
    fragment = distribute_validation_rewards(
        Decimal("100"), saga, {"a": 1000, "b": 2000}, _ledger(), params
    )
    assert fragment.account_total("a") == Decimal("50.00")
    assert fragment.account_total("b") == Decimal("50.00")
    assert fragment.is_conserved()


def test_zero_saga_rolls_pool_over(params):
    fragment = distribute_validation_rewards(
        Decimal("100"), SagaLedger(), {"a": 1000, "b": 1}, _ledger(), params
    )
    assert fragment.credits == {}
    assert fragment.remainder == Decimal("100.00")
    assert fragment.is_conserved()


def test_single_node_takes_pool(params):
    fragment = distribute_validation_rewards(
        Decimal("682425.46"), _saga(v1=3), {"v1": 1000, "u1": 1}, _ledger(), params
    )
    assert fragment.account_total("v1") == Decimal("682425.46")
    assert "u1" not in fragment.credits


def test_rounding_dust_goes_to_spv(params):
    fragment = distribute_validation_rewards(
        Decimal("100.01"), _saga(a=1, b=1, c=1), {"a": 1, "b": 1, "c": 1}, _ledger(), params
    )
    assert [fragment.account_total(x) for x in "abc"] == [Decimal("33.33")] * 3
    assert fragment.spv_credit == Decimal("0.02")
    assert fragment.is_conserved()


# ---------------------------------------------------------------------------
# 销毁
# ---------------------------------------------------------------------------


def _staked(account_id: str, amount: int) -> StakeLedger:
    ledger = _ledger(**{account_id: amount})
    ledger.stake_tokens(account_id, StakeKind.VALIDATION, amount)
    return ledger


def test_burn_with_reporter_share():
    ledger = _staked("v1", 5000)
    flagged = {"v1"}
    fragment = burn_deposit(ledger, "v1", flagged, reporter="o1")
    assert fragment.credits["v1"].burn == Decimal("4500.00")
    assert fragment.credits["o1"].reporter_reward == Decimal("500.00")
    assert flagged == set()
    assert ledger.get("v1").validation_staked == 0
    assert ledger.get("v1").tokens_held == 0


def test_burn_saga_mode_grants_points():
    ledger = _staked("v1", 5000)
    saga = SagaLedger()
    fragment = burn_deposit(
        ledger, "v1", {"v1"}, reporter="o1", mode=ObserverRewardMode.SAGA, saga=saga, points=2
    )
    assert fragment.credits["v1"].burn == Decimal("5000.00")
    assert "o1" not in fragment.credits
    assert saga.alpha("o1") == 2
    assert saga.granted("o1") == 2


def test_burn_without_stake_records_zero():
    ledger = _ledger(v1=0)
    fragment = burn_deposit(ledger, "v1", {"v1"})
    assert fragment.credits["v1"].burn == Decimal("0.00")
    assert fragment.burned_total == 0


def test_burn_requires_flag():
    with pytest.raises(NotFlagged):
        burn_deposit(_staked("v1", 5000), "v1", set())


# ---------------------------------------------------------------------------
# Saga 积分
# ---------------------------------------------------------------------------


def _role(creator: str) -> Role:
    return Role.USER if creator.startswith("u") else Role.VALIDATOR


def _leaves(dag: XDag, creators) -> dict:
    leaves = {}
    for creator in creators:
        leaf = dag.create_event(creator, None, [], [], _role(creator))
        dag.insert_block(leaf)
        leaves[creator] = leaf.id
    return leaves


def test_saga_point_per_other_child():
    dag = XDag(k=2)
    leaves = _leaves(dag, ("u1", "u2", "u3", "v1", "v2"))
    for user in ("u1", "u2", "u3"):
        dag.insert_block(dag.create_event(user, leaves[user], [leaves["v2"]], [], Role.USER))

    saga = SagaLedger()
    assert award_saga_points(saga, [leaves["v2"]], dag) == 3
    assert saga.snapshot() == {"u1": 1, "u2": 1, "u3": 1}
    assert award_saga_points(saga, [leaves["v2"]], dag) == 0


def test_event_counted_once_across_atroposes():
    dag = XDag(k=3)
    leaves = _leaves(dag, ("u1", "v1", "v2"))
    block = dag.create_event("u1", leaves["u1"], [leaves["v1"], leaves["v2"]], [], Role.USER)
    dag.insert_block(block)

    saga = SagaLedger()
    assert award_saga_points(saga, [leaves["v1"], leaves["v2"]], dag) == 1
    assert saga.alpha("u1") == 1
    assert saga.awarded == {block.id}


def test_fork_twins_share_one_point():
    dag = XDag(k=2)
    leaves = _leaves(dag, ("u1", "v1", "v2"))
    a = dag.create_event("u1", leaves["u1"], [leaves["v2"]], [Transaction(b"a", 1)], Role.USER)
    b = dag.create_event("u1", leaves["u1"], [leaves["v2"]], [Transaction(b"b", 1)], Role.USER)
    dag.insert_block(a)
    with pytest.raises(ForkDetected):
        dag.insert_block(b)

    saga = SagaLedger()
    assert award_saga_points(saga, [leaves["v2"]], dag) == 1
    assert saga.snapshot() == {"u1": 1}
    assert saga.awarded == {min(a.id, b.id)}
    assert saga.slots == {("u1", 1)}


def test_saga_grant_cannot_decrease():
    saga = _saga(o1=2)
    with pytest.raises(ValueError):
        saga.grant("o1", -1)
    assert saga.alpha("o1") == 2
    assert saga.granted("o1") == 2


# ---------------------------------------------------------------------------
# 按日结算
# ---------------------------------------------------------------------------


@pytest.fixture
def settled(observed_run):
    network, _ = observed_run
    ref = network.reference_node()
    tracker = RewardTracker(
        network.config, ref.dag, network.schedule, ref.engine.ledger.copy()
    )
    tracker.run(ref.engine.outcomes)
    return network, ref, tracker


def test_daily_statements_conserve(settled):
    network, ref, tracker = settled
    statements = tracker.statements
    last_frame = ref.engine.outcomes[-1].frame
    assert len(statements) == network.schedule.day_of(last_frame) + 1
    assert [s.day for s in statements] == list(range(len(statements)))
    assert all(s.is_conserved() for s in statements)
    assert not any(s.has_negative_credit() for s in statements)
    assert tracker.totals()["conserved"]


def test_first_pool_is_daily_reward(settled):
    network, _, tracker = settled
    first = tracker.statements[0]
    assert first.pool == daily_block_reward(0, network.params)


def test_saga_matches_recount(settled):
    _, ref, tracker = settled
    assert sum(tracker.saga.earned.values()) == len(tracker.saga.awarded)
    for atropos in ref.engine.atroposes:
        for child in ref.dag.other_children(atropos):
            assert child in tracker.saga.awarded


def test_saga_recount_from_export(observed_report):
    bundle = observed_report.bundle
    result = replay_dag(bundle.dag, bundle.powers(), bundle.params.checkpoint_frame_interval)
    recounted = recount_saga(bundle.dag, result.atroposes)
    earned = {r.account: r.earned for r in bundle.saga if r.earned}
    assert recounted == earned


def test_burn_goes_to_last_statement(settled):
    _, _, tracker = settled
    with pytest.raises(NotFlagged):
        tracker.burn("v2")
    tracker.flag(["v2"])
    fragment = tracker.burn("v2", reporter="o1")
    assert fragment.credits["v2"].burn == Decimal("1800.00")
    assert fragment.credits["o1"].reporter_reward == Decimal("200.00")
    assert tracker.statements[-1].burned_total == Decimal("1800.00")
    assert tracker.statements[-1].is_conserved()
