"""
奖励包

Saga 积分、区块奖励、交易费、委托分账与押金销毁。
"""

from stairsim.rewards.distribution import (
    burn_deposit,
    distribute_validation_rewards,
    route_transaction_fees,
    split_with_delegators,
)
from stairsim.rewards.money import CENT, ZERO, daily_block_reward, money, to_decimal
from stairsim.rewards.saga import SagaLedger, award_saga_points
from stairsim.rewards.statement import (
    CREDIT_COLUMNS,
    DISTRIBUTED_COLUMNS,
    AccountCredit,
    RewardStatement,
)
from stairsim.rewards.tracker import RewardTracker

__all__ = [
    "burn_deposit",
    "distribute_validation_rewards",
    "route_transaction_fees",
    "split_with_delegators",
    "CENT",
    "ZERO",
    "daily_block_reward",
    "money",
    "to_decimal",
    "SagaLedger",
    "award_saga_points",
    "CREDIT_COLUMNS",
    "DISTRIBUTED_COLUMNS",
    "AccountCredit",
    "RewardStatement",
    "RewardTracker",
]
