"""
质押账本包

账户、角色、验证权重以及检查点纪元权重表。
"""

from stairsim.ledger.account import (
    Account,
    Role,
    StakeKind,
    role_for_stake,
    validating_power,
)
from stairsim.ledger.ledger import LedgerRow, StakeLedger
from stairsim.ledger.schedule import (
    EpochSchedule,
    apply_stake_changes,
    day_of_frame,
    epoch_of,
)

__all__ = [
    "Account",
    "Role",
    "StakeKind",
    "role_for_stake",
    "validating_power",
    "LedgerRow",
    "StakeLedger",
    "EpochSchedule",
    "apply_stake_changes",
    "day_of_frame",
    "epoch_of",
]
