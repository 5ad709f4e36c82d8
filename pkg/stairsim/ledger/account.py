"""
账户与角色模型

定义账户持仓、质押/委托头寸、角色与验证权重的计算规则。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

from stairsim.models.config import ProtocolParams


class Role(Enum):
    """参与者角色"""

    OBSERVER = "Observer"
    USER = "User"
    VALIDATOR = "Validator"

    def opposite(self) -> Optional["Role"]:
        """交叉类型规则要求的相反角色（观察者没有）"""
        if self == Role.USER:
            return Role.VALIDATOR
        if self == Role.VALIDATOR:
            return Role.USER
        return None

    @property
    def can_create(self) -> bool:
        return self != Role.OBSERVER


class StakeKind(Enum):
    """质押类型"""

    TRANSACTION = "transaction"
    VALIDATION = "validation"


@dataclass
class Account:
    """账户"""

    id: str
    tokens_held: int = 0
    txn_staked: int = 0
    validation_staked: int = 0
    delegations_out: Dict[str, int] = field(default_factory=dict)
    delegation_lock_until: Dict[str, int] = field(default_factory=dict)
    stake_renewal_day: int = 0

    # 退出中的质押（检查点后锁定，解锁前不可提取）
    exiting: int = 0
    exit_unlock_day: int = 0

    @property
    def delegated_out_total(self) -> int:
        return sum(self.delegations_out.values())

    @property
    def committed(self) -> int:
        """已占用的持有量"""
        return (
            self.txn_staked
            + self.validation_staked
            + self.delegated_out_total
            + self.exiting
        )

    def lapsed_stake(self, day: Optional[int]) -> int:
        """超过续期日的验证质押"""
        if day is None or day <= self.stake_renewal_day:
            return 0
        return self.validation_staked

    def copy(self) -> "Account":
        return Account(
            id=self.id,
            tokens_held=self.tokens_held,
            txn_staked=self.txn_staked,
            validation_staked=self.validation_staked,
            delegations_out=dict(self.delegations_out),
            delegation_lock_until=dict(self.delegation_lock_until),
            stake_renewal_day=self.stake_renewal_day,
            exiting=self.exiting,
            exit_unlock_day=self.exit_unlock_day,
        )


def validating_power(effective_stake: int, params: ProtocolParams) -> int:
    """
    由有效质押计算验证权重

    观察者 0，User 1，Validator 为 U 的整数倍。
    """
    if effective_stake < params.L:
        return 0
    if effective_stake < params.U:
        return 1
    return params.U * (effective_stake // params.U)


def role_for_stake(effective_stake: int, params: ProtocolParams) -> Role:
    """由有效质押推导角色"""
    if effective_stake < params.L:
        return Role.OBSERVER
    if effective_stake < params.U:
        return Role.USER
    return Role.VALIDATOR


__all__ = ["Role", "StakeKind", "Account", "validating_power", "role_for_stake"]
