"""
奖励结算单

每个模拟日一张结算单。守恒关系：
    各账户分配额 + SPV + 结转余额 == 当日奖励池 + 当日手续费
销毁与举报奖励不属于奖励池，单独记账。
"""

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, Optional

from stairsim.rewards.money import ZERO, money

# 计入守恒的列
DISTRIBUTED_COLUMNS = ("validation_reward", "fees", "delegation_share", "commission")
CREDIT_COLUMNS = DISTRIBUTED_COLUMNS + ("burn", "reporter_reward")


@dataclass
class AccountCredit:
    """单个账户的当日入账"""

    validation_reward: Decimal = ZERO
    fees: Decimal = ZERO
    delegation_share: Decimal = ZERO
    commission: Decimal = ZERO
    burn: Decimal = ZERO
    reporter_reward: Decimal = ZERO

    @property
    def distributed(self) -> Decimal:
        return sum((getattr(self, c) for c in DISTRIBUTED_COLUMNS), ZERO)

    def add(self, column: str, amount: Decimal) -> None:
        if column not in CREDIT_COLUMNS:
            raise KeyError(f"未知的入账列: {column}")
        setattr(self, column, getattr(self, column) + amount)


@dataclass
class RewardStatement:
    """结算单（也用作各分配步骤的片段）"""

    day: Optional[int] = None
    pool: Decimal = ZERO
    fees_collected: Decimal = ZERO
    credits: Dict[str, AccountCredit] = field(default_factory=dict)
    spv_credit: Decimal = ZERO
    remainder: Decimal = ZERO

    def credit(self, account_id: str, column: str, amount: Decimal) -> None:
        if amount < 0:
            raise ValueError(f"入账金额不能为负: {account_id} {column} {amount}")
        # 零额只为销毁留痕
        if amount == 0 and column != "burn":
            return
        self.credits.setdefault(account_id, AccountCredit()).add(column, money(amount))

    def absorb(self, fragment: "RewardStatement") -> "RewardStatement":
        """合并片段"""
        self.pool += fragment.pool
        self.fees_collected += fragment.fees_collected
        self.spv_credit += fragment.spv_credit
        self.remainder += fragment.remainder
        for account_id, credit in fragment.credits.items():
            target = self.credits.setdefault(account_id, AccountCredit())
            for column in CREDIT_COLUMNS:
                target.add(column, getattr(credit, column))
        return self

    def account_total(self, account_id: str) -> Decimal:
        credit = self.credits.get(account_id)
        return credit.distributed if credit else ZERO

    @property
    def distributed_total(self) -> Decimal:
        return sum((c.distributed for c in self.credits.values()), ZERO)

    @property
    def burned_total(self) -> Decimal:
        return sum((c.burn for c in self.credits.values()), ZERO)

    def is_conserved(self) -> bool:
        """分配额 + SPV + 结转 == 奖励池 + 手续费"""
        return (
            self.distributed_total + self.spv_credit + self.remainder
            == self.pool + self.fees_collected
        )

    def has_negative_credit(self) -> bool:
        return any(
            getattr(c, column) < 0 for c in self.credits.values() for column in CREDIT_COLUMNS
        )


__all__ = ["AccountCredit", "RewardStatement", "CREDIT_COLUMNS", "DISTRIBUTED_COLUMNS"]
