"""
定点金额

金额以 Decimal 保存，精确到 0.01，舍入一律向下，余数归 SPV。
"""

from decimal import ROUND_DOWN, Decimal
from typing import Union

from stairsim.models.config import ProtocolParams

CENT = Decimal("0.01")
ZERO = Decimal("0.00")

Number = Union[int, float, str, Decimal]


def to_decimal(value: Number) -> Decimal:
    """转为 Decimal（浮点数按其十进制字面量转换）"""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


def money(value: Number) -> Decimal:
    """向下取整到分"""
    return to_decimal(value).quantize(CENT, rounding=ROUND_DOWN)


def daily_block_reward(day: int, params: ProtocolParams) -> Decimal:
    """
    每日区块奖励 R_b(d)

    发放期内为 Z / reward_days（向下取整到分），之后为 0。
    """
    if day < 0:
        raise ValueError(f"day 不能为负: {day}")
    if day >= params.reward_days:
        return ZERO
    return money(Decimal(params.Z_total_block_rewards) / Decimal(params.reward_days))


__all__ = ["CENT", "ZERO", "money", "to_decimal", "daily_block_reward"]
