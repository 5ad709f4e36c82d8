"""
奖励分配

验证奖励按 alpha_i * w_i 比例分配；交易费按 phi 抽取 SPV 佣金；
验证者收入中归属委托人的部分扣除 mu 佣金后按委托比例分给委托人。
"""

from decimal import Decimal
from typing import Dict, Iterable, Optional, Sequence, Set, Tuple

from loguru import logger

from stairsim.exceptions import NotFlagged
from stairsim.ledger.ledger import StakeLedger
from stairsim.models.config import FeeMode, ObserverRewardMode, ProtocolParams
from stairsim.rewards.money import ZERO, money, to_decimal
from stairsim.rewards.saga import SagaLedger
from stairsim.rewards.statement import RewardStatement


def split_with_delegators(
    gross: Decimal,
    validator: str,
    ledger: StakeLedger,
    params: ProtocolParams,
    column: str = "validation_reward",
) -> RewardStatement:
    """
    与委托人分账

    委托人部分为 gross * D / (D + S)，其中 D 为委托进来的总额、S 为验证者持有量；
    每个委托人按比例获得其份额的 (1 - mu)，验证者保留自有部分与 mu 佣金。
    """
    fragment = RewardStatement()
    gross = money(gross)
    if gross <= 0:
        return fragment

    delegations = ledger.delegations_to(validator) if validator in ledger else {}
    delegated = sum(delegations.values())
    own_stake = ledger.get(validator).tokens_held if validator in ledger else 0
    basis = delegated + own_stake
    if delegated == 0 or basis == 0:
        fragment.credit(validator, column, gross)
        return fragment

    mu = to_decimal(params.mu_validator_commission)
    paid = ZERO
    for source in sorted(delegations):
        share = money(gross * delegations[source] / basis * (1 - mu))
        fragment.credit(source, "delegation_share", share)
        paid += share

    commission = money(gross * delegated / basis * mu)
    own = money(gross * own_stake / basis)
    fragment.credit(validator, column, own)
    fragment.credit(validator, "commission", commission)
    fragment.spv_credit += gross - own - commission - paid
    return fragment


def distribute_validation_rewards(
    pool: Decimal,
    saga: SagaLedger,
    powers: Dict[str, int],
    ledger: StakeLedger,
    params: ProtocolParams,
) -> RewardStatement:
    """
    按 alpha_i * w_i / W' 分配奖励池

    W' 为 0 时整个奖励池结转。
    """
    fragment = RewardStatement(pool=money(pool))
    weighted = {
        account: saga.alpha(account) * power
        for account, power in sorted(powers.items())
        if power > 0
    }
    total = sum(weighted.values())
    if total == 0:
        fragment.remainder = fragment.pool
        return fragment

    paid = ZERO
    for account, weight in weighted.items():
        if weight == 0:
            continue
        gross = money(fragment.pool * weight / total)
        paid += gross
        fragment.absorb(split_with_delegators(gross, account, ledger, params))
    fragment.spv_credit += fragment.pool - paid
    return fragment


def route_transaction_fees(
    blocks: Iterable[Tuple[str, int]],
    ledger: StakeLedger,
    params: ProtocolParams,
    fee_mode: FeeMode = FeeMode.CREATOR,
    validating_accounts: Sequence[str] = (),
) -> RewardStatement:
    """
    分配交易费

    Args:
        blocks: (创建者, 手续费) 序列
        fee_mode: creator 归创建者；equal_split 在全部验证账户间平分
        validating_accounts: equal_split 模式下参与平分的账户
    """
    fragment = RewardStatement()
    phi = to_decimal(params.phi_spv_commission)
    pooled = ZERO

    for creator, fee in blocks:
        if fee <= 0:
            continue
        fee_amount = Decimal(fee)
        creator_side = money(fee_amount * (1 - phi))
        fragment.fees_collected += fee_amount
        fragment.spv_credit += fee_amount - creator_side
        if fee_mode == FeeMode.CREATOR:
            fragment.absorb(split_with_delegators(creator_side, creator, ledger, params, "fees"))
        else:
            pooled += creator_side

    if pooled > 0:
        accounts = sorted(validating_accounts)
        if not accounts:
            fragment.spv_credit += pooled
            return fragment
        each = money(pooled / len(accounts))
        for account in accounts:
            fragment.absorb(split_with_delegators(each, account, ledger, params, "fees"))
        fragment.spv_credit += pooled - each * len(accounts)
    return fragment


def burn_deposit(
    ledger: StakeLedger,
    account: str,
    flagged: Set[str],
    reporter: Optional[str] = None,
    reporter_fraction: float = 0.10,
    mode: ObserverRewardMode = ObserverRewardMode.BURN_SHARE,
    saga: Optional[SagaLedger] = None,
    points: int = 1,
    day: Optional[int] = None,
) -> RewardStatement:
    """
    销毁双重投票者的验证质押

    举报者按 reporter_fraction 获得销毁额的一部分，或在 saga 模式下获得积分。

    Raises:
        NotFlagged: 账户未被标记
    """
    if account not in flagged:
        raise NotFlagged(f"账户未被标记为双重投票者: {account}", context={"account": account})

    stake = Decimal(ledger.burn_validation_stake(account))
    fragment = RewardStatement(day=day)
    burned = stake
    if reporter is not None:
        if mode == ObserverRewardMode.BURN_SHARE:
            share = money(stake * to_decimal(reporter_fraction))
            fragment.credit(reporter, "reporter_reward", share)
            burned = stake - share
        elif saga is not None:
            saga.grant(reporter, points)
    fragment.credit(account, "burn", burned)
    flagged.discard(account)
    logger.info(f"销毁 {account} 的押金 {burned}" + (f"，举报者 {reporter}" if reporter else ""))
    return fragment


__all__ = [
    "split_with_delegators",
    "distribute_validation_rewards",
    "route_transaction_fees",
    "burn_deposit",
]
