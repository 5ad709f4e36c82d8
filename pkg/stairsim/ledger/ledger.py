"""
质押账本

维护全部账户、质押与委托头寸，推导角色和验证权重。
所有变更操作先校验、后修改；被拒绝的操作不会留下任何状态变化。
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional

from loguru import logger

from stairsim.exceptions import (
    BelowMinimum,
    DelegationCapExceeded,
    InsufficientBalance,
    LedgerError,
    LockTooShort,
    NoSuchDelegation,
    NothingToWithdraw,
    StillLocked,
    UnknownAccount,
)
from stairsim.ledger.account import (
    Account,
    Role,
    StakeKind,
    role_for_stake,
    validating_power,
)
from stairsim.models.config import ProtocolParams, ScenarioConfig


@dataclass(frozen=True)
class LedgerRow:
    """账本快照行"""

    account_id: str
    tokens_held: int
    txn_staked: int
    validation_staked: int
    delegated_in: int
    role: Role
    power: int


class StakeLedger:
    """质押账本（单写者）"""

    def __init__(self, params: ProtocolParams):
        self.params = params
        self._accounts: Dict[str, Account] = {}
        # target -> {source: amount}
        self._incoming: Dict[str, Dict[str, int]] = {}

    @classmethod
    def from_scenario(cls, config: ScenarioConfig) -> "StakeLedger":
        """
        由场景创建创世账本

        先登记创世委托，剩余持有量全部作为验证质押。
        """
        ledger = cls(config.params)
        for node in config.nodes:
            ledger.open_account(node.id, node.stake)
        for d in config.delegations:
            ledger.delegate(d.source, d.target, d.amount, d.lock_days, current_day=0)
        for node in config.nodes:
            account = ledger.get(node.id)
            free = account.tokens_held - account.committed
            if free >= config.params.epsilon:
                ledger.stake_tokens(node.id, StakeKind.VALIDATION, free, day=0)
        return ledger

    # ------------------------------------------------------------------
    # 查询
    # ------------------------------------------------------------------

    def open_account(self, account_id: str, tokens_held: int = 0) -> Account:
        """开设账户"""
        if account_id in self._accounts:
            raise LedgerError(f"账户已存在: {account_id}", context={"account": account_id})
        if tokens_held < 0:
            raise LedgerError(f"持有量不能为负: {tokens_held}")
        account = Account(id=account_id, tokens_held=tokens_held)
        self._accounts[account_id] = account
        return account

    def get(self, account_id: str) -> Account:
        """获取账户"""
        try:
            return self._accounts[account_id]
        except KeyError:
            raise UnknownAccount(f"账户不存在: {account_id}", context={"account": account_id})

    def __contains__(self, account_id: str) -> bool:
        return account_id in self._accounts

    @property
    def account_ids(self) -> List[str]:
        return sorted(self._accounts)

    def accounts(self) -> Iterable[Account]:
        for account_id in self.account_ids:
            yield self._accounts[account_id]

    def delegations_to(self, account_id: str) -> Dict[str, int]:
        """委托给该账户的 source -> amount"""
        self.get(account_id)
        return dict(self._incoming.get(account_id, {}))

    def delegated_in(self, account_id: str) -> int:
        return sum(self.delegations_to(account_id).values())

    def effective_stake(self, account_id: str, day: Optional[int] = None) -> int:
        """
        有效质押

        持有量扣除委托出去、退出中与已失效的验证质押，再加上委托进来的数量。
        """
        account = self.get(account_id)
        own = (
            account.tokens_held
            - account.delegated_out_total
            - account.exiting
            - account.lapsed_stake(day)
        )
        return own + self.delegated_in(account_id)

    def power(self, account_id: str, day: Optional[int] = None) -> int:
        return validating_power(self.effective_stake(account_id, day), self.params)

    def role(self, account_id: str, day: Optional[int] = None) -> Role:
        return role_for_stake(self.effective_stake(account_id, day), self.params)

    def powers(self, day: Optional[int] = None) -> Dict[str, int]:
        return {a: self.power(a, day) for a in self.account_ids}

    def roles(self, day: Optional[int] = None) -> Dict[str, Role]:
        return {a: self.role(a, day) for a in self.account_ids}

    def total_validating_power(self, day: Optional[int] = None) -> int:
        """全部账户验证权重之和 W"""
        return sum(self.powers(day).values())

    # ------------------------------------------------------------------
    # 质押
    # ------------------------------------------------------------------

    def _require_amount(self, amount: int, what: str) -> None:
        if not isinstance(amount, int) or isinstance(amount, bool):
            raise LedgerError(f"{what} 必须为整数: {amount!r}")
        if amount < max(1, self.params.epsilon):
            raise BelowMinimum(
                f"{what} {amount} 低于最小单位 {self.params.epsilon}",
                context={"amount": amount, "epsilon": self.params.epsilon},
            )

    def _require_free(self, account: Account, amount: int) -> None:
        if account.committed + amount > account.tokens_held:
            raise InsufficientBalance(
                f"账户 {account.id} 可用余额不足: 需要 {amount}, "
                f"可用 {account.tokens_held - account.committed}",
                context={
                    "account": account.id,
                    "amount": amount,
                    "held": account.tokens_held,
                    "committed": account.committed,
                },
            )

    def stake_tokens(
        self, account_id: str, kind: StakeKind, amount: int, day: int = 0
    ) -> Account:
        """增加交易质押或验证质押"""
        account = self.get(account_id)
        self._require_amount(amount, "质押数量")
        self._require_free(account, amount)

        if kind == StakeKind.TRANSACTION:
            account.txn_staked += amount
        else:
            account.validation_staked += amount
            account.stake_renewal_day = day + self.params.lambda_days
        logger.debug(f"{account_id} 质押 {kind.value} {amount}")
        return account

    def unstake_tokens(self, account_id: str, kind: StakeKind, amount: int) -> Account:
        """减少质押头寸"""
        account = self.get(account_id)
        self._require_amount(amount, "解除质押数量")
        current = (
            account.txn_staked if kind == StakeKind.TRANSACTION else account.validation_staked
        )
        if amount > current:
            raise InsufficientBalance(
                f"账户 {account_id} 的 {kind.value} 质押不足: {current} < {amount}"
            )
        remaining = current - amount
        if 0 < remaining < self.params.epsilon:
            raise BelowMinimum(f"剩余质押 {remaining} 低于最小单位")

        if kind == StakeKind.TRANSACTION:
            account.txn_staked = remaining
        else:
            account.validation_staked = remaining
        return account

    def renew_stake(self, account_id: str, day: int) -> Account:
        """续期验证质押"""
        account = self.get(account_id)
        account.stake_renewal_day = day + self.params.lambda_days
        return account

    # ------------------------------------------------------------------
    # 委托
    # ------------------------------------------------------------------

    def _check_cap(self, target: Account, incoming_total: int, held: int) -> None:
        cap = self.params.delegation_cap_multiplier * held
        if incoming_total > cap:
            raise DelegationCapExceeded(
                f"委托给 {target.id} 的总额 {incoming_total} 超过上限 {cap}",
                context={"target": target.id, "incoming": incoming_total, "cap": cap},
            )

    def delegate(
        self,
        source: str,
        target: str,
        amount: int,
        lock_days: int,
        current_day: int = 0,
    ) -> Account:
        """委托代币给目标账户"""
        src = self.get(source)
        dst = self.get(target)
        if source == target:
            raise LedgerError(f"不能委托给自己: {source}")
        self._require_amount(amount, "委托数量")
        if lock_days < 1:
            raise LockTooShort(
                f"锁定期至少 1 天: {lock_days}", context={"lock_days": lock_days}
            )
        self._check_cap(dst, self.delegated_in(target) + amount, dst.tokens_held)
        self._require_free(src, amount)

        src.delegations_out[target] = src.delegations_out.get(target, 0) + amount
        until = current_day + lock_days
        src.delegation_lock_until[target] = max(
            src.delegation_lock_until.get(target, 0), until
        )
        incoming = self._incoming.setdefault(target, {})
        incoming[source] = incoming.get(source, 0) + amount
        logger.debug(f"{source} 委托 {amount} 给 {target}，锁定至第 {until} 天")
        return src

    def undelegate(
        self, source: str, target: str, amount: int, current_day: int
    ) -> Account:
        """撤回委托（锁定期到期当天即可撤回）"""
        src = self.get(source)
        self.get(target)
        if amount < 1:
            raise BelowMinimum(f"撤回数量必须 >= 1: {amount}")
        position = src.delegations_out.get(target, 0)
        if position == 0 or amount > position:
            raise NoSuchDelegation(
                f"{source} -> {target} 的委托不足: {position} < {amount}",
                context={"source": source, "target": target, "position": position},
            )
        lock_until = src.delegation_lock_until.get(target, 0)
        if current_day < lock_until:
            raise StillLocked(
                f"{source} -> {target} 的委托锁定至第 {lock_until} 天",
                context={"lock_until": lock_until, "day": current_day},
            )
        remaining = position - amount
        if 0 < remaining < self.params.epsilon:
            raise BelowMinimum(f"剩余委托 {remaining} 低于最小单位")

        incoming = self._incoming[target]
        if remaining:
            src.delegations_out[target] = remaining
            incoming[source] = remaining
        else:
            del src.delegations_out[target]
            src.delegation_lock_until.pop(target, None)
            del incoming[source]
            if not incoming:
                del self._incoming[target]
        return src

    # ------------------------------------------------------------------
    # 检查点存取
    # ------------------------------------------------------------------

    def deposit(self, account_id: str, amount: int, day: int = 0) -> Account:
        """存入代币并全部作为验证质押（账户不存在时开户）"""
        self._require_amount(amount, "存入数量")
        if account_id not in self._accounts:
            self.open_account(account_id)
        account = self._accounts[account_id]
        account.tokens_held += amount
        account.validation_staked += amount
        account.stake_renewal_day = day + self.params.lambda_days
        return account

    def exit_stake(self, account_id: str, amount: int, day: int) -> Account:
        """退出验证质押，进入锁定期"""
        account = self.get(account_id)
        self._require_amount(amount, "退出数量")
        if amount > account.validation_staked:
            raise InsufficientBalance(
                f"账户 {account_id} 的验证质押不足以退出: "
                f"{account.validation_staked} < {amount}"
            )
        remaining = account.validation_staked - amount
        if 0 < remaining < self.params.epsilon:
            raise BelowMinimum(f"剩余质押 {remaining} 低于最小单位")

        account.validation_staked = remaining
        account.exiting += amount
        account.exit_unlock_day = day + self.params.exit_lock_days
        return account

    def withdraw(self, account_id: str, day: int) -> int:
        """提取已解锁的退出质押，返回提取数量"""
        account = self.get(account_id)
        if account.exiting == 0:
            raise NothingToWithdraw(
                f"账户 {account_id} 没有退出中的质押", context={"account": account_id}
            )
        if day < account.exit_unlock_day:
            raise StillLocked(
                f"账户 {account_id} 的退出质押锁定至第 {account.exit_unlock_day} 天",
                context={"unlock_day": account.exit_unlock_day, "day": day},
            )
        amount = account.exiting
        self._check_cap(account, self.delegated_in(account_id), account.tokens_held - amount)

        account.tokens_held -= amount
        account.exiting = 0
        return amount

    def burn_validation_stake(self, account_id: str) -> int:
        """销毁验证质押，返回销毁数量"""
        account = self.get(account_id)
        amount = account.validation_staked
        account.validation_staked = 0
        account.tokens_held -= amount
        if amount:
            logger.warning(f"销毁 {account_id} 的验证质押 {amount}")
        return amount

    # ------------------------------------------------------------------
    # 快照
    # ------------------------------------------------------------------

    def snapshot(self, day: Optional[int] = None) -> List[LedgerRow]:
        """导出账本快照行"""
        return [
            LedgerRow(
                account_id=a.id,
                tokens_held=a.tokens_held,
                txn_staked=a.txn_staked,
                validation_staked=a.validation_staked,
                delegated_in=self.delegated_in(a.id),
                role=self.role(a.id, day),
                power=self.power(a.id, day),
            )
            for a in self.accounts()
        ]

    def digest(self) -> str:
        """账本状态摘要"""
        state = [
            [
                a.id,
                a.tokens_held,
                a.txn_staked,
                a.validation_staked,
                sorted(a.delegations_out.items()),
                sorted(a.delegation_lock_until.items()),
                a.stake_renewal_day,
                a.exiting,
                a.exit_unlock_day,
            ]
            for a in self.accounts()
        ]
        payload = json.dumps(state, separators=(",", ":")).encode("utf-8")
        return hashlib.blake2b(payload, digest_size=16).hexdigest()

    def copy(self) -> "StakeLedger":
        clone = StakeLedger(self.params)
        clone._accounts = {k: v.copy() for k, v in self._accounts.items()}
        clone._incoming = {k: dict(v) for k, v in self._incoming.items()}
        return clone

    def check_invariants(self) -> List[str]:
        """返回违反账本约束的描述（空列表表示一致）"""
        problems = []
        for a in self.accounts():
            if min(a.tokens_held, a.txn_staked, a.validation_staked, a.exiting) < 0:
                problems.append(f"{a.id}: 存在负数头寸")
            if a.committed > a.tokens_held:
                problems.append(f"{a.id}: 质押与委托之和 {a.committed} 超过持有量 {a.tokens_held}")
            positions = [a.txn_staked, a.validation_staked, *a.delegations_out.values()]
            if any(0 < p < self.params.epsilon for p in positions):
                problems.append(f"{a.id}: 存在低于最小单位的头寸")
            cap = self.params.delegation_cap_multiplier * a.tokens_held
            if self.delegated_in(a.id) > cap:
                problems.append(f"{a.id}: 委托进来的总额超过上限 {cap}")
        return problems


__all__ = ["LedgerRow", "StakeLedger"]
