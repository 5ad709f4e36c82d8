"""
检查点纪元权重表

验证权重在两个检查点之间冻结。纪元 e 的权重等于创世账本依次应用
检查点 interval*1 ... interval*e 的质押变更后的结果。每个节点都从场景
推导出同一张表，因此在本地决定检查点之前也能得到之后帧的根权重。
"""

from typing import Dict, List, Optional

from loguru import logger

from stairsim.exceptions import LedgerError
from stairsim.ledger.account import Role
from stairsim.ledger.ledger import StakeLedger
from stairsim.models.config import ProtocolParams, StakeChangeKind, StakeChangeSpec


def day_of_frame(frame: int, frames_per_day: int) -> int:
    """帧号对应的模拟日"""
    return max(0, frame) // frames_per_day


def epoch_of(frame: int, interval: int) -> int:
    """帧所属的权重纪元（检查点帧本身仍属于前一纪元）"""
    if frame <= interval:
        return 0
    return (frame - 1) // interval


def apply_stake_changes(
    ledger: StakeLedger,
    changes: List[StakeChangeSpec],
    checkpoint_frame: int,
    frames_per_day: int,
) -> List[StakeChangeSpec]:
    """
    在检查点应用排队的质押变更

    无法执行的变更被跳过并记录警告。验证质押只在 renew 变更时续期，
    超过续期日未续期的质押在之后的纪元中不计入有效质押。

    Returns:
        实际生效的变更
    """
    day = day_of_frame(checkpoint_frame, frames_per_day)
    applied = []
    for change in changes:
        try:
            if change.kind == StakeChangeKind.DEPOSIT:
                ledger.deposit(change.account, change.amount, day)
            elif change.kind == StakeChangeKind.RENEW:
                ledger.renew_stake(change.account, day)
            else:
                ledger.exit_stake(change.account, change.amount, day)
        except LedgerError as e:
            logger.warning(f"检查点 {checkpoint_frame} 跳过质押变更 {change.account}: {e}")
            continue
        applied.append(change)
    return applied


class EpochSchedule:
    """纪元权重表（惰性扩展）"""

    def __init__(
        self,
        genesis: StakeLedger,
        stake_changes: List[StakeChangeSpec],
        params: ProtocolParams,
        frames_per_day: int,
    ):
        self.params = params
        self.interval = params.checkpoint_frame_interval
        self.frames_per_day = frames_per_day

        self._changes: Dict[int, List[StakeChangeSpec]] = {}
        for change in stake_changes:
            self._changes.setdefault(change.checkpoint, []).append(change)

        self._ledgers: List[StakeLedger] = [genesis.copy()]
        self._powers: List[Dict[str, int]] = []
        self._roles: List[Dict[str, Role]] = []
        self._stakes: List[Dict[str, int]] = []
        self._cache(0)

    def epoch_day(self, epoch: int) -> int:
        """纪元开始时（检查点帧）的模拟日，用于判断质押是否已失效"""
        return day_of_frame(epoch * self.interval, self.frames_per_day)

    def _cache(self, epoch: int) -> None:
        ledger = self._ledgers[epoch]
        day = self.epoch_day(epoch)
        self._stakes.append({a: ledger.effective_stake(a, day) for a in ledger.account_ids})
        self._powers.append(ledger.powers(day))
        self._roles.append(ledger.roles(day))

    def _extend_to(self, epoch: int) -> None:
        while len(self._ledgers) <= epoch:
            e = len(self._ledgers)
            ledger = self._ledgers[-1].copy()
            apply_stake_changes(
                ledger, self.changes_at(e * self.interval), e * self.interval, self.frames_per_day
            )
            self._ledgers.append(ledger)
            self._cache(e)

    # ------------------------------------------------------------------
    # 查询
    # ------------------------------------------------------------------

    def changes_at(self, checkpoint_frame: int) -> List[StakeChangeSpec]:
        return list(self._changes.get(checkpoint_frame, []))

    @property
    def last_change_epoch(self) -> int:
        """最后一次质押变更生效的纪元"""
        if not self._changes:
            return 0
        return max(self._changes) // self.interval

    def epoch_of(self, frame: int) -> int:
        return epoch_of(frame, self.interval)

    def day_of(self, frame: int) -> int:
        return day_of_frame(frame, self.frames_per_day)

    def ledger_at(self, epoch: int) -> StakeLedger:
        """纪元账本（只读使用）"""
        self._extend_to(epoch)
        return self._ledgers[epoch]

    def powers(self, epoch: int) -> Dict[str, int]:
        self._extend_to(epoch)
        return self._powers[epoch]

    def roles(self, epoch: int) -> Dict[str, Role]:
        self._extend_to(epoch)
        return self._roles[epoch]

    def stakes(self, epoch: int) -> Dict[str, int]:
        self._extend_to(epoch)
        return self._stakes[epoch]

    def total_power(self, epoch: int) -> int:
        return sum(self.powers(epoch).values())

    def power_at_frame(self, account_id: str, frame: int) -> int:
        """账户在某帧的根权重"""
        return self.powers(self.epoch_of(frame)).get(account_id, 0)

    def role_at_frame(self, account_id: str, frame: int) -> Optional[Role]:
        return self.roles(self.epoch_of(frame)).get(account_id)

    def joining_role(self, account_id: str) -> Role:
        """账户第一次成为非观察者时的角色（叶子区块的角色戳）"""
        for epoch in range(self.last_change_epoch + 1):
            role = self.roles(epoch).get(account_id)
            if role is not None and role.can_create:
                return role
        return Role.OBSERVER

    def participants(self) -> list:
        """在任一纪元中可以创建区块的账户"""
        return [
            a
            for a in self.ledger_at(0).account_ids
            if self.joining_role(a).can_create
        ]

    def total_power_at_frame(self, frame: int) -> int:
        """统计某帧的根时使用的 W"""
        return self.total_power(self.epoch_of(frame))

    def digest(self, epoch: int) -> str:
        return self.ledger_at(epoch).digest()


__all__ = ["EpochSchedule", "apply_stake_changes", "day_of_frame", "epoch_of"]
