"""
Saga 积分

一个事件的 other-parent 成为 Atropos 时，该事件的创建者获得 1 分；
每个事件至多计一次，同一创建者同一 seq 的分叉双块共用一次计分。
观察者举报获得的积分单独记在 granted 中。
"""

from typing import Dict, Iterable, Optional, Set, Tuple

from stairsim.dag.xdag import XDag


class SagaLedger:
    """Saga 积分账本（只增不减）"""

    def __init__(self):
        self.points: Dict[str, int] = {}
        self.earned: Dict[str, int] = {}
        self.awarded: Set[str] = set()
        self.slots: Set[Tuple[str, int]] = set()

    def alpha(self, account_id: str) -> int:
        return self.points.get(account_id, 0)

    def award_event(self, event_id: str, creator: str, seq: Optional[int] = None) -> bool:
        """为事件计分，事件或其 (creator, seq) 已计过返回 False"""
        slot = (creator, seq)
        if event_id in self.awarded or (seq is not None and slot in self.slots):
            return False
        self.awarded.add(event_id)
        if seq is not None:
            self.slots.add(slot)
        self.points[creator] = self.alpha(creator) + 1
        self.earned[creator] = self.earned.get(creator, 0) + 1
        return True

    def grant(self, account_id: str, amount: int) -> None:
        """直接授予积分（观察者举报、升级时带入）"""
        if amount < 0:
            raise ValueError(f"Saga 积分不能减少: {amount}")
        self.points[account_id] = self.alpha(account_id) + amount

    def granted(self, account_id: str) -> int:
        return self.alpha(account_id) - self.earned.get(account_id, 0)

    def snapshot(self) -> Dict[str, int]:
        return dict(sorted(self.points.items()))


def award_saga_points(saga: SagaLedger, atroposes: Iterable[str], dag: XDag) -> int:
    """
    为新 Atropos 的 other-parent 子事件计分

    Returns:
        本次新增的积分数
    """
    awarded = 0
    for atropos in sorted(atroposes):
        for child_id in sorted(dag.other_children(atropos)):
            child = dag.blocks[child_id]
            if saga.award_event(child_id, child.creator, child.seq):
                awarded += 1
    return awarded


__all__ = ["SagaLedger", "award_saga_points"]
