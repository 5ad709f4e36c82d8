"""
消息投递队列

按 (投递 tick, 优先级, 发送序号) 排序的优先级队列，投递顺序只取决于发送顺序。
"""

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import List

from stairsim.gossip.messages import SyncMessage


class Priority(Enum):
    """投递优先级（同一 tick 内）"""

    HIGH = 0  # 分叉证据
    NORMAL = 1


@dataclass(order=True)
class ScheduledMessage:
    """待投递消息"""

    deliver_at: int
    priority: int
    seq: int
    message: SyncMessage = field(compare=False)
    sent_at: int = field(default=0, compare=False)


class DeliveryQueue:
    """投递队列"""

    def __init__(self):
        self._heap: List[ScheduledMessage] = []
        self._seq = 0
        self._total_queued = 0
        self._total_delivered = 0

    def put(
        self,
        message: SyncMessage,
        sent_at: int,
        deliver_at: int,
        priority: Priority = Priority.NORMAL,
    ) -> ScheduledMessage:
        """加入队列（投递时间不早于发送时间）"""
        if deliver_at < sent_at:
            raise ValueError(f"投递时间 {deliver_at} 早于发送时间 {sent_at}")
        item = ScheduledMessage(
            deliver_at=deliver_at,
            priority=priority.value,
            seq=self._seq,
            message=message,
            sent_at=sent_at,
        )
        self._seq += 1
        heapq.heappush(self._heap, item)
        self._total_queued += 1
        return item

    def pop_due(self, tick: int) -> List[ScheduledMessage]:
        """取出所有投递时间 <= tick 的消息"""
        due = []
        while self._heap and self._heap[0].deliver_at <= tick:
            due.append(heapq.heappop(self._heap))
        self._total_delivered += len(due)
        return due

    def next_due(self) -> int:
        """下一条消息的投递时间，空队列为 -1"""
        return self._heap[0].deliver_at if self._heap else -1

    def qsize(self) -> int:
        return len(self._heap)

    def empty(self) -> bool:
        return not self._heap

    def get_stats(self) -> dict:
        """获取队列统计"""
        return {
            "pending": self.qsize(),
            "total_queued": self._total_queued,
            "total_delivered": self._total_delivered,
        }


__all__ = ["Priority", "ScheduledMessage", "DeliveryQueue"]
