"""
共识记录类型
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from stairsim.models.config import StakeChangeSpec


class Fame(Enum):
    """Clotho 判定结果"""

    UNDECIDED = "undecided"
    FAMOUS = "famous"
    NOT_FAMOUS = "not-famous"


@dataclass
class RootRecord:
    """帧根记录"""

    block_id: str
    creator: str
    frame: int
    weight: int
    decided: Fame = Fame.UNDECIDED
    # 作出判定的投票者所在帧（成为 Atropos 后的排序键）
    atropos_time: Optional[int] = None


@dataclass(frozen=True)
class FinalityRecord:
    """最终顺序中的一条记录"""

    position: int
    block_id: str
    atropos_id: str
    frame: int
    lamport_ts: int


@dataclass(frozen=True)
class Checkpoint:
    """检查点"""

    frame: int
    finalized_count: int
    ledger_digest: str
    applied: Tuple[StakeChangeSpec, ...] = ()


@dataclass
class FrameOutcome:
    """一个帧被决定后产生的结果"""

    frame: int
    atroposes: List[str] = field(default_factory=list)
    records: List[FinalityRecord] = field(default_factory=list)
    checkpoint: Optional[Checkpoint] = None


@dataclass(frozen=True)
class DoubleVote:
    """双重投票（分叉）证据"""

    creator: str
    seq: int
    block_ids: Tuple[str, ...]


__all__ = [
    "Fame",
    "RootRecord",
    "FinalityRecord",
    "Checkpoint",
    "FrameOutcome",
    "DoubleVote",
]
