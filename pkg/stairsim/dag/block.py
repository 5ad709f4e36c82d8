"""
事件区块

不可变的 DAG 顶点。区块 id 为规范序列化内容的 blake2b 摘要。
"""

import hashlib
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from stairsim.ledger.account import Role

ID_DIGEST_SIZE = 16


@dataclass(frozen=True)
class Transaction:
    """不透明交易负载与手续费"""

    payload: bytes
    fee: int


def payload_digest(transactions: Sequence[Transaction]) -> str:
    """交易列表摘要"""
    canonical = json.dumps(
        [[tx.payload.hex(), tx.fee] for tx in transactions], separators=(",", ":")
    ).encode("utf-8")
    return hashlib.blake2b(canonical, digest_size=ID_DIGEST_SIZE).hexdigest()


def compute_block_id(
    creator: str,
    self_parent: Optional[str],
    other_parents: Sequence[str],
    digest: str,
    lamport_ts: int,
    seq: int,
) -> str:
    """按固定字段顺序计算区块 id"""
    canonical = json.dumps(
        [creator, self_parent, list(other_parents), digest, lamport_ts, seq],
        separators=(",", ":"),
    ).encode("utf-8")
    return hashlib.blake2b(canonical, digest_size=ID_DIGEST_SIZE).hexdigest()


@dataclass(frozen=True)
class EventBlock:
    """事件区块"""

    id: str
    creator: str
    seq: int
    self_parent: Optional[str]
    other_parents: Tuple[str, ...]
    transactions: Tuple[Transaction, ...]
    lamport_ts: int
    creator_role_at_creation: Role
    payload_digest: str

    @classmethod
    def build(
        cls,
        creator: str,
        seq: int,
        self_parent: Optional[str],
        other_parents: Sequence[str],
        transactions: Sequence[Transaction],
        lamport_ts: int,
        role: Role,
    ) -> "EventBlock":
        """由内容构造区块并计算 id"""
        digest = payload_digest(transactions)
        return cls(
            id=compute_block_id(creator, self_parent, other_parents, digest, lamport_ts, seq),
            creator=creator,
            seq=seq,
            self_parent=self_parent,
            other_parents=tuple(other_parents),
            transactions=tuple(transactions),
            lamport_ts=lamport_ts,
            creator_role_at_creation=role,
            payload_digest=digest,
        )

    @property
    def is_leaf(self) -> bool:
        return self.self_parent is None and not self.other_parents

    @property
    def parents(self) -> List[str]:
        """全部父区块 id（self-parent 在前）"""
        if self.self_parent is None:
            return list(self.other_parents)
        return [self.self_parent, *self.other_parents]

    @property
    def fee_total(self) -> int:
        return sum(tx.fee for tx in self.transactions)

    def verify_id(self) -> bool:
        """id 与内容是否一致"""
        if payload_digest(self.transactions) != self.payload_digest:
            return False
        return self.id == compute_block_id(
            self.creator,
            self.self_parent,
            self.other_parents,
            self.payload_digest,
            self.lamport_ts,
            self.seq,
        )

    def short(self) -> str:
        return f"{self.creator}#{self.seq}({self.id[:8]})"


__all__ = [
    "ID_DIGEST_SIZE",
    "Transaction",
    "EventBlock",
    "payload_digest",
    "compute_block_id",
]
