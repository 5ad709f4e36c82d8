"""
x-DAG 存储

每个节点一份只增不减的加权 DAG。祖先关系以位集（Python int）保存：
第 i 个插入的区块占第 i 位，区块的祖先位集为自身位与所有父区块位集的并。
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from loguru import logger

from stairsim.dag.block import EventBlock, Transaction
from stairsim.exceptions import (
    CrossTypeViolation,
    DuplicateCreator,
    ForkDetected,
    InvalidStructure,
    MissingParents,
    UnknownBlock,
    UnknownFrame,
    UnknownParent,
)
from stairsim.ledger.account import Role


@dataclass(frozen=True)
class ValidationScore:
    """验证分数：可达参考帧根的权重之和"""

    block_id: str
    frame: int
    score: int


def iter_bits(bits: int) -> Iterator[int]:
    """按升序枚举位集中的位下标"""
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


class XDag:
    """单节点 x-DAG"""

    def __init__(self, k: int):
        if k < 2:
            raise InvalidStructure(f"k 必须 >= 2: {k}")
        self.k = k
        self.blocks: Dict[str, EventBlock] = {}
        self.tops: Dict[str, str] = {}
        self.root_index: Dict[int, Dict[str, int]] = {}
        self.creator_types: Dict[str, Role] = {}
        # creator -> 首次发现的分叉证据
        self.cheaters: Dict[str, Tuple[str, ...]] = {}

        self._index: Dict[str, int] = {}
        self._ids: List[str] = []
        self._anc: List[int] = []
        self._forks_seen: List[FrozenSet[str]] = []
        self._slots: Dict[Tuple[str, int], List[str]] = {}
        self._fork_slots: Dict[str, List[Tuple[str, int]]] = {}
        self._heights: Dict[str, int] = {}
        self._other_children: Dict[str, List[str]] = {}

    # ------------------------------------------------------------------
    # 基本查询
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, block_id: str) -> bool:
        return block_id in self._index

    def __iter__(self) -> Iterator[EventBlock]:
        for block_id in self._ids:
            yield self.blocks[block_id]

    def get(self, block_id: str) -> EventBlock:
        try:
            return self.blocks[block_id]
        except KeyError:
            raise UnknownBlock(f"区块不存在: {block_id}", context={"block_id": block_id})

    def index_of(self, block_id: str) -> int:
        try:
            return self._index[block_id]
        except KeyError:
            raise UnknownBlock(f"区块不存在: {block_id}", context={"block_id": block_id})

    def ancestry_bits(self, block_id: str) -> int:
        return self._anc[self.index_of(block_id)]

    def ids_from_bits(self, bits: int) -> List[str]:
        return [self._ids[i] for i in iter_bits(bits)]

    def ancestry(self, block_id: str) -> Set[str]:
        """祖先集合（含自身）"""
        return set(self.ids_from_bits(self.ancestry_bits(block_id)))

    def reaches(self, descendant: str, ancestor: str) -> bool:
        """descendant 是否沿父边可达 ancestor（自反）"""
        bits = self.ancestry_bits(descendant)
        return bool((bits >> self.index_of(ancestor)) & 1)

    def forks_seen(self, block_id: str) -> FrozenSet[str]:
        """该区块祖先中已出现分叉的创建者"""
        return self._forks_seen[self.index_of(block_id)]

    def other_children(self, block_id: str) -> List[str]:
        """以该区块为 other-parent 的子区块"""
        return list(self._other_children.get(block_id, []))

    def height(self, creator: str) -> int:
        """创建者已知的最大 seq，未知为 -1"""
        return self._heights.get(creator, -1)

    def heights(self) -> Dict[str, int]:
        return dict(self._heights)

    def slot(self, creator: str, seq: int) -> List[str]:
        return list(self._slots.get((creator, seq), []))

    def is_cheater(self, creator: str) -> bool:
        return creator in self.cheaters

    def fork_slots(self) -> List[Tuple[str, int, Tuple[str, ...]]]:
        """全部分叉位置 (creator, seq, 区块 id)"""
        result = []
        for creator in sorted(self._fork_slots):
            for slot in self._fork_slots[creator]:
                result.append((creator, slot[1], tuple(sorted(self._slots[slot]))))
        return result

    def missing_parents(self, block: EventBlock) -> List[str]:
        return [p for p in block.parents if p not in self._index]

    # ------------------------------------------------------------------
    # 创建与插入
    # ------------------------------------------------------------------

    def create_event(
        self,
        node_id: str,
        self_top: Optional[str],
        chosen_other_tops: Sequence[str],
        transactions: Sequence[Transaction],
        role: Role,
    ) -> EventBlock:
        """
        创建事件区块（不插入）

        Args:
            node_id: 创建者
            self_top: 创建者当前最新区块，叶子区块为 None
            chosen_other_tops: k-1 个其他创建者的最新区块
            transactions: 交易列表
            role: 创建者当前角色（写入区块）
        """
        if not role.can_create:
            raise InvalidStructure(f"观察者 {node_id} 不能创建区块")

        if self_top is None:
            if chosen_other_tops:
                raise InvalidStructure("叶子区块不能引用其他区块")
            if self.height(node_id) >= 0:
                raise InvalidStructure(f"{node_id} 已有区块，不能再创建叶子区块")
            return EventBlock.build(node_id, 0, None, (), transactions, 0, role)

        if self_top not in self._index:
            raise UnknownParent(f"未知的 self-parent: {self_top}")
        top = self.blocks[self_top]
        if top.creator != node_id:
            raise InvalidStructure(f"self-parent {self_top} 不属于 {node_id}")

        if len(chosen_other_tops) != self.k - 1:
            raise InvalidStructure(
                f"需要 {self.k - 1} 个 other-parent，实际 {len(chosen_other_tops)}"
            )
        for parent in chosen_other_tops:
            if parent not in self._index:
                raise UnknownParent(f"未知的 other-parent: {parent}", context={"parent": parent})

        others = [self.blocks[p] for p in chosen_other_tops]
        self._check_other_parents(node_id, role, others)

        lamport = 1 + max(b.lamport_ts for b in [top, *others])
        return EventBlock.build(
            node_id, top.seq + 1, self_top, chosen_other_tops, transactions, lamport, role
        )

    def _check_other_parents(
        self, creator: str, role: Role, others: Sequence[EventBlock]
    ) -> None:
        creators = [b.creator for b in others]
        if creator in creators or len(set(creators)) != len(creators):
            raise DuplicateCreator(
                f"other-parent 的创建者重复: {creators}",
                context={"creator": creator, "other_creators": creators},
            )
        opposite = role.opposite()
        if not any(b.creator_role_at_creation == opposite for b in others):
            raise CrossTypeViolation(
                f"{role.value} {creator} 缺少 {opposite.value if opposite else '-'} 类型的 other-parent",
                context={"creator": creator, "other_creators": creators},
            )

    def check_structure(self, block: EventBlock) -> None:
        """不依赖父区块的结构检查"""
        if not block.verify_id():
            raise InvalidStructure(f"区块 id 与内容不符: {block.id}")
        if not block.creator_role_at_creation.can_create:
            raise InvalidStructure(f"观察者区块: {block.short()}")
        if any(tx.fee < 0 for tx in block.transactions):
            raise InvalidStructure(f"手续费为负: {block.short()}")
        if block.self_parent is None:
            if block.other_parents or block.seq != 0 or block.lamport_ts != 0:
                raise InvalidStructure(f"叶子区块格式错误: {block.short()}")
            return
        if block.seq < 1:
            raise InvalidStructure(f"非叶子区块 seq 必须 >= 1: {block.short()}")
        if len(block.other_parents) != self.k - 1:
            raise InvalidStructure(
                f"other-parent 数量应为 {self.k - 1}: {block.short()}"
            )

    def _check_against_parents(self, block: EventBlock) -> None:
        if block.self_parent is None:
            return
        top = self.blocks[block.self_parent]
        if top.creator != block.creator or top.seq != block.seq - 1:
            raise InvalidStructure(f"self-parent 链不连续: {block.short()}")
        others = [self.blocks[p] for p in block.other_parents]
        self._check_other_parents(block.creator, block.creator_role_at_creation, others)
        expected = 1 + max(b.lamport_ts for b in [top, *others])
        if block.lamport_ts != expected:
            raise InvalidStructure(
                f"lamport_ts 应为 {expected}: {block.short()}",
                context={"lamport_ts": block.lamport_ts, "expected": expected},
            )

    def insert_block(self, block: EventBlock) -> bool:
        """
        插入区块

        Returns:
            True 表示新插入，False 表示已存在（幂等）

        Raises:
            MissingParents: 父区块尚未到达（调用方缓存后重试）
            InvalidStructure / DuplicateCreator / CrossTypeViolation: 结构错误
            ForkDetected: 同一创建者同一 seq 的第二个区块（已保存）
        """
        if block.id in self._index:
            return False

        self.check_structure(block)
        missing = self.missing_parents(block)
        if missing:
            raise MissingParents(
                f"{block.short()} 缺少 {len(missing)} 个父区块", missing=missing
            )
        self._check_against_parents(block)

        idx = len(self._ids)
        bits = 1 << idx
        seen: Set[str] = set()
        for parent in block.parents:
            p = self._index[parent]
            bits |= self._anc[p]
            seen |= self._forks_seen[p]

        for creator, slots in self._fork_slots.items():
            if creator in seen:
                continue
            for slot in slots:
                hits = sum(1 for b in self._slots[slot] if (bits >> self._index[b]) & 1)
                if hits >= 2:
                    seen.add(creator)
                    break

        self._index[block.id] = idx
        self._ids.append(block.id)
        self._anc.append(bits)
        self._forks_seen.append(frozenset(seen))
        self.blocks[block.id] = block
        self.creator_types[block.creator] = block.creator_role_at_creation
        for parent in block.other_parents:
            self._other_children.setdefault(parent, []).append(block.id)

        current = self.tops.get(block.creator)
        if current is None or block.seq > self.blocks[current].seq:
            self.tops[block.creator] = block.id
        self._heights[block.creator] = max(self.height(block.creator), block.seq)

        slot = (block.creator, block.seq)
        members = self._slots.setdefault(slot, [])
        members.append(block.id)
        if len(members) >= 2:
            if len(members) == 2:
                self._fork_slots.setdefault(block.creator, []).append(slot)
            evidence = tuple(sorted(members))
            self.cheaters.setdefault(block.creator, evidence)
            logger.debug(f"发现分叉: {block.creator} seq={block.seq} {evidence}")
            raise ForkDetected(
                f"{block.creator} 在 seq={block.seq} 处分叉",
                creator=block.creator,
                block_ids=evidence,
            )
        return True

    # ------------------------------------------------------------------
    # 根与分数
    # ------------------------------------------------------------------

    def register_root(self, frame: int, block_id: str, weight: int) -> None:
        """登记帧根（由共识引擎调用）"""
        self.index_of(block_id)
        self.root_index.setdefault(frame, {})[block_id] = weight

    def reachable_roots(self, block_id: str, frame: int) -> Set[str]:
        """
        从区块可达的某帧根（自反）

        祖先中出现分叉的创建者的根不计入。
        """
        idx = self.index_of(block_id)
        if frame not in self.root_index:
            raise UnknownFrame(f"帧 {frame} 尚无根索引", context={"frame": frame})
        bits = self._anc[idx]
        excluded = self._forks_seen[idx]
        return {
            root
            for root in self.root_index[frame]
            if (bits >> self._index[root]) & 1 and self.blocks[root].creator not in excluded
        }

    def reach_weight(self, block_id: str, frame: int) -> int:
        roots = self.root_index.get(frame, {})
        return sum(roots[r] for r in self.reachable_roots(block_id, frame))

    def validation_score(self, block_id: str, frame: int) -> ValidationScore:
        """验证分数 s(v)"""
        return ValidationScore(block_id, frame, self.reach_weight(block_id, frame))

    def topological_order(
        self, block_ids: Iterable[str], frames: Optional[Dict[str, int]] = None
    ) -> List[str]:
        """按 (lamport_ts, 定序帧, id) 的确定性全序"""
        frames = frames or {}
        ids = list(block_ids)
        for block_id in ids:
            self.get(block_id)
        return sorted(
            ids, key=lambda b: (self.blocks[b].lamport_ts, frames.get(b, 0), b)
        )

    def blocks_above(self, known_heights: Dict[str, int]) -> List[EventBlock]:
        """超出对方已知高度的全部区块，父区块在前"""
        result = []
        for creator, height in self._heights.items():
            start = known_heights.get(creator, -1) + 1
            for seq in range(start, height + 1):
                for block_id in self._slots.get((creator, seq), []):
                    result.append(self.blocks[block_id])
        result.sort(key=lambda b: (b.lamport_ts, b.id))
        return result


__all__ = ["ValidationScore", "XDag", "iter_bits"]
