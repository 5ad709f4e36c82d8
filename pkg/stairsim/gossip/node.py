"""
模拟节点

每个节点运行两个循环：创建循环（选择引用节点、发送同步请求、创建并广播区块）
与响应循环（应答同步请求、插入收到的区块并推进共识）。
"""

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from stairsim.consensus.engine import ConsensusEngine
from stairsim.dag.block import EventBlock, Transaction
from stairsim.dag.xdag import XDag
from stairsim.exceptions import (
    CrossTypeViolation,
    DagError,
    ForkDetected,
    GossipError,
)
from stairsim.gossip.messages import MessageKind, SyncMessage
from stairsim.gossip.peers import k_peer_selection
from stairsim.gossip.queue import Priority
from stairsim.ledger.account import Role
from stairsim.ledger.schedule import EpochSchedule
from stairsim.logger import node_logger
from stairsim.models.config import FaultBehavior, ScenarioConfig

MAX_CREATE_ATTEMPTS = 3

Outgoing = Tuple[SyncMessage, Priority]


def node_rng(seed: int, node_id: str) -> np.random.Generator:
    """节点独立的随机数发生器（只由场景种子与节点 id 决定）"""
    key = int.from_bytes(hashlib.blake2b(node_id.encode("utf-8"), digest_size=8).digest(), "big")
    return np.random.default_rng(np.random.SeedSequence([seed, key]))


@dataclass
class NodeStats:
    """节点计数器"""

    blocks_created: int = 0
    skipped_rounds: int = 0
    malformed_dropped: int = 0
    forks_detected: int = 0
    messages_dropped: int = 0
    buffered: int = 0


class SimNode:
    """模拟节点"""

    def __init__(
        self,
        node_id: str,
        config: ScenarioConfig,
        schedule: EpochSchedule,
        participants: Sequence[str],
    ):
        self.id = node_id
        self.config = config
        self.params = config.params
        self.fault = config.fault_for(node_id)
        self.schedule = schedule
        self.peers = sorted(p for p in participants if p != node_id)

        self.dag = XDag(self.params.k)
        self.engine = ConsensusEngine(self.dag, schedule, node_id=node_id)
        self.rng = node_rng(config.seed, node_id)

        self.pending: Dict[str, EventBlock] = {}
        self._waiting: Dict[str, Set[str]] = {}
        self._evidence_sent: Set[Tuple[str, int]] = set()
        self.final_ticks: Dict[str, int] = {}
        self.created: Dict[str, int] = {}
        self.stats = NodeStats()
        self.log = node_logger(node_id)

    @property
    def honest(self) -> bool:
        return self.fault.behavior == FaultBehavior.HONEST

    def is_silent(self, tick: int) -> bool:
        return self.fault.behavior == FaultBehavior.SILENT_AFTER and tick > self.fault.param

    def latency(self) -> int:
        return int(self.rng.integers(self.config.latency_min, self.config.latency_max + 1))

    def _make_transactions(self) -> List[Transaction]:
        count = int(self.rng.integers(0, self.config.max_txns_per_block + 1))
        return [
            Transaction(
                payload=self.rng.bytes(8),
                fee=int(self.rng.integers(0, self.config.max_fee + 1)),
            )
            for _ in range(count)
        ]

    def _role_at(self, frame: int) -> Role:
        return self.schedule.role_at_frame(self.id, max(0, frame)) or Role.OBSERVER

    def _wanted(self) -> List[str]:
        """缓存区块仍缺少的父区块"""
        return sorted(
            p for p in self._waiting if p not in self.dag and p not in self.pending
        )

    # ------------------------------------------------------------------
    # 创建循环
    # ------------------------------------------------------------------

    def node_tick_create(self, tick: int) -> List[Outgoing]:
        """本 tick 的创建机会"""
        if self.is_silent(tick):
            return []
        if self.dag.height(self.id) < 0:
            return self._create_leaf(tick)
        if self.rng.random() >= self.config.create_probability:
            return []

        out = self._create_block(tick)
        if self.fault.behavior == FaultBehavior.SPAM:
            for _ in range(int(self.fault.param)):
                out.extend(self._create_block(tick))
        return out

    def _create_leaf(self, tick: int) -> List[Outgoing]:
        role = self.schedule.joining_role(self.id)
        if not role.can_create or not self._role_at(self.engine.max_frame).can_create:
            return []
        block = self.dag.create_event(self.id, None, [], self._make_transactions(), role)
        return self._commit(block, tick)

    def select_peers(self, role: Role) -> List[str]:
        """以本地已知的最新区块为候选执行 k-PeerSelection"""
        epoch = self.schedule.epoch_of(max(0, self.engine.max_frame))
        stakes = self.schedule.stakes(epoch)
        users: Dict[str, int] = {}
        validators: Dict[str, int] = {}
        for peer in self.peers:
            top = self.dag.tops.get(peer)
            if top is None or self.dag.is_cheater(peer):
                continue
            stamp = self.dag.blocks[top].creator_role_at_creation
            bucket = users if stamp == Role.USER else validators
            bucket[peer] = max(1, stakes.get(peer, 0))
        return k_peer_selection(
            self.id, role, users, validators, self.rng, self.params.k, self.config.selection_mode
        )

    def _create_block(self, tick: int) -> List[Outgoing]:
        top = self.dag.tops[self.id]
        role = self._role_at(self.engine.frame_of(top))

        for _ in range(MAX_CREATE_ATTEMPTS):
            if not role.can_create:
                break
            try:
                peers = self.select_peers(role)
            except GossipError as e:
                self.log.debug(f"tick {tick} 跳过创建: {e}")
                break
            others = [self.dag.tops[p] for p in peers]
            frame = max(self.engine.frame_of(b) for b in [top, *others])
            actual = self._role_at(frame)
            if actual != role:
                role = actual
                continue
            try:
                block = self.dag.create_event(
                    self.id, top, others, self._make_transactions(), role
                )
            except CrossTypeViolation:
                continue

            out: List[Outgoing] = [
                (SyncMessage.request(self.id, p, self.dag.heights(), self._wanted()), Priority.NORMAL)
                for p in peers
            ]
            twin_round = (
                self.fault.behavior == FaultBehavior.EQUIVOCATE
                and self.rng.random() < self.fault.param
            )
            if twin_round:
                out.extend(self._commit(block, tick, broadcast=False))
                out.extend(self._equivocate(block))
            else:
                out.extend(self._commit(block, tick))
            return out

        self.stats.skipped_rounds += 1
        return []

    def _equivocate(self, block: EventBlock) -> List[Outgoing]:
        """同 seq 双块，分别发给互不相交的两半节点"""
        twin = EventBlock.build(
            self.id,
            block.seq,
            block.self_parent,
            block.other_parents,
            [*block.transactions, Transaction(payload=b"twin" + self.rng.bytes(8), fee=0)],
            block.lamport_ts,
            block.creator_role_at_creation,
        )
        order = [self.peers[int(i)] for i in self.rng.permutation(len(self.peers))]
        half = max(1, len(order) // 2)
        self.log.debug(f"制造分叉 {block.short()} / {twin.short()}")
        out = [(SyncMessage.broadcast(self.id, p, [block]), Priority.NORMAL) for p in order[:half]]
        out += [(SyncMessage.broadcast(self.id, p, [twin]), Priority.NORMAL) for p in order[half:]]
        return out

    def _commit(self, block: EventBlock, tick: int, broadcast: bool = True) -> List[Outgoing]:
        """插入自己的区块并推进共识"""
        out = self._insert_ready(block, tick)
        self._advance(tick)
        self.stats.blocks_created += 1
        self.created[block.id] = tick
        if broadcast:
            out += [(SyncMessage.broadcast(self.id, p, [block]), Priority.NORMAL) for p in self.peers]
        return out

    # ------------------------------------------------------------------
    # 响应循环
    # ------------------------------------------------------------------

    def node_tick_respond(self, message: SyncMessage, tick: int) -> List[Outgoing]:
        """处理投递到本节点的消息"""
        if self.is_silent(tick):
            self.stats.messages_dropped += 1
            return []

        if message.kind == MessageKind.SYNC_REQUEST:
            blocks = {b.id: b for b in self.dag.blocks_above(message.known_heights)}
            for wanted in message.wanted:
                if wanted in self.dag:
                    blocks.setdefault(wanted, self.dag.blocks[wanted])
            ordered = sorted(blocks.values(), key=lambda b: (b.lamport_ts, b.id))
            return [(SyncMessage.response(self.id, message.sender, ordered), Priority.NORMAL)]

        return self.receive_blocks(message.blocks, message.sender, tick)

    def receive_blocks(
        self, blocks: Sequence[EventBlock], sender: Optional[str], tick: int
    ) -> List[Outgoing]:
        """插入收到的区块（缺父区块时缓存并请求）"""
        out: List[Outgoing] = []
        for block in sorted(blocks, key=lambda b: (b.lamport_ts, b.id)):
            out.extend(self._accept(block, sender, tick))
        self._advance(tick)
        return out

    def _accept(self, block: EventBlock, sender: Optional[str], tick: int) -> List[Outgoing]:
        if block.id in self.dag or block.id in self.pending:
            return []
        try:
            self.dag.check_structure(block)
        except DagError as e:
            self.stats.malformed_dropped += 1
            self.log.warning(f"丢弃格式错误的区块 {block.id[:8]}: {e}")
            return []

        missing = self.dag.missing_parents(block)
        if missing:
            self.pending[block.id] = block
            for parent in missing:
                self._waiting.setdefault(parent, set()).add(block.id)
            self.stats.buffered += 1
            wanted = [m for m in missing if m not in self.pending]
            if wanted and sender and sender != self.id:
                return [
                    (SyncMessage.request(self.id, sender, self.dag.heights(), wanted), Priority.NORMAL)
                ]
            return []
        return self._insert_ready(block, tick)

    def _insert_ready(self, block: EventBlock, tick: int) -> List[Outgoing]:
        """插入父区块齐全的区块，并释放等待它的缓存区块"""
        out: List[Outgoing] = []
        stack = [block]
        while stack:
            current = stack.pop()
            if current.id in self.dag:
                continue
            out.extend(self._insert_one(current))
            if current.id not in self.dag:
                continue
            for child_id in sorted(self._waiting.pop(current.id, ()), reverse=True):
                child = self.pending.get(child_id)
                if child is not None and not self.dag.missing_parents(child):
                    del self.pending[child_id]
                    stack.append(child)
        return out

    def _insert_one(self, block: EventBlock) -> List[Outgoing]:
        expected = self.engine.expected_role(block)
        if expected != block.creator_role_at_creation:
            self.stats.malformed_dropped += 1
            self.log.warning(
                f"角色戳不符 {block.short()}: "
                f"{block.creator_role_at_creation.value} != {expected.value if expected else '-'}"
            )
            return []
        try:
            self.dag.insert_block(block)
        except ForkDetected as e:
            self.engine.on_block_inserted(block.id)
            self.stats.forks_detected += 1
            self.log.warning(f"发现 {e.creator} 的分叉 seq={block.seq}")
            return self._fork_evidence(block, e.block_ids)
        except DagError as e:
            self.stats.malformed_dropped += 1
            self.log.warning(f"丢弃区块 {block.short()}: {e}")
            return []
        self.engine.on_block_inserted(block.id)
        return []

    def _fork_evidence(self, block: EventBlock, block_ids: Sequence[str]) -> List[Outgoing]:
        """诚实节点把分叉双方广播出去"""
        slot = (block.creator, block.seq)
        if not self.honest or slot in self._evidence_sent:
            return []
        self._evidence_sent.add(slot)
        evidence = [self.dag.blocks[b] for b in block_ids]
        return [(SyncMessage.broadcast(self.id, p, evidence), Priority.HIGH) for p in self.peers]

    def _advance(self, tick: int) -> None:
        for outcome in self.engine.advance():
            for record in outcome.records:
                self.final_ticks[record.block_id] = tick

    @property
    def finality_log(self):
        return self.engine.finalized


__all__ = ["NodeStats", "SimNode", "node_rng", "MAX_CREATE_ATTEMPTS"]
