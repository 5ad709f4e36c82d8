"""
共识引擎

每个节点一份：分配帧、在 2W/3 阈值选举根、以加权虚拟投票判定 Clotho、
按帧定序 Atropos，并在每个检查点帧应用质押变更。
输出只取决于 DAG 内容与参数。
"""

from typing import Dict, List, Optional, Tuple

from stairsim.consensus.records import (
    Checkpoint,
    DoubleVote,
    Fame,
    FinalityRecord,
    FrameOutcome,
    RootRecord,
)
from stairsim.dag.block import EventBlock
from stairsim.dag.xdag import XDag
from stairsim.exceptions import (
    ConsensusError,
    EarlierFramesUndecided,
    UnknownBlock,
)
from stairsim.ledger.account import Role
from stairsim.ledger.ledger import StakeLedger
from stairsim.ledger.schedule import EpochSchedule, apply_stake_changes
from stairsim.logger import node_logger

# 在 f+2 之后多少帧开始出现硬币帧
COIN_FRAME_DELAY = 8


def exceeds_two_thirds(weight: int, total: int) -> bool:
    """weight > 2W/3（严格）"""
    return 3 * weight > 2 * total


def coin_bit(block_id: str) -> bool:
    """区块 id 摘要的最低位"""
    return bool(int(block_id[-1], 16) & 1)


def is_coin_frame(candidate_frame: int, voter_frame: int) -> bool:
    """从 f+2 之后第 8 帧起每隔一帧为硬币帧"""
    distance = voter_frame - (candidate_frame + 2)
    return distance >= COIN_FRAME_DELAY and (distance - COIN_FRAME_DELAY) % 2 == 0


class ConsensusEngine:
    """单节点共识状态"""

    def __init__(
        self,
        dag: XDag,
        schedule: EpochSchedule,
        ledger: Optional[StakeLedger] = None,
        node_id: str = "",
    ):
        self.dag = dag
        self.schedule = schedule
        self.interval = schedule.interval
        self.ledger = ledger if ledger is not None else schedule.ledger_at(0).copy()
        self.node_id = node_id
        self.log = node_logger(node_id or "-")

        self.frames: Dict[str, int] = {}
        self.roots: Dict[str, RootRecord] = {}
        self.frame_roots: Dict[int, List[str]] = {}
        self.last_decided = -1
        self.finalized: List[FinalityRecord] = []
        self.outcomes: List[FrameOutcome] = []
        self.checkpoints: List[Checkpoint] = []

        self._votes: Dict[Tuple[str, str], bool] = {}
        self._final_bits = 0
        self._final_frame: Dict[str, int] = {}
        self._dirty = False

    # ------------------------------------------------------------------
    # 帧分配
    # ------------------------------------------------------------------

    def reference_frame(self, block: EventBlock) -> int:
        """根测试所统计的帧：父区块的最大帧，叶子为 0"""
        if block.is_leaf:
            return 0
        return max(self.frame_of(p) for p in block.parents)

    def frame_of(self, block_id: str) -> int:
        try:
            return self.frames[block_id]
        except KeyError:
            raise UnknownBlock(f"区块尚未分配帧: {block_id}", context={"block_id": block_id})

    def expected_role(self, block: EventBlock) -> Optional[Role]:
        """
        区块创建者在其参考帧纪元中的角色（用于校验角色戳）

        叶子区块使用创建者第一次成为非观察者时的角色。
        """
        if block.is_leaf:
            return self.schedule.joining_role(block.creator)
        return self.schedule.role_at_frame(block.creator, self.reference_frame(block))

    def passes_threshold(self, block_id: str, frame: int) -> bool:
        """可达的帧 frame 根权重是否 > 2W/3"""
        if frame < 0 or frame not in self.dag.root_index:
            return False
        weight = self.dag.reach_weight(block_id, frame)
        return exceeds_two_thirds(weight, self.schedule.total_power_at_frame(frame))

    def enters_frame(self, block: EventBlock, frame: int) -> bool:
        """区块是否为创建者在该帧的第一个区块"""
        return block.self_parent is not None and self.frame_of(block.self_parent) < frame

    def assign_frame(self, block_id: str) -> int:
        """
        为已插入的区块分配帧

        叶子为帧 0 的根。否则 f 为父区块最大帧，若可达的帧 f 根权重 > 2W/3
        则成为帧 f+1 的根，否则留在帧 f。留在帧 f 的区块若是创建者在该帧的
        第一个区块，且可达的帧 f-1 根权重 > 2W/3，同样是帧 f 的根。
        """
        if block_id in self.frames:
            return self.frames[block_id]
        block = self.dag.get(block_id)

        if block.is_leaf:
            frame, is_root = 0, True
        else:
            f = self.reference_frame(block)
            if self.passes_threshold(block_id, f):
                frame, is_root = f + 1, True
            else:
                frame = f
                is_root = self.enters_frame(block, f) and self.passes_threshold(block_id, f - 1)

        root_weight = self.schedule.power_at_frame(block.creator, frame) if is_root else 0
        if is_root and root_weight == 0:
            # 权重为 0 的创建者不能成为根，也不能开启新帧
            is_root = False
            if not block.is_leaf:
                frame = self.reference_frame(block)

        self.frames[block_id] = frame
        if is_root:
            self._register_root(block, frame, root_weight)
        return frame

    def _register_root(self, block: EventBlock, frame: int, weight: int) -> None:
        self.dag.register_root(frame, block.id, weight)
        self.roots[block.id] = RootRecord(
            block_id=block.id, creator=block.creator, frame=frame, weight=weight
        )
        self.frame_roots.setdefault(frame, []).append(block.id)
        self.frame_roots[frame].sort()
        self._dirty = True
        self.log.debug(f"帧 {frame} 新根 {block.short()} 权重 {weight}")

    def on_block_inserted(self, block_id: str) -> int:
        """区块插入后调用"""
        return self.assign_frame(block_id)

    @property
    def max_frame(self) -> int:
        return max(self.frame_roots) if self.frame_roots else -1

    # ------------------------------------------------------------------
    # Clotho 投票
    # ------------------------------------------------------------------

    def _vote(self, voter: str, candidate: str) -> bool:
        key = (voter, candidate)
        if key in self._votes:
            return self._votes[key]

        cand = self.roots[candidate]
        voter_frame = self.roots[voter].frame
        if voter_frame == cand.frame + 1:
            vote = candidate in self.dag.reachable_roots(voter, cand.frame)
        else:
            yes, no, total = self._tally(voter, candidate)
            if is_coin_frame(cand.frame, voter_frame) and not (
                exceeds_two_thirds(yes, total) or exceeds_two_thirds(no, total)
            ):
                vote = coin_bit(candidate)
            else:
                vote = yes >= no
        self._votes[key] = vote
        return vote

    def _tally(self, voter: str, candidate: str) -> Tuple[int, int, int]:
        """投票者可达的上一帧根对候选的加权投票"""
        prev = self.roots[voter].frame - 1
        yes = no = 0
        for root in sorted(self.dag.reachable_roots(voter, prev)):
            weight = self.roots[root].weight
            if self._vote(root, candidate):
                yes += weight
            else:
                no += weight
        return yes, no, self.schedule.total_power_at_frame(prev)

    def decide_clotho(self, root_id: str) -> Fame:
        """
        判定帧根的 fame

        f+1 的根按可达性投票；g >= f+2 的根统计可达的 g-1 帧根的加权投票，
        任一方 > 2W/3 即判定。硬币帧不作判定。
        """
        record = self.roots.get(root_id)
        if record is None:
            raise UnknownBlock(f"不是帧根: {root_id}", context={"block_id": root_id})
        if record.decided != Fame.UNDECIDED:
            return record.decided

        f = record.frame
        g = f + 1
        while g in self.frame_roots:
            for voter in self.frame_roots[g]:
                self._vote(voter, root_id)
            if g >= f + 2 and not is_coin_frame(f, g):
                for voter in self.frame_roots[g]:
                    yes, no, total = self._tally(voter, root_id)
                    if exceeds_two_thirds(yes, total):
                        record.decided = Fame.FAMOUS
                    elif exceeds_two_thirds(no, total):
                        record.decided = Fame.NOT_FAMOUS
                    else:
                        continue
                    record.atropos_time = g
                    self.log.debug(
                        f"帧 {f} 根 {root_id[:8]} 判定为 "
                        f"{record.decided.value} (投票帧 {g})"
                    )
                    return record.decided
            g += 1
        return Fame.UNDECIDED

    def frame_decided(self, frame: int) -> bool:
        """帧内所有已知根均已判定"""
        roots = self.frame_roots.get(frame)
        if not roots:
            return False
        return all(self.decide_clotho(r) != Fame.UNDECIDED for r in roots)

    # ------------------------------------------------------------------
    # 定序
    # ------------------------------------------------------------------

    def advance(self) -> List[FrameOutcome]:
        """依次决定并定序后续帧"""
        if not self._dirty:
            return []
        self._dirty = False

        produced = []
        while self.frame_decided(self.last_decided + 1):
            produced.append(self._finalize_frame(self.last_decided + 1))
        return produced

    def finalize_atropos(self, root_id: str) -> FrameOutcome:
        """
        定序 famous 根所在的帧

        已定序的帧返回原结果且不重复输出区块。
        """
        record = self.roots.get(root_id)
        if record is None:
            raise UnknownBlock(f"不是帧根: {root_id}", context={"block_id": root_id})
        if self.decide_clotho(root_id) != Fame.FAMOUS:
            raise ConsensusError(f"根 {root_id} 不是 famous", context={"block_id": root_id})

        f = record.frame
        if f <= self.last_decided:
            return next(o for o in self.outcomes if o.frame == f)
        for earlier in range(self.last_decided + 1, f + 1):
            if not self.frame_decided(earlier):
                raise EarlierFramesUndecided(
                    f"帧 {earlier} 尚未决定，不能定序帧 {f}",
                    context={"frame": f, "undecided": earlier},
                )
        outcome = None
        while self.last_decided < f:
            outcome = self._finalize_frame(self.last_decided + 1)
        return outcome

    def _finalize_frame(self, frame: int) -> FrameOutcome:
        famous = [
            r for r in self.frame_roots[frame] if self.roots[r].decided == Fame.FAMOUS
        ]
        outcome = FrameOutcome(frame=frame, atroposes=famous)

        new_bits = 0
        for root in famous:
            new_bits |= self.dag.ancestry_bits(root)
        new_bits &= ~self._final_bits
        self._final_bits |= new_bits

        for block_id in self.dag.topological_order(self.dag.ids_from_bits(new_bits)):
            atropos = next(r for r in famous if self.dag.reaches(r, block_id))
            record = FinalityRecord(
                position=len(self.finalized),
                block_id=block_id,
                atropos_id=atropos,
                frame=frame,
                lamport_ts=self.dag.blocks[block_id].lamport_ts,
            )
            self.finalized.append(record)
            self._final_frame[block_id] = frame
            outcome.records.append(record)

        self.last_decided = frame
        outcome.checkpoint = self.checkpoint_if_due(frame)
        self.outcomes.append(outcome)
        return outcome

    def is_final(self, block_id: str) -> bool:
        return block_id in self._final_frame

    @property
    def finalized_ids(self) -> List[str]:
        return [r.block_id for r in self.finalized]

    @property
    def atroposes(self) -> List[str]:
        return [a for o in self.outcomes for a in o.atroposes]

    # ------------------------------------------------------------------
    # 检查点与双重投票
    # ------------------------------------------------------------------

    def checkpoint_if_due(self, frame: Optional[int] = None) -> Optional[Checkpoint]:
        """已决定帧为检查点帧时应用排队的质押变更"""
        frame = self.last_decided if frame is None else frame
        if frame <= 0 or frame % self.interval != 0 or frame > self.last_decided:
            return None
        if any(c.frame == frame for c in self.checkpoints):
            return None

        applied = apply_stake_changes(
            self.ledger,
            self.schedule.changes_at(frame),
            frame,
            self.schedule.frames_per_day,
        )
        checkpoint = Checkpoint(
            frame=frame,
            finalized_count=len(self.finalized),
            ledger_digest=self.ledger.digest(),
            applied=tuple(applied),
        )
        self.checkpoints.append(checkpoint)
        expected = self.schedule.digest(frame // self.interval)
        if checkpoint.ledger_digest != expected:
            self.log.warning(f"检查点 {frame} 账本摘要与纪元表不一致")
        self.log.info(
            f"检查点 帧={frame} 已定序={checkpoint.finalized_count} "
            f"变更={len(applied)}"
        )
        return checkpoint

    def detect_double_vote(self) -> List[DoubleVote]:
        """已决定帧中出现的分叉"""
        result = []
        for creator, seq, block_ids in self.dag.fork_slots():
            if any(
                self.frames.get(b, self.last_decided + 1) <= self.last_decided
                for b in block_ids
            ):
                result.append(DoubleVote(creator=creator, seq=seq, block_ids=block_ids))
        return result


__all__ = [
    "COIN_FRAME_DELAY",
    "ConsensusEngine",
    "coin_bit",
    "exceeds_two_thirds",
    "is_coin_frame",
]
