"""
独立重放

由导出的 DAG 重新推导帧、根、验证分数、Clotho 判定与最终顺序。
可达性用按 lamport 剪枝的深度优先搜索直接求得，不使用位集祖先表，
因此可以作为 x-DAG 与共识引擎的对照实现。
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Set, Tuple

from stairsim.consensus.engine import coin_bit, exceeds_two_thirds, is_coin_frame
from stairsim.consensus.records import Fame, FinalityRecord
from stairsim.ledger.schedule import epoch_of
from stairsim.observer.exports import DagRow


@dataclass
class ReplayResult:
    """重放结果"""

    frames: Dict[str, int] = field(default_factory=dict)
    roots: Dict[str, int] = field(default_factory=dict)
    scores: Dict[str, int] = field(default_factory=dict)
    fame: Dict[str, Fame] = field(default_factory=dict)
    order: List[FinalityRecord] = field(default_factory=list)
    atroposes: List[str] = field(default_factory=list)
    last_decided: int = -1


class DagReplay:
    """逐块重放"""

    def __init__(self, powers: Dict[int, Dict[str, int]], interval: int):
        self.powers = powers
        self.interval = interval

        self.rows: Dict[str, DagRow] = {}
        self.frames: Dict[str, int] = {}
        self.roots: Dict[str, int] = {}
        self.frame_roots: Dict[int, List[str]] = {}
        self.scores: Dict[str, int] = {}

        self._children: Dict[str, List[str]] = {}
        self._slots: Dict[Tuple[str, int], List[str]] = {}
        self._forks: List[Tuple[str, int]] = []
        # 分叉区块 -> 已知后代（含自身）
        self._desc: Dict[str, Set[str]] = {}
        self._seen: Dict[str, Set[str]] = {}
        self._reach: Dict[Tuple[str, int], Set[str]] = {}
        self._votes: Dict[Tuple[str, str], bool] = {}

    # ------------------------------------------------------------------
    # 权重
    # ------------------------------------------------------------------

    def _epoch_powers(self, frame: int) -> Dict[str, int]:
        epoch = epoch_of(frame, self.interval)
        if epoch in self.powers:
            return self.powers[epoch]
        # 超出导出范围时沿用最后一个纪元
        return self.powers[max(self.powers)] if self.powers else {}

    def power(self, account: str, frame: int) -> int:
        return self._epoch_powers(frame).get(account, 0)

    def total(self, frame: int) -> int:
        return sum(self._epoch_powers(frame).values())

    # ------------------------------------------------------------------
    # 可达性
    # ------------------------------------------------------------------

    def ancestors(self, block_id: str, min_lamport: int = 0) -> Set[str]:
        """lamport >= min_lamport 的祖先（含自身）"""
        seen: Set[str] = set()
        stack = [block_id]
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.add(current)
            for parent in self.rows[current].parents:
                if parent not in seen and self.rows[parent].lamport_ts >= min_lamport:
                    stack.append(parent)
        return seen

    def descendants(self, block_id: str) -> Set[str]:
        seen = {block_id}
        stack = [block_id]
        while stack:
            for child in self._children.get(stack.pop(), ()):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return seen

    def forks_seen(self, block_id: str) -> Set[str]:
        """祖先中同时包含某个分叉两侧的创建者"""
        return self._seen[block_id]

    def _track_forks(self, row: DagRow, members: List[str]) -> None:
        for tracked in self._desc.values():
            if any(p in tracked for p in row.parents):
                tracked.add(row.id)
        if len(members) >= 2:
            if len(members) == 2:
                self._forks.append((row.creator, row.seq))
                self._desc[members[0]] = self.descendants(members[0])
            self._desc[row.id] = {row.id}
        self._seen[row.id] = {
            creator
            for creator, seq in self._forks
            if sum(1 for m in self._slots[(creator, seq)] if row.id in self._desc[m]) >= 2
        }

    def reachable_roots(self, block_id: str, frame: int) -> Set[str]:
        key = (block_id, frame)
        if key in self._reach:
            return self._reach[key]
        roots = self.frame_roots.get(frame, [])
        if not roots:
            return set()
        lowest = min(self.rows[r].lamport_ts for r in roots)
        anc = self.ancestors(block_id, lowest)
        excluded = self.forks_seen(block_id)
        result = {r for r in roots if r in anc and self.rows[r].creator not in excluded}
        self._reach[key] = result
        return result

    def reach_weight(self, block_id: str, frame: int) -> int:
        return sum(self.roots[r] for r in self.reachable_roots(block_id, frame))

    # ------------------------------------------------------------------
    # 帧
    # ------------------------------------------------------------------

    def _over(self, block_id: str, frame: int) -> bool:
        if frame < 0:
            return False
        return exceeds_two_thirds(self.reach_weight(block_id, frame), self.total(frame))

    def add(self, row: DagRow) -> int:
        """加入一个父区块齐全的区块并计算其帧，返回帧号"""
        self.rows[row.id] = row
        for parent in row.parents:
            self._children.setdefault(parent, []).append(row.id)
        members = self._slots.setdefault((row.creator, row.seq), [])
        members.append(row.id)
        self._track_forks(row, members)

        if row.is_leaf:
            frame, ref, opens = 0, 0, True
        else:
            ref = max(self.frames[p] for p in row.parents)
            if self._over(row.id, ref):
                frame, opens = ref + 1, True
            else:
                # 创建者进入帧 ref 的第一个区块按帧 ref-1 的根测试
                first = self.frames[row.self_parent] < ref
                frame, opens = ref, first and self._over(row.id, ref - 1)

        weight = self.power(row.creator, frame) if opens else 0
        if weight > 0:
            self.roots[row.id] = weight
            self.frame_roots.setdefault(frame, []).append(row.id)
            self.frame_roots[frame].sort()
            self._reach.pop((row.id, frame), None)
        elif opens:
            frame = ref
        self.frames[row.id] = frame
        self.scores[row.id] = self.reach_weight(row.id, ref)
        return frame

    # ------------------------------------------------------------------
    # 投票
    # ------------------------------------------------------------------

    def _tally(self, voter: str, candidate: str) -> Tuple[int, int, int]:
        prev = self.frames[voter] - 1
        yes = no = 0
        for root in sorted(self.reachable_roots(voter, prev)):
            if self.vote(root, candidate):
                yes += self.roots[root]
            else:
                no += self.roots[root]
        return yes, no, self.total(prev)

    def vote(self, voter: str, candidate: str) -> bool:
        key = (voter, candidate)
        if key not in self._votes:
            c_frame = self.frames[candidate]
            v_frame = self.frames[voter]
            if v_frame == c_frame + 1:
                result = candidate in self.reachable_roots(voter, c_frame)
            else:
                yes, no, total = self._tally(voter, candidate)
                undecided = not (exceeds_two_thirds(yes, total) or exceeds_two_thirds(no, total))
                if is_coin_frame(c_frame, v_frame) and undecided:
                    result = coin_bit(candidate)
                else:
                    result = yes >= no
            self._votes[key] = result
        return self._votes[key]

    def fame_of(self, candidate: str) -> Fame:
        f = self.frames[candidate]
        g = f + 1
        while g in self.frame_roots:
            voters = self.frame_roots[g]
            for voter in voters:
                self.vote(voter, candidate)
            if g >= f + 2 and not is_coin_frame(f, g):
                for voter in voters:
                    yes, no, total = self._tally(voter, candidate)
                    if exceeds_two_thirds(yes, total):
                        return Fame.FAMOUS
                    if exceeds_two_thirds(no, total):
                        return Fame.NOT_FAMOUS
            g += 1
        return Fame.UNDECIDED

    # ------------------------------------------------------------------
    # 定序
    # ------------------------------------------------------------------

    def finalize(self) -> ReplayResult:
        """逐帧判定并定序，直到遇到未决定的帧"""
        result = ReplayResult(
            frames=dict(self.frames), roots=dict(self.roots), scores=dict(self.scores)
        )
        final: Set[str] = set()
        frame = 0
        while self.frame_roots.get(frame):
            fame = {r: self.fame_of(r) for r in self.frame_roots[frame]}
            result.fame.update(fame)
            if any(v == Fame.UNDECIDED for v in fame.values()):
                break

            famous = sorted(r for r, v in fame.items() if v == Fame.FAMOUS)
            reach = {r: self._unfinal_ancestry(r, final) for r in famous}
            fresh: Set[str] = set().union(*reach.values()) if reach else set()
            ordered = sorted(fresh, key=lambda b: (self.rows[b].lamport_ts, b))
            for block_id in ordered:
                atropos = next(r for r in famous if block_id in reach[r])
                result.order.append(
                    FinalityRecord(
                        position=len(result.order),
                        block_id=block_id,
                        atropos_id=atropos,
                        frame=frame,
                        lamport_ts=self.rows[block_id].lamport_ts,
                    )
                )
            final |= fresh
            result.atroposes.extend(famous)
            result.last_decided = frame
            frame += 1
        return result

    def _unfinal_ancestry(self, block_id: str, final: Set[str]) -> Set[str]:
        seen: Set[str] = set()
        stack = [block_id]
        while stack:
            current = stack.pop()
            if current in seen or current in final:
                continue
            seen.add(current)
            stack.extend(self.rows[current].parents)
        return seen


def replay_dag(
    rows: Iterable[DagRow], powers: Dict[int, Dict[str, int]], interval: int
) -> ReplayResult:
    """按 (lamport_ts, id) 顺序重放父区块齐全的区块"""
    replay = DagReplay(powers, interval)
    for row in sorted(rows, key=lambda r: (r.lamport_ts, r.id)):
        if all(p in replay.rows for p in row.parents):
            replay.add(row)
    return replay.finalize()


def recount_saga(rows: Iterable[DagRow], atroposes: Iterable[str]) -> Dict[str, int]:
    """
    每个创建者有 Atropos 作 other-parent 的事件数

    同一 (creator, seq) 至多计一次，分叉双块只按 id 较小的一个计分。
    """
    chosen = set(atroposes)
    slots = set()
    counts: Dict[str, int] = {}
    for row in sorted(rows, key=lambda r: r.id):
        if (row.creator, row.seq) in slots:
            continue
        if any(p in chosen for p in row.other_parents):
            slots.add((row.creator, row.seq))
            counts[row.creator] = counts.get(row.creator, 0) + 1
    return dict(sorted(counts.items()))


def brute_force_score(
    rows: Iterable[DagRow], powers: Dict[int, Dict[str, int]], interval: int
) -> Dict[str, int]:
    """全部区块的验证分数"""
    replay = DagReplay(powers, interval)
    for row in sorted(rows, key=lambda r: (r.lamport_ts, r.id)):
        replay.add(row)
    return dict(replay.scores)


__all__ = [
    "DagReplay",
    "ReplayResult",
    "replay_dag",
    "recount_saga",
    "brute_force_score",
]
