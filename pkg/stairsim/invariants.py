"""
运行不变量

一次运行结束后逐项检查安全性与记账约束，每个检查返回违反项描述列表
（空列表表示通过）。
"""

from typing import Dict, List, Mapping, Sequence

from stairsim.consensus.engine import ConsensusEngine, exceeds_two_thirds
from stairsim.consensus.records import FinalityRecord
from stairsim.ledger.account import Role
from stairsim.ledger.ledger import StakeLedger
from stairsim.ledger.schedule import EpochSchedule
from stairsim.models.config import FaultBehavior, ScenarioConfig
from stairsim.observer.exports import ExportBundle
from stairsim.observer.replay import recount_saga
from stairsim.rewards.saga import SagaLedger
from stairsim.rewards.statement import RewardStatement

FinalityLogs = Mapping[str, Sequence[FinalityRecord]]


def byzantine_budget(config: ScenarioConfig, schedule: EpochSchedule) -> List[str]:
    """故障节点的纪元 0 权重不超过 ⌊(W−1)/3⌋"""
    powers = schedule.powers(0)
    total = schedule.total_power(0)
    faulty = sum(
        powers.get(f.node_id, 0) for f in config.faults if f.behavior != FaultBehavior.HONEST
    )
    budget = (total - 1) // 3
    if faulty > budget:
        return [
            f"byzantine_budget: 故障权重 {faulty} 超过 ⌊(W−1)/3⌋={budget} (W={total})，"
            "不保证一致性"
        ]
    return []


def _ids(log: Sequence[FinalityRecord]) -> List[str]:
    return [r.block_id for r in log]


def prefix_property(logs: FinalityLogs, tick: int = -1) -> List[str]:
    """每个诚实节点的最终顺序都是最长顺序的前缀"""
    if not logs:
        return []
    longest_node = max(sorted(logs), key=lambda n: len(logs[n]))
    longest = _ids(logs[longest_node])
    problems = []
    for node_id in sorted(logs):
        ids = _ids(logs[node_id])
        if ids != longest[: len(ids)]:
            at = next(i for i, (a, b) in enumerate(zip(ids, longest)) if a != b)
            where = f" tick={tick}" if tick >= 0 else ""
            problems.append(
                f"prefix:{where} {node_id} 与 {longest_node} 在位置 {at} 分歧"
            )
    return problems


def agreement(logs: FinalityLogs) -> List[str]:
    """静止后所有诚实节点的最终顺序完全一致"""
    if not logs:
        return []
    nodes = sorted(logs)
    base = list(logs[nodes[0]])
    return [
        f"agreement: {node_id} 的最终顺序与 {nodes[0]} 不同 "
        f"({len(logs[node_id])} / {len(base)} 条)"
        for node_id in nodes[1:]
        if list(logs[node_id]) != base
    ]


def root_threshold(engine: ConsensusEngine) -> List[str]:
    """
    根的上一帧可达权重严格超过 2W/3，且没有超过阈值却未成为根的区块

    阈值测试针对父区块最大帧 f；创建者在帧 f 的第一个区块还针对帧 f-1。
    创建者在目标帧权重为 0 的区块不能成为根，不计为违反。
    """
    dag = engine.dag
    schedule = engine.schedule
    problems = []

    def over(block_id: str, frame: int) -> bool:
        if frame not in dag.root_index:
            return False
        # 根可达自身，这里只计入分配帧时已存在的根
        roots = dag.root_index[frame]
        weight = sum(roots[r] for r in dag.reachable_roots(block_id, frame) if r != block_id)
        return exceeds_two_thirds(weight, schedule.total_power_at_frame(frame))

    for block in dag:
        if block.is_leaf or block.id not in engine.frames:
            continue
        f = engine.reference_frame(block)
        if over(block.id, f):
            expected = f + 1
        elif f > 0 and engine.frame_of(block.self_parent) < f and over(block.id, f - 1):
            expected = f
        else:
            expected = None

        root = engine.roots.get(block.id)
        if root is not None and root.frame != expected:
            problems.append(
                f"root_threshold: 根 {block.short()} (帧 {root.frame}) 的上一帧可达权重未超过 2W/3"
            )
        elif (
            root is None
            and expected is not None
            and schedule.power_at_frame(block.creator, expected) > 0
        ):
            problems.append(
                f"root_threshold: {block.short()} 可达权重超过 2W/3 却不是帧 {expected} 的根"
            )
    return problems


def frame_monotonicity(engine: ConsensusEngine) -> List[str]:
    """区块的帧不小于任一父区块的帧"""
    problems = []
    for block in engine.dag:
        frame = engine.frames.get(block.id)
        if frame is None:
            problems.append(f"frames: {block.short()} 未分配帧")
            continue
        lower = [p for p in block.parents if engine.frames.get(p, -1) > frame]
        if lower:
            problems.append(f"frames: {block.short()} 的帧 {frame} 小于父区块的帧")
    return problems


def checkpoint_cadence(engine: ConsensusEngine) -> List[str]:
    """检查点恰好出现在已决定的 interval 整数倍帧上，账本摘要与纪元表一致"""
    interval = engine.interval
    expected = list(range(interval, engine.last_decided + 1, interval))
    actual = [c.frame for c in engine.checkpoints]
    problems = []
    if actual != expected:
        problems.append(f"checkpoints: 检查点帧 {actual} != 期望 {expected}")
    for checkpoint in engine.checkpoints:
        if checkpoint.ledger_digest != engine.schedule.digest(checkpoint.frame // interval):
            problems.append(f"checkpoints: 帧 {checkpoint.frame} 的账本摘要与纪元表不一致")
    return problems


def cross_type(engine: ConsensusEngine, k: int) -> List[str]:
    """非叶子区块有一个 self-parent、k−1 个 other-parent，且至少一个为相反类型"""
    dag = engine.dag
    problems = []
    for block in dag:
        if block.is_leaf:
            continue
        if block.self_parent is None or len(block.other_parents) != k - 1:
            problems.append(f"cross_type: {block.short()} 父区块数量不符")
            continue
        role: Role = block.creator_role_at_creation
        stamps = [dag.blocks[p].creator_role_at_creation for p in block.other_parents]
        if role.opposite() not in stamps:
            problems.append(f"cross_type: {block.short()} 缺少相反类型的 other-parent")
    return problems


def reward_conservation(statements: Sequence[RewardStatement]) -> List[str]:
    """每张结算单精确守恒且没有负数入账"""
    problems = []
    for st in statements:
        if not st.is_conserved():
            problems.append(f"conservation: 第 {st.day} 天结算单不守恒")
        if st.has_negative_credit():
            problems.append(f"conservation: 第 {st.day} 天存在负数入账")
    return problems


def saga_recount(
    bundle: ExportBundle, atroposes: Sequence[str], saga: SagaLedger
) -> List[str]:
    """实时 Saga 积分等于由导出 DAG 重算的积分"""
    recount = recount_saga(bundle.dag, atroposes)
    live: Dict[str, int] = {a: n for a, n in saga.earned.items() if n}
    if recount != dict(sorted(live.items())):
        diff = sorted(
            a for a in set(recount) | set(live) if recount.get(a, 0) != live.get(a, 0)
        )
        return [f"saga: 积分与重算不一致: {', '.join(diff)}"]
    return []


def ledger_constraints(ledger: StakeLedger) -> List[str]:
    return [f"ledger: {p}" for p in ledger.check_invariants()]


__all__ = [
    "FinalityLogs",
    "agreement",
    "byzantine_budget",
    "checkpoint_cadence",
    "cross_type",
    "frame_monotonicity",
    "ledger_constraints",
    "prefix_property",
    "reward_conservation",
    "root_threshold",
    "saga_recount",
]
