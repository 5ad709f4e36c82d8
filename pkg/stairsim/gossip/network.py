"""
模拟网络

虚拟时钟驱动的离散事件模拟：每个 tick 先投递到期消息（响应循环），
再按节点 id 顺序给每个节点一次创建机会（创建循环）。消息延迟由发送节点的
随机数发生器决定，因此投递顺序只取决于场景与种子。
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from stairsim import invariants
from stairsim.exceptions import ConfigValidationError, DuplicateReport
from stairsim.exporter.writers import build_bundle
from stairsim.gossip.messages import SyncMessage
from stairsim.gossip.node import Outgoing, SimNode
from stairsim.gossip.queue import DeliveryQueue, Priority
from stairsim.gossip.report import RunReport
from stairsim.ledger.account import Role
from stairsim.ledger.ledger import StakeLedger
from stairsim.ledger.schedule import EpochSchedule
from stairsim.models.config import FaultBehavior, ScenarioConfig
from stairsim.observer.audit import post_validate
from stairsim.observer.reporting import ObserverState, ReportDesk, report_and_reward
from stairsim.rewards.tracker import RewardTracker


class SimNetwork:
    """模拟网络"""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.params = config.params

        genesis = StakeLedger.from_scenario(config)
        self.schedule = EpochSchedule(
            genesis, config.stake_changes, self.params, config.frames_per_day
        )
        self.participants = self.schedule.participants()
        self.nodes: Dict[str, SimNode] = {
            node_id: SimNode(node_id, config, self.schedule, self.participants)
            for node_id in sorted(self.participants)
        }
        if not any(n.honest for n in self.nodes.values()):
            raise ConfigValidationError("场景中没有诚实的出块节点")

        self.queue = DeliveryQueue()
        self.tick = 0
        self.messages_sent = 0
        self.prefix_violations: List[str] = []

    # ------------------------------------------------------------------
    # 节点
    # ------------------------------------------------------------------

    def honest_nodes(self) -> List[SimNode]:
        return [n for n in self.nodes.values() if n.honest]

    def reference_node(self) -> SimNode:
        """导出与结算使用的节点：纪元 0 的第一个诚实 Validator"""
        roles = self.schedule.roles(0)
        honest = self.honest_nodes()
        for node in honest:
            if roles.get(node.id) == Role.VALIDATOR:
                return node
        return honest[0]

    def observers(self) -> List[str]:
        """不参与出块的账户"""
        participants = set(self.participants)
        return sorted(n.id for n in self.config.nodes if n.id not in participants)

    def finality_logs(self) -> Dict[str, list]:
        return {n.id: list(n.finality_log) for n in self.honest_nodes()}

    # ------------------------------------------------------------------
    # 消息
    # ------------------------------------------------------------------

    def _send(self, sender: SimNode, outgoing: Sequence[Outgoing]) -> None:
        for message, priority in outgoing:
            deliver_at = self.tick + sender.latency()
            self.queue.put(message, self.tick, deliver_at, priority)
            self.messages_sent += 1

    def _deliver(self) -> None:
        for item in self.queue.pop_due(self.tick):
            message = item.message
            node = self.nodes.get(message.recipient)
            if node is None:
                continue
            self._send(node, node.node_tick_respond(message, self.tick))

    # ------------------------------------------------------------------
    # 推进
    # ------------------------------------------------------------------

    def step(self, create: bool = True) -> None:
        """推进一个 tick"""
        self._deliver()
        if create:
            for node_id in sorted(self.nodes):
                node = self.nodes[node_id]
                self._send(node, node.node_tick_create(self.tick))
        if self.tick % self.config.sample_interval == 0:
            self._sample_prefix()
        self.tick += 1

    def _sample_prefix(self) -> None:
        # 只保留第一次失败的采样
        if self.prefix_violations:
            return
        self.prefix_violations = invariants.prefix_property(self.finality_logs(), self.tick)

    def sync_all(self) -> None:
        """每个在线节点向所有对端发送同步请求"""
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if node.is_silent(self.tick):
                continue
            heights = node.dag.heights()
            self._send(
                node,
                [
                    (SyncMessage.request(node.id, peer, heights), Priority.NORMAL)
                    for peer in node.peers
                ],
            )

    def run(self) -> None:
        """运行 max_ticks 个 tick，然后同步并排空队列直至静止"""
        logger.info(
            f"场景 {self.config.name} 开始: {len(self.nodes)} 个节点，"
            f"seed={self.config.seed}，{self.config.max_ticks} ticks"
        )
        while self.tick < self.config.max_ticks:
            self.step()

        self.sync_all()
        deadline = self.tick + self.config.drain_ticks
        while not self.queue.empty() and self.tick < deadline:
            self.step(create=False)
        if not self.queue.empty():
            logger.warning(f"排空超时: 仍有 {self.queue.qsize()} 条消息未投递")
        self._sample_prefix()

    # ------------------------------------------------------------------
    # 指标
    # ------------------------------------------------------------------

    def finality_lags(self) -> List[int]:
        """参考节点上每个区块从创建到定序的 tick 数"""
        ref = self.reference_node()
        lags = []
        for record in ref.finality_log:
            block = ref.dag.blocks[record.block_id]
            creator = self.nodes.get(block.creator)
            created = creator.created.get(block.id) if creator else None
            if created is not None:
                lags.append(ref.final_ticks[record.block_id] - created)
        return lags

    def metrics(self) -> Dict[str, object]:
        ref = self.reference_node()
        engine = ref.engine
        nodes = list(self.nodes.values())
        frames_decided = engine.last_decided + 1
        lags = np.asarray(self.finality_lags(), dtype=float)
        if lags.size:
            p50, p90, p99 = (float(v) for v in np.percentile(lags, [50, 90, 99]))
        else:
            p50 = p90 = p99 = 0.0

        powers = self.schedule.powers(0)
        faulty = sum(
            powers.get(f.node_id, 0)
            for f in self.config.faults
            if f.behavior != FaultBehavior.HONEST
        )
        stats = self.queue.get_stats()
        return {
            "ticks": self.tick,
            "nodes": len(nodes),
            "reference_node": ref.id,
            "blocks_created": sum(n.stats.blocks_created for n in nodes),
            "dag_blocks": len(ref.dag.blocks),
            "frames_decided": frames_decided,
            "ticks_per_frame": self.config.max_ticks / frames_decided if frames_decided else 0.0,
            "finalized_blocks": len(engine.finalized),
            "finality_lag_p50": p50,
            "finality_lag_p90": p90,
            "finality_lag_p99": p99,
            "messages_sent": self.messages_sent,
            "messages_delivered": stats["total_delivered"],
            "messages_dropped": sum(n.stats.messages_dropped for n in nodes),
            "malformed_dropped": sum(n.stats.malformed_dropped for n in nodes),
            "forks_detected": len(ref.dag.fork_slots()),
            "checkpoints": len(engine.checkpoints),
            "skipped_rounds": sum(n.stats.skipped_rounds for n in nodes),
            "total_power": self.schedule.total_power(0),
            "byzantine_power": faulty,
        }

    def get_stats(self) -> dict:
        return {
            "tick": self.tick,
            "messages_sent": self.messages_sent,
            "queue": self.queue.get_stats(),
            "nodes": {n.id: vars(n.stats).copy() for n in self.nodes.values()},
        }


def check_invariants(network: SimNetwork, tracker, bundle) -> List[str]:
    """运行结束后的全部不变量"""
    ref = network.reference_node()
    engine = ref.engine
    honest = network.honest_nodes()
    logs = network.finality_logs()

    violations = invariants.byzantine_budget(network.config, network.schedule)
    violations += network.prefix_violations
    violations += invariants.agreement(logs)
    violations += invariants.root_threshold(engine)
    violations += invariants.frame_monotonicity(engine)
    violations += invariants.checkpoint_cadence(engine)
    for node in honest:
        violations += invariants.cross_type(node.engine, network.params.k)
    violations += invariants.reward_conservation(tracker.statements)
    violations += invariants.saga_recount(bundle, engine.atroposes, tracker.saga)
    violations += invariants.ledger_constraints(engine.ledger)
    return violations


def run_scenario(config: ScenarioConfig, network: Optional[SimNetwork] = None) -> RunReport:
    """
    运行一个场景

    模拟结束后在参考节点上按日结算，观察者逐个审计导出并举报，
    无人举报的分叉者押金随后销毁，最后检查全部不变量。

    Raises:
        ConfigValidationError: 场景配置无效
    """
    network = network or SimNetwork(config)
    network.run()

    ref = network.reference_node()
    tracker = RewardTracker(config, ref.dag, network.schedule, ref.engine.ledger.copy())
    tracker.flag(v.creator for v in ref.engine.detect_double_vote())
    tracker.run(ref.engine.outcomes)

    bundle = build_bundle(network, tracker)
    desk = ReportDesk()
    audits = []
    for observer_id in network.observers():
        observer = ObserverState(observer_id, replica=bundle)
        report = post_validate(bundle, reporter=observer_id)
        audits.append(report)
        if report.is_clean:
            continue
        try:
            report_and_reward(observer, report, tracker, desk)
        except DuplicateReport as e:
            logger.info(f"[{observer_id}] {e}")

    burned = tracker.burn_unreported()
    if burned:
        logger.warning(f"销毁无人举报的分叉者押金: {', '.join(burned)}")
    bundle = build_bundle(network, tracker)

    violations = check_invariants(network, tracker, bundle)
    metrics = network.metrics()
    metrics["audit_findings"] = sum(len(a.findings) for a in audits)
    metrics["days"] = len(tracker.statements)

    report = RunReport(
        scenario=config.name,
        seed=config.seed,
        metrics=metrics,
        violations=violations,
        finality_logs=network.finality_logs(),
        audits=audits,
        bundle=bundle,
    )
    if report.passed:
        logger.success(
            f"场景 {config.name} seed={config.seed} 通过: "
            f"定序 {metrics['finalized_blocks']} 个区块，{metrics['frames_decided']} 帧"
        )
    else:
        for violation in violations:
            logger.warning(violation)
        logger.error(f"场景 {config.name} seed={config.seed} 违反 {len(violations)} 项不变量")
    return report


__all__ = ["SimNetwork", "check_invariants", "run_scenario"]
