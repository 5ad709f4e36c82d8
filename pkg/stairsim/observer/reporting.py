"""
观察者举报与升级

观察者按确定的提交顺序举报发现；同一证据只奖励第一个举报者。
分叉发现触发押金销毁（举报者获得部分销毁额或 Saga 积分），其他
发现奖励 Saga 积分。观察者质押后升级为 User/Validator，积分保留。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Set

from loguru import logger

from stairsim.exceptions import BelowMinimum, DuplicateReport
from stairsim.ledger.account import Role
from stairsim.ledger.ledger import StakeLedger
from stairsim.models.config import ObserverRewardMode
from stairsim.observer.audit import AuditReport, Finding, FindingKind
from stairsim.observer.exports import ExportBundle
from stairsim.rewards.saga import SagaLedger
from stairsim.rewards.statement import RewardStatement
from stairsim.rewards.tracker import RewardTracker


@dataclass
class ObserverState:
    """观察者（验证权重恒为 0，不创建区块也不投票）"""

    id: str
    saga_points: int = 0
    replica: Optional[ExportBundle] = None

    @property
    def validating_power(self) -> int:
        return 0


@dataclass
class ReportOutcome:
    """一次举报的处理结果"""

    reporter: str
    accepted: List[Finding] = field(default_factory=list)
    duplicates: List[Finding] = field(default_factory=list)
    burns: List[RewardStatement] = field(default_factory=list)
    saga_points: int = 0


class ReportDesk:
    """举报受理（按证据摘要去重）"""

    def __init__(self):
        self._seen: Set[str] = set()

    def claim(self, finding: Finding) -> bool:
        """登记证据，已被举报过返回 False"""
        digest = finding.evidence_hash
        if digest in self._seen:
            return False
        self._seen.add(digest)
        return True

    def __len__(self) -> int:
        return len(self._seen)


def report_and_reward(
    observer: ObserverState,
    report: AuditReport,
    tracker: RewardTracker,
    desk: ReportDesk,
) -> ReportOutcome:
    """
    提交审计报告并领取奖励

    已被标记的分叉者销毁押金并奖励举报者；其余发现按 points_per_finding
    奖励 Saga 积分。

    Raises:
        DuplicateReport: 报告中全部发现都已被他人举报
    """
    outcome = ReportOutcome(reporter=observer.id)
    for finding in report.findings:
        if desk.claim(finding):
            outcome.accepted.append(finding)
        else:
            outcome.duplicates.append(finding)

    if report.findings and not outcome.accepted:
        raise DuplicateReport(
            f"{observer.id} 的 {len(outcome.duplicates)} 条发现均已被举报",
            context={"reporter": observer.id, "findings": len(outcome.duplicates)},
        )

    saga = tracker.saga
    points = tracker.config.points_per_finding
    for finding in outcome.accepted:
        account = finding.account
        if finding.kind == FindingKind.FORK_PAIR and account in tracker.flagged:
            before = saga.alpha(observer.id)
            outcome.burns.append(tracker.burn(account, reporter=observer.id))
            gained = saga.alpha(observer.id) - before
            if tracker.config.observer_reward == ObserverRewardMode.SAGA:
                outcome.saga_points += gained
            continue
        saga.grant(observer.id, points)
        outcome.saga_points += points

    observer.saga_points += outcome.saga_points
    logger.info(
        f"[{observer.id}] 举报受理 {len(outcome.accepted)} 条，重复 {len(outcome.duplicates)} 条，"
        f"销毁 {len(outcome.burns)} 个账户，Saga +{outcome.saga_points}"
    )
    return outcome


def upgrade_observer(
    observer: ObserverState,
    stake_amount: int,
    ledger: StakeLedger,
    saga: SagaLedger,
    day: int = 0,
) -> Role:
    """
    观察者质押后升级

    Raises:
        BelowMinimum: 质押低于 L
    """
    if stake_amount < ledger.params.L:
        raise BelowMinimum(
            f"升级质押 {stake_amount} 低于 L={ledger.params.L}",
            context={"observer": observer.id, "amount": stake_amount},
        )
    ledger.deposit(observer.id, stake_amount, day)
    missing = observer.saga_points - saga.alpha(observer.id)
    if missing > 0:
        saga.grant(observer.id, missing)
    role = ledger.role(observer.id)
    logger.info(f"观察者 {observer.id} 升级为 {role.value}，Saga 积分 {saga.alpha(observer.id)}")
    return role


__all__ = [
    "ObserverState",
    "ReportOutcome",
    "ReportDesk",
    "report_and_reward",
    "upgrade_observer",
]
