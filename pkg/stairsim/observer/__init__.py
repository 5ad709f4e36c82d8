"""
观察者包

读取运行导出、独立重放并审计，举报发现并领取奖励。
"""

from stairsim.observer.audit import AuditReport, Finding, FindingKind, post_validate
from stairsim.observer.exports import ExportBundle, load_bundle
from stairsim.observer.replay import (
    DagReplay,
    ReplayResult,
    brute_force_score,
    recount_saga,
    replay_dag,
)
from stairsim.observer.reporting import (
    ObserverState,
    ReportDesk,
    ReportOutcome,
    report_and_reward,
    upgrade_observer,
)
from stairsim.observer.verifier import BlockVerifier

__all__ = [
    "AuditReport",
    "Finding",
    "FindingKind",
    "post_validate",
    "ExportBundle",
    "load_bundle",
    "DagReplay",
    "ReplayResult",
    "brute_force_score",
    "recount_saga",
    "replay_dag",
    "ObserverState",
    "ReportDesk",
    "ReportOutcome",
    "report_and_reward",
    "upgrade_observer",
    "BlockVerifier",
]
