"""
运行报告
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional

from stairsim.consensus.records import FinalityRecord

if TYPE_CHECKING:
    from stairsim.observer.audit import AuditReport
    from stairsim.observer.exports import ExportBundle


@dataclass
class RunReport:
    """一次模拟运行的结果（指标、违反项与各节点最终顺序）"""

    scenario: str
    seed: int
    metrics: Dict[str, object] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)
    finality_logs: Dict[str, List[FinalityRecord]] = field(default_factory=dict)
    audits: List["AuditReport"] = field(default_factory=list)
    bundle: Optional["ExportBundle"] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def audit_findings(self) -> int:
        return sum(len(a.findings) for a in self.audits)

    def to_kv(self) -> str:
        """key=value 行（确定性，不含墙钟时间）"""
        lines = [
            f"scenario={self.scenario}",
            f"seed={self.seed}",
            f"passed={str(self.passed).lower()}",
        ]
        lines.extend(f"{key}={format_value(value)}" for key, value in sorted(self.metrics.items()))
        lines.append(f"violations={len(self.violations)}")
        lines.extend(f"violation.{i}={v}" for i, v in enumerate(self.violations))
        return "\n".join(lines) + "\n"

    def summary(self) -> Dict[str, object]:
        """扫描汇总表的一行"""
        return {
            "seed": self.seed,
            "passed": self.passed,
            "finalized": self.metrics.get("finalized_blocks", 0),
            "lag_p50": self.metrics.get("finality_lag_p50", 0.0),
            "lag_p90": self.metrics.get("finality_lag_p90", 0.0),
            "lag_p99": self.metrics.get("finality_lag_p99", 0.0),
            "messages_sent": self.metrics.get("messages_sent", 0),
            "violations": len(self.violations),
        }


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


__all__ = ["RunReport", "format_value"]
