"""
主协调器

整合网络模拟、奖励结算、观察者审计与导出，实现 run / sweep / audit /
golden 各命令的流程编排。命令行只是这里的薄封装。
"""

import csv
import io
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from loguru import logger

from stairsim.exporter.writers import finality_lines, write_bundle, write_finality_log
from stairsim.gossip.network import SimNetwork, run_scenario
from stairsim.gossip.report import RunReport
from stairsim.models.config import ScenarioConfig
from stairsim.observer.audit import AuditReport, post_validate
from stairsim.observer.exports import FINALITY_COLUMNS, ExportBundle, fmt_money, load_bundle
from stairsim.rewards.money import ZERO

REPORT_FILE = "report.txt"
AUDIT_FILE = "audit.txt"
SUMMARY_FILE = "summary.tsv"

SUMMARY_COLUMNS = (
    "seed",
    "passed",
    "finalized",
    "lag_p50",
    "lag_p90",
    "lag_p99",
    "messages_sent",
    "violations",
)


@dataclass
class GoldenResult:
    """golden 比对结果"""

    path: Path
    matched: bool
    updated: bool = False
    first_difference: int = -1


def golden_name(config: ScenarioConfig) -> str:
    return f"{config.name}-seed{config.seed}.tsv"


def golden_text(report: RunReport, node_id: str) -> str:
    """参考节点最终顺序的规范文本"""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(FINALITY_COLUMNS)
    writer.writerows(finality_lines(report.finality_logs[node_id]))
    return buf.getvalue()


def rewards_table(bundle: ExportBundle) -> str:
    """按账户汇总奖励（key=value 行）"""
    totals: Dict[str, Decimal] = {}
    burned: Dict[str, Decimal] = {}
    for row in bundle.rewards:
        totals[row.account] = totals.get(row.account, ZERO) + row.distributed
        burned[row.account] = burned.get(row.account, ZERO) + row.burn
    lines = [f"days={len(bundle.statements)}"]
    lines.append(f"pool={fmt_money(sum((s.pool for s in bundle.statements), ZERO))}")
    lines.append(f"fees={fmt_money(sum((s.fees_collected for s in bundle.statements), ZERO))}")
    lines.append(f"spv={fmt_money(sum((s.spv_credit for s in bundle.statements), ZERO))}")
    remainder = bundle.statements[-1].remainder if bundle.statements else ZERO
    lines.append(f"carry={fmt_money(remainder)}")
    saga = {s.account: s.points for s in bundle.saga}
    for account in sorted(totals):
        lines.append(f"reward.{account}={fmt_money(totals[account])}")
        if burned[account]:
            lines.append(f"burn.{account}={fmt_money(burned[account])}")
        if account in saga:
            lines.append(f"saga.{account}={saga[account]}")
    return "\n".join(lines) + "\n"


class ScenarioOrchestrator:
    """场景主协调器"""

    def __init__(self, config: ScenarioConfig, out_dir: Optional[Union[str, Path]] = None):
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.reports: List[RunReport] = []
        self._written: List[Path] = []

    # ------------------------------------------------------------------
    # run
    # ------------------------------------------------------------------

    def run(self, seed: Optional[int] = None) -> RunReport:
        """运行一次场景并写出产物"""
        config = self.config if seed is None else self.config.with_seed(seed)
        network = SimNetwork(config)
        report = run_scenario(config, network)
        self.reports.append(report)
        if self.out_dir is not None:
            target = self.out_dir if seed is None else self.out_dir / f"seed{config.seed}"
            self.write_artifacts(report, target)
        return report

    def write_artifacts(self, report: RunReport, target: Path) -> List[Path]:
        """写出导出文件、report.txt 与 audit.txt"""
        written = write_bundle(report.bundle, target)
        report_path = target / REPORT_FILE
        report_path.write_text(report.to_kv(), encoding="utf-8")
        written.append(report_path)
        if report.audits:
            audit_path = target / AUDIT_FILE
            audit_path.write_text("".join(a.to_text() for a in report.audits), encoding="utf-8")
            written.append(audit_path)
        self._written.extend(written)
        logger.info(f"产物已写出: {target} ({len(written)} 个文件)")
        return written

    # ------------------------------------------------------------------
    # sweep
    # ------------------------------------------------------------------

    def sweep(self, seeds: Iterable[int]) -> List[RunReport]:
        """按种子逐个运行（顺序执行，每个种子的产物相互独立）"""
        seeds = list(seeds)
        if not seeds:
            raise ValueError("种子列表为空")
        reports = [self.run(seed) for seed in seeds]
        passed = sum(r.passed for r in reports)
        logger.info(f"扫描完成: {passed}/{len(reports)} 通过")
        if self.out_dir is not None:
            self._write_summary(reports)
        return reports

    @staticmethod
    def summary_text(reports: Iterable[RunReport]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for report in reports:
            row = report.summary()
            writer.writerow(
                [
                    row[c] if not isinstance(row[c], float) else f"{row[c]:.2f}"
                    for c in SUMMARY_COLUMNS
                ]
            )
        return buf.getvalue()

    def _write_summary(self, reports: List[RunReport]) -> Path:
        path = self.out_dir / SUMMARY_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.summary_text(reports), encoding="utf-8")
        self._written.append(path)
        return path

    # ------------------------------------------------------------------
    # audit / rewards-report
    # ------------------------------------------------------------------

    @staticmethod
    def audit(export_dir: Union[str, Path], reporter: str = "") -> AuditReport:
        """
        审计已写出的导出目录

        Raises:
            MalformedExport: 导出缺失或格式错误
        """
        bundle = load_bundle(export_dir)
        return post_validate(bundle, reporter=reporter)

    @staticmethod
    def rewards_report(export_dir: Union[str, Path]) -> str:
        return rewards_table(load_bundle(export_dir))

    # ------------------------------------------------------------------
    # golden
    # ------------------------------------------------------------------

    def golden(self, golden_dir: Union[str, Path], update: bool = False) -> GoldenResult:
        """
        与提交的 golden 最终顺序比对

        update 时重写文件；文件不存在且未要求 update 时视为不一致。
        """
        report = self.run()
        ref_id = report.metrics["reference_node"]
        path = Path(golden_dir) / golden_name(self.config)
        text = golden_text(report, ref_id)

        if update:
            write_finality_log(path, report.finality_logs[ref_id])
            logger.info(f"golden 已更新: {path}")
            return GoldenResult(path=path, matched=True, updated=True)
        if not path.exists():
            # 缺失的 golden 不能算一致，需要显式 --update 生成
            logger.warning(f"golden 文件不存在: {path}，使用 --update 生成")
            return GoldenResult(path=path, matched=False, first_difference=0)

        expected = path.read_text(encoding="utf-8").splitlines()
        actual = text.splitlines()
        if expected == actual:
            logger.success(f"golden 一致: {path}")
            return GoldenResult(path=path, matched=True)
        diff_at = next(
            (i for i, (a, b) in enumerate(zip(expected, actual)) if a != b),
            min(len(expected), len(actual)),
        )
        logger.warning(f"golden 不一致: {path} 第 {diff_at} 行")
        return GoldenResult(path=path, matched=False, first_difference=diff_at)

    def get_stats(self) -> dict:
        """获取统计信息"""
        return {
            "runs": len(self.reports),
            "passed": sum(r.passed for r in self.reports),
            "violations": sum(len(r.violations) for r in self.reports),
            "audit_findings": sum(r.audit_findings for r in self.reports),
            "files_written": len(self._written),
        }


__all__ = [
    "GoldenResult",
    "ScenarioOrchestrator",
    "golden_name",
    "golden_text",
    "rewards_table",
]
