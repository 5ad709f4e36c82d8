"""
事后验证

观察者读取一次运行的导出，独立重放 DAG，与节点声明的帧、根、分数和
最终顺序逐条对比，并重新核对奖励守恒与 Saga 积分。
"""

import hashlib
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Dict, List, Optional, Tuple

from loguru import logger

from stairsim.observer.exports import SPV_ACCOUNT, DagRow, ExportBundle, fmt_money
from stairsim.observer.replay import DagReplay, ReplayResult, recount_saga
from stairsim.observer.verifier import BlockVerifier
from stairsim.rewards.money import ZERO


class FindingKind(Enum):
    INVALID_BLOCK = "InvalidBlock"
    FORK_PAIR = "ForkPair"
    THRESHOLD_VIOLATION = "ThresholdViolation"
    ORDER_DIVERGENCE = "OrderDivergence"
    SCORE_MISMATCH = "ScoreMismatch"
    CONSERVATION_BREAK = "ConservationBreak"


@dataclass(frozen=True)
class Finding:
    """一条审计发现"""

    kind: FindingKind
    subjects: Tuple[str, ...]
    evidence: str
    account: Optional[str] = None

    @property
    def evidence_hash(self) -> str:
        """用于去重的证据摘要"""
        payload = "\t".join([self.kind.value, *self.subjects]).encode("utf-8")
        return hashlib.blake2b(payload, digest_size=16).hexdigest()

    def to_line(self) -> str:
        return f"{self.kind.value}\t{','.join(self.subjects)}\t{self.evidence}"


@dataclass
class AuditReport:
    """审计报告"""

    findings: List[Finding] = field(default_factory=list)
    blocks_scanned: int = 0
    reporter: str = ""

    @property
    def is_clean(self) -> bool:
        return not self.findings

    @property
    def verdict(self) -> str:
        return "clean" if self.is_clean else "violations"

    def by_kind(self, kind: FindingKind) -> List[Finding]:
        return [f for f in self.findings if f.kind == kind]

    def counts(self) -> Dict[str, int]:
        return {k.value: len(self.by_kind(k)) for k in FindingKind}

    def to_text(self) -> str:
        """每行一条发现，前置汇总行"""
        lines = [
            f"reporter={self.reporter or '-'}",
            f"verdict={self.verdict}",
            f"blocks_scanned={self.blocks_scanned}",
            f"findings={len(self.findings)}",
        ]
        lines.extend(f.to_line() for f in self.findings)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# 检查
# ---------------------------------------------------------------------------


def _replay_blocks(
    bundle: ExportBundle, findings: List[Finding]
) -> Tuple[DagReplay, Dict[str, DagRow]]:
    params = bundle.params
    interval = params.checkpoint_frame_interval
    roles = bundle.roles()
    replay = DagReplay(bundle.powers(), interval)
    accepted: Dict[str, DagRow] = {}

    seen_ids = set()
    for row in sorted(bundle.dag, key=lambda r: (r.lamport_ts, r.id)):
        if row.id in seen_ids:
            findings.append(Finding(FindingKind.INVALID_BLOCK, (row.id,), "重复的区块 id"))
            continue
        seen_ids.add(row.id)
        problems = BlockVerifier.check(row, accepted, replay.frames, roles, params.k, interval)
        if problems:
            findings.append(
                Finding(FindingKind.INVALID_BLOCK, (row.id,), "; ".join(problems), row.creator)
            )
            continue
        replay.add(row)
        accepted[row.id] = row
    return replay, accepted


def _fork_pairs(accepted: Dict[str, DagRow]) -> List[Finding]:
    slots: Dict[Tuple[str, int], List[str]] = {}
    for row in accepted.values():
        slots.setdefault((row.creator, row.seq), []).append(row.id)
    return [
        Finding(
            FindingKind.FORK_PAIR,
            tuple(sorted(ids)),
            f"{creator} seq={seq}",
            creator,
        )
        for (creator, seq), ids in sorted(slots.items())
        if len(ids) >= 2
    ]


def _claims(accepted: Dict[str, DagRow], result: ReplayResult) -> List[Finding]:
    findings = []
    for block_id in sorted(accepted, key=lambda b: (accepted[b].lamport_ts, b)):
        row = accepted[block_id]
        frame = result.frames[block_id]
        is_root = block_id in result.roots
        if row.frame != frame or row.root != is_root:
            findings.append(
                Finding(
                    FindingKind.THRESHOLD_VIOLATION,
                    (block_id,),
                    f"声明 frame={row.frame} root={int(row.root)}，"
                    f"重算 frame={frame} root={int(is_root)}",
                    row.creator,
                )
            )
        if row.score != result.scores[block_id]:
            findings.append(
                Finding(
                    FindingKind.SCORE_MISMATCH,
                    (block_id,),
                    f"声明 score={row.score}，重算 score={result.scores[block_id]}",
                    row.creator,
                )
            )
    return findings


def _order(bundle: ExportBundle, result: ReplayResult) -> List[Finding]:
    findings = []
    expected = result.order
    for node_id, log in sorted(bundle.finality.items()):
        for position in range(max(len(log), len(expected))):
            claimed = log[position] if position < len(log) else None
            derived = expected[position] if position < len(expected) else None
            if claimed == derived:
                continue
            subject = (claimed or derived).block_id
            findings.append(
                Finding(
                    FindingKind.ORDER_DIVERGENCE,
                    (node_id, subject),
                    f"position={position} 声明长度={len(log)} 重算长度={len(expected)}",
                )
            )
            break
    return findings


def _conservation(
    bundle: ExportBundle, accepted: Dict[str, DagRow], result: ReplayResult
) -> List[Finding]:
    findings = []
    distributed: Dict[int, Decimal] = {}
    spv: Dict[int, Decimal] = {}
    for row in bundle.rewards:
        values = (
            row.validation_reward,
            row.fees,
            row.delegation_share,
            row.commission,
            row.burn,
            row.reporter_reward,
        )
        if any(v < 0 for v in values):
            findings.append(
                Finding(
                    FindingKind.CONSERVATION_BREAK,
                    (str(row.day), row.account),
                    "存在负数入账",
                    row.account,
                )
            )
        if row.account == SPV_ACCOUNT:
            spv[row.day] = spv.get(row.day, ZERO) + row.fees
        else:
            distributed[row.day] = distributed.get(row.day, ZERO) + row.distributed

    for st in bundle.statements:
        paid = distributed.get(st.day, ZERO)
        spv_paid = spv.get(st.day, ZERO)
        lhs = paid + spv_paid + st.remainder
        rhs = st.pool + st.fees_collected
        if lhs != rhs or spv_paid != st.spv_credit:
            findings.append(
                Finding(
                    FindingKind.CONSERVATION_BREAK,
                    (f"day{st.day}",),
                    f"分配 {fmt_money(paid)} + SPV {fmt_money(spv_paid)} + 结转 "
                    f"{fmt_money(st.remainder)} != 奖励池 {fmt_money(st.pool)} + 手续费 "
                    f"{fmt_money(st.fees_collected)}",
                )
            )

    recount = recount_saga(accepted.values(), result.atroposes)
    claimed = {row.account: row.earned for row in bundle.saga}
    for account in sorted(set(recount) | set(claimed)):
        if recount.get(account, 0) != claimed.get(account, 0):
            findings.append(
                Finding(
                    FindingKind.CONSERVATION_BREAK,
                    (account,),
                    f"Saga 积分声明 {claimed.get(account, 0)}，重算 {recount.get(account, 0)}",
                    account,
                )
            )
    return findings


def post_validate(bundle: ExportBundle, reporter: str = "") -> AuditReport:
    """
    审计一次运行的导出

    Args:
        bundle: 导出内容
        reporter: 审计者 id

    Returns:
        AuditReport（无发现即 clean）
    """
    findings: List[Finding] = []
    replay, accepted = _replay_blocks(bundle, findings)
    result = replay.finalize()

    findings.extend(_fork_pairs(accepted))
    findings.extend(_claims(accepted, result))
    findings.extend(_order(bundle, result))
    findings.extend(_conservation(bundle, accepted, result))

    report = AuditReport(findings=findings, blocks_scanned=len(bundle.dag), reporter=reporter)
    if report.is_clean:
        logger.success(f"[{reporter or 'audit'}] 审计通过: {report.blocks_scanned} 个区块")
    else:
        logger.warning(
            f"[{reporter or 'audit'}] 审计发现 {len(findings)} 处问题: "
            + ", ".join(f"{k}={v}" for k, v in report.counts().items() if v)
        )
    return report


__all__ = ["FindingKind", "Finding", "AuditReport", "post_validate"]
