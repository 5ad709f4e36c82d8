"""
运行导出

把参考节点的 DAG、各诚实节点的最终顺序、结算单、账本与纪元权重表
整理成 ExportBundle，并写成制表符分隔文件。
"""

import csv
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, Sequence, Union

import toml

from stairsim.exceptions import UnknownFrame
from stairsim.observer.exports import (
    DAG_COLUMNS,
    DAG_FILE,
    FINALITY_COLUMNS,
    FINALITY_DIR,
    LEDGER_COLUMNS,
    LEDGER_FILE,
    REWARD_COLUMNS,
    REWARDS_FILE,
    SAGA_COLUMNS,
    SAGA_FILE,
    SCENARIO_FILE,
    SPV_ACCOUNT,
    STATEMENT_COLUMNS,
    STATEMENTS_FILE,
    WEIGHT_COLUMNS,
    WEIGHTS_FILE,
    DagRow,
    ExportBundle,
    RewardRow,
    SagaRow,
    StatementRow,
    WeightRow,
    fmt_money,
)
from stairsim.rewards.money import ZERO
from stairsim.rewards.tracker import RewardTracker

if TYPE_CHECKING:
    from stairsim.gossip.network import SimNetwork


def build_bundle(network: "SimNetwork", tracker: RewardTracker) -> ExportBundle:
    """由运行结束后的网络与结算器生成导出"""
    ref = network.reference_node()
    dag = ref.dag
    engine = ref.engine

    rows = []
    for block in sorted(dag, key=lambda b: (b.lamport_ts, b.id)):
        ref_frame = engine.reference_frame(block)
        try:
            score = dag.validation_score(block.id, ref_frame).score
        except UnknownFrame:
            score = 0
        rows.append(
            DagRow(
                id=block.id,
                creator=block.creator,
                seq=block.seq,
                self_parent=block.self_parent,
                other_parents=block.other_parents,
                lamport_ts=block.lamport_ts,
                fee_total=block.fee_total,
                role=block.creator_role_at_creation,
                payload_digest=block.payload_digest,
                frame=engine.frames[block.id],
                root=block.id in engine.roots,
                score=score,
            )
        )

    rewards = []
    statements = []
    for st in tracker.statements:
        for account in sorted(st.credits):
            credit = st.credits[account]
            rewards.append(
                RewardRow(
                    day=st.day,
                    account=account,
                    validation_reward=credit.validation_reward,
                    fees=credit.fees,
                    delegation_share=credit.delegation_share,
                    commission=credit.commission,
                    burn=credit.burn,
                    reporter_reward=credit.reporter_reward,
                )
            )
        rewards.append(
            RewardRow(st.day, SPV_ACCOUNT, ZERO, st.spv_credit, ZERO, ZERO, ZERO, ZERO)
        )
        statements.append(
            StatementRow(st.day, st.pool, st.fees_collected, st.spv_credit, st.remainder)
        )

    schedule = network.schedule
    last_epoch = max(schedule.epoch_of(max(0, engine.max_frame)) + 1, schedule.last_change_epoch)
    weights = []
    for epoch in range(last_epoch + 1):
        roles = schedule.roles(epoch)
        powers = schedule.powers(epoch)
        for account in sorted(roles):
            weights.append(WeightRow(epoch, account, roles[account], powers[account]))

    saga = tracker.saga
    accounts = sorted(set(saga.points) | set(saga.earned))
    return ExportBundle(
        config=network.config,
        dag=rows,
        finality={n.id: list(n.finality_log) for n in network.honest_nodes()},
        rewards=rewards,
        statements=statements,
        ledger=tracker.ledger.snapshot(tracker.last_day),
        weights=weights,
        saga=[SagaRow(a, saga.alpha(a), saga.earned.get(a, 0)) for a in accounts],
    )


# ---------------------------------------------------------------------------
# 写出
# ---------------------------------------------------------------------------


def _write_tsv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    return path


def finality_lines(records) -> List[List[object]]:
    return [[r.position, r.block_id, r.atropos_id, r.frame, r.lamport_ts] for r in records]


def write_finality_log(path: Union[str, Path], records) -> Path:
    return _write_tsv(Path(path), FINALITY_COLUMNS, finality_lines(records))


def write_bundle(bundle: ExportBundle, out_dir: Union[str, Path]) -> List[Path]:
    """
    写出全部导出文件

    Returns:
        写出的文件路径
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    written = []

    written.append(
        _write_tsv(
            root / DAG_FILE,
            DAG_COLUMNS,
            (
                [
                    r.id,
                    r.creator,
                    r.seq,
                    r.self_parent or "",
                    ",".join(r.other_parents),
                    r.lamport_ts,
                    r.fee_total,
                    r.role.value,
                    r.payload_digest,
                    r.frame,
                    int(r.root),
                    r.score,
                ]
                for r in bundle.dag
            ),
        )
    )

    finality_dir = root / FINALITY_DIR
    finality_dir.mkdir(parents=True, exist_ok=True)
    for stale in finality_dir.glob("*.tsv"):
        if stale.stem not in bundle.finality:
            stale.unlink()
    for node_id, records in sorted(bundle.finality.items()):
        written.append(write_finality_log(finality_dir / f"{node_id}.tsv", records))

    written.append(
        _write_tsv(
            root / REWARDS_FILE,
            REWARD_COLUMNS,
            (
                [r.day, r.account]
                + [
                    fmt_money(v)
                    for v in (
                        r.validation_reward,
                        r.fees,
                        r.delegation_share,
                        r.commission,
                        r.burn,
                        r.reporter_reward,
                    )
                ]
                for r in bundle.rewards
            ),
        )
    )
    written.append(
        _write_tsv(
            root / STATEMENTS_FILE,
            STATEMENT_COLUMNS,
            (
                [s.day]
                + [fmt_money(v) for v in (s.pool, s.fees_collected, s.spv_credit, s.remainder)]
                for s in bundle.statements
            ),
        )
    )
    written.append(
        _write_tsv(
            root / LEDGER_FILE,
            LEDGER_COLUMNS,
            (
                [
                    r.account_id,
                    r.tokens_held,
                    r.txn_staked,
                    r.validation_staked,
                    r.delegated_in,
                    r.role.value,
                    r.power,
                ]
                for r in bundle.ledger
            ),
        )
    )
    written.append(
        _write_tsv(
            root / WEIGHTS_FILE,
            WEIGHT_COLUMNS,
            ([w.epoch, w.account, w.role.value, w.power] for w in bundle.weights),
        )
    )
    written.append(
        _write_tsv(
            root / SAGA_FILE,
            SAGA_COLUMNS,
            ([s.account, s.points, s.earned] for s in bundle.saga),
        )
    )

    scenario_path = root / SCENARIO_FILE
    scenario_path.write_text(toml.dumps(bundle.config.to_dict()), encoding="utf-8")
    written.append(scenario_path)
    return written


__all__ = ["build_bundle", "write_bundle", "write_finality_log", "finality_lines"]
