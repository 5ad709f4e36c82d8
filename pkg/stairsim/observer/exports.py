"""
导出文件格式

运行目录中的制表符分隔文件及其读取。观察者只通过这些文件了解一次运行。
"""

import csv
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from stairsim.consensus.records import FinalityRecord
from stairsim.exceptions import ConfigError, MalformedExport
from stairsim.ledger.account import Role
from stairsim.ledger.ledger import LedgerRow
from stairsim.models.config import ScenarioConfig

DAG_FILE = "dag.tsv"
FINALITY_DIR = "finality"
REWARDS_FILE = "rewards.tsv"
STATEMENTS_FILE = "statements.tsv"
LEDGER_FILE = "ledger.tsv"
WEIGHTS_FILE = "weights.tsv"
SAGA_FILE = "saga.tsv"
SCENARIO_FILE = "scenario.toml"

SPV_ACCOUNT = "SPV"

DAG_COLUMNS = (
    "id",
    "creator",
    "seq",
    "self_parent",
    "other_parents",
    "lamport_ts",
    "fee_total",
    "role",
    "payload_digest",
    "frame",
    "root",
    "score",
)
FINALITY_COLUMNS = ("position", "block_id", "atropos_id", "frame", "lamport_ts")
REWARD_COLUMNS = (
    "day",
    "account",
    "validation_reward",
    "fees",
    "delegation_share",
    "commission",
    "burn",
    "reporter_reward",
)
STATEMENT_COLUMNS = ("day", "pool", "fees_collected", "spv_credit", "remainder")
LEDGER_COLUMNS = (
    "account_id",
    "tokens_held",
    "txn_staked",
    "validation_staked",
    "delegated_in",
    "role",
    "power",
)
WEIGHT_COLUMNS = ("epoch", "account", "role", "power")
SAGA_COLUMNS = ("account", "points", "earned")


@dataclass(frozen=True)
class DagRow:
    """导出的区块（含节点声明的帧、根与分数）"""

    id: str
    creator: str
    seq: int
    self_parent: Optional[str]
    other_parents: Tuple[str, ...]
    lamport_ts: int
    fee_total: int
    role: Role
    payload_digest: str
    frame: int
    root: bool
    score: int

    @property
    def parents(self) -> List[str]:
        if self.self_parent is None:
            return list(self.other_parents)
        return [self.self_parent, *self.other_parents]

    @property
    def is_leaf(self) -> bool:
        return self.self_parent is None and not self.other_parents


@dataclass(frozen=True)
class RewardRow:
    day: int
    account: str
    validation_reward: Decimal
    fees: Decimal
    delegation_share: Decimal
    commission: Decimal
    burn: Decimal
    reporter_reward: Decimal

    @property
    def distributed(self) -> Decimal:
        return self.validation_reward + self.fees + self.delegation_share + self.commission


@dataclass(frozen=True)
class StatementRow:
    day: int
    pool: Decimal
    fees_collected: Decimal
    spv_credit: Decimal
    remainder: Decimal


@dataclass(frozen=True)
class WeightRow:
    epoch: int
    account: str
    role: Role
    power: int


@dataclass(frozen=True)
class SagaRow:
    account: str
    points: int
    earned: int


@dataclass
class ExportBundle:
    """一次运行的全部导出"""

    config: ScenarioConfig
    dag: List[DagRow] = field(default_factory=list)
    finality: Dict[str, List[FinalityRecord]] = field(default_factory=dict)
    rewards: List[RewardRow] = field(default_factory=list)
    statements: List[StatementRow] = field(default_factory=list)
    ledger: List[LedgerRow] = field(default_factory=list)
    weights: List[WeightRow] = field(default_factory=list)
    saga: List[SagaRow] = field(default_factory=list)

    @property
    def params(self):
        return self.config.params

    def powers(self) -> Dict[int, Dict[str, int]]:
        """epoch -> account -> power"""
        table: Dict[int, Dict[str, int]] = {}
        for row in self.weights:
            table.setdefault(row.epoch, {})[row.account] = row.power
        return table

    def roles(self) -> Dict[int, Dict[str, Role]]:
        table: Dict[int, Dict[str, Role]] = {}
        for row in self.weights:
            table.setdefault(row.epoch, {})[row.account] = row.role
        return table


# ---------------------------------------------------------------------------
# 读取
# ---------------------------------------------------------------------------


def fmt_money(value: Decimal) -> str:
    return f"{value:.2f}"


def _parse_int(value: str) -> int:
    return int(value)


def _parse_decimal(value: str) -> Decimal:
    try:
        return Decimal(value)
    except InvalidOperation:
        raise ValueError(f"无效金额: {value!r}")


def _parse_bool(value: str) -> bool:
    if value not in ("0", "1"):
        raise ValueError(f"无效布尔值: {value!r}")
    return value == "1"


def _read_rows(
    path: Path, columns: Sequence[str], parse: Callable[[Dict[str, str]], object]
) -> list:
    if not path.is_file():
        raise MalformedExport(f"导出文件缺失: {path}", context={"path": str(path)})
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise MalformedExport(
                f"表头不符: {path.name}",
                context={"path": str(path), "header": header, "expected": list(columns)},
            )
        rows = []
        for lineno, values in enumerate(reader, start=2):
            if len(values) != len(columns):
                raise MalformedExport(
                    f"{path.name}:{lineno} 列数应为 {len(columns)}，实际 {len(values)}",
                    context={"path": str(path), "line": lineno},
                )
            try:
                rows.append(parse(dict(zip(columns, values))))
            except (ValueError, KeyError) as e:
                raise MalformedExport(
                    f"{path.name}:{lineno} 解析失败: {e}",
                    context={"path": str(path), "line": lineno},
                )
        return rows


def _dag_row(r: Dict[str, str]) -> DagRow:
    return DagRow(
        id=r["id"],
        creator=r["creator"],
        seq=_parse_int(r["seq"]),
        self_parent=r["self_parent"] or None,
        other_parents=tuple(p for p in r["other_parents"].split(",") if p),
        lamport_ts=_parse_int(r["lamport_ts"]),
        fee_total=_parse_int(r["fee_total"]),
        role=Role(r["role"]),
        payload_digest=r["payload_digest"],
        frame=_parse_int(r["frame"]),
        root=_parse_bool(r["root"]),
        score=_parse_int(r["score"]),
    )


def _finality_row(r: Dict[str, str]) -> FinalityRecord:
    return FinalityRecord(
        position=_parse_int(r["position"]),
        block_id=r["block_id"],
        atropos_id=r["atropos_id"],
        frame=_parse_int(r["frame"]),
        lamport_ts=_parse_int(r["lamport_ts"]),
    )


def _reward_row(r: Dict[str, str]) -> RewardRow:
    return RewardRow(
        day=_parse_int(r["day"]),
        account=r["account"],
        **{c: _parse_decimal(r[c]) for c in REWARD_COLUMNS[2:]},
    )


def _statement_row(r: Dict[str, str]) -> StatementRow:
    return StatementRow(
        day=_parse_int(r["day"]),
        **{c: _parse_decimal(r[c]) for c in STATEMENT_COLUMNS[1:]},
    )


def _ledger_row(r: Dict[str, str]) -> LedgerRow:
    return LedgerRow(
        account_id=r["account_id"],
        tokens_held=_parse_int(r["tokens_held"]),
        txn_staked=_parse_int(r["txn_staked"]),
        validation_staked=_parse_int(r["validation_staked"]),
        delegated_in=_parse_int(r["delegated_in"]),
        role=Role(r["role"]),
        power=_parse_int(r["power"]),
    )


def _weight_row(r: Dict[str, str]) -> WeightRow:
    return WeightRow(
        epoch=_parse_int(r["epoch"]),
        account=r["account"],
        role=Role(r["role"]),
        power=_parse_int(r["power"]),
    )


def _saga_row(r: Dict[str, str]) -> SagaRow:
    return SagaRow(
        account=r["account"], points=_parse_int(r["points"]), earned=_parse_int(r["earned"])
    )


def load_bundle(export_dir: Union[str, Path]) -> ExportBundle:
    """
    读取运行目录

    Raises:
        MalformedExport: 文件缺失、表头或字段格式错误
    """
    root = Path(export_dir)
    if not root.is_dir():
        raise MalformedExport(f"导出目录不存在: {root}", context={"path": str(root)})

    try:
        config = ScenarioConfig.load(root / SCENARIO_FILE)
    except ConfigError as e:
        raise MalformedExport(f"无法读取 {SCENARIO_FILE}: {e.message}", context=e.context)

    finality_dir = root / FINALITY_DIR
    if not finality_dir.is_dir():
        raise MalformedExport(f"缺少目录: {finality_dir}", context={"path": str(finality_dir)})
    finality = {
        path.stem: _read_rows(path, FINALITY_COLUMNS, _finality_row)
        for path in sorted(finality_dir.glob("*.tsv"))
    }

    return ExportBundle(
        config=config,
        dag=_read_rows(root / DAG_FILE, DAG_COLUMNS, _dag_row),
        finality=finality,
        rewards=_read_rows(root / REWARDS_FILE, REWARD_COLUMNS, _reward_row),
        statements=_read_rows(root / STATEMENTS_FILE, STATEMENT_COLUMNS, _statement_row),
        ledger=_read_rows(root / LEDGER_FILE, LEDGER_COLUMNS, _ledger_row),
        weights=_read_rows(root / WEIGHTS_FILE, WEIGHT_COLUMNS, _weight_row),
        saga=_read_rows(root / SAGA_FILE, SAGA_COLUMNS, _saga_row),
    )


__all__ = [
    "DAG_COLUMNS",
    "FINALITY_COLUMNS",
    "REWARD_COLUMNS",
    "STATEMENT_COLUMNS",
    "LEDGER_COLUMNS",
    "WEIGHT_COLUMNS",
    "SAGA_COLUMNS",
    "DAG_FILE",
    "FINALITY_DIR",
    "REWARDS_FILE",
    "STATEMENTS_FILE",
    "LEDGER_FILE",
    "WEIGHTS_FILE",
    "SAGA_FILE",
    "SCENARIO_FILE",
    "SPV_ACCOUNT",
    "DagRow",
    "RewardRow",
    "StatementRow",
    "WeightRow",
    "SagaRow",
    "ExportBundle",
    "fmt_money",
    "load_bundle",
]
