"""
配置数据模型

定义场景配置 (ScenarioConfig) 与协议参数 (ProtocolParams) 的全部数据类。
"""

import json
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import toml
import yaml

from stairsim.exceptions import ConfigParseError, ConfigValidationError


class FaultBehavior(Enum):
    """节点故障行为"""

    HONEST = "honest"
    SILENT_AFTER = "silent_after"  # 指定 tick 之后不再发送与响应
    EQUIVOCATE = "equivocate"  # 以给定概率制造同 seq 双块
    SPAM = "spam"  # 每个 tick 额外创建若干结构合法的区块


class SelectionMode(Enum):
    """k-PeerSelection 模式"""

    STAKE = "stake"  # 按质押比例选择（主规则）
    INVERSE = "inverse"  # Validator 按质押反比选择 User


class FeeMode(Enum):
    """交易费分配模式"""

    CREATOR = "creator"
    EQUAL_SPLIT = "equal_split"


class ObserverRewardMode(Enum):
    """观察者举报分叉的奖励方式"""

    BURN_SHARE = "burn_share"
    SAGA = "saga"


class StakeChangeKind(Enum):
    """检查点生效的质押变更"""

    DEPOSIT = "deposit"
    EXIT = "exit"
    # 续期验证质押，不需要数量
    RENEW = "renew"


@dataclass
class ProtocolParams:
    """协议参数"""

    U: int = 1000
    L: int = 1
    k: int = 2
    epsilon: int = 1
    lambda_days: int = 90
    checkpoint_frame_interval: int = 100
    exit_lock_days: int = 90
    F_total_supply: int = 3_175_000_000
    Z_total_block_rewards: int = 996_341_176
    reward_days: int = 1460
    phi_spv_commission: float = 0.30
    mu_validator_commission: float = 0.15
    delegation_cap_multiplier: int = 15

    def validate(self) -> None:
        """验证参数范围"""
        if not 0 < self.L <= self.U:
            raise ConfigValidationError(
                f"必须满足 0 < L <= U (L={self.L}, U={self.U})",
                context={"L": self.L, "U": self.U},
            )
        if self.k < 2:
            raise ConfigValidationError(f"k 必须 >= 2 (k={self.k})")
        for name in ("phi_spv_commission", "mu_validator_commission"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ConfigValidationError(f"{name} 必须位于 [0, 1]: {value}")
        for name in (
            "epsilon",
            "lambda_days",
            "checkpoint_frame_interval",
            "exit_lock_days",
            "F_total_supply",
            "Z_total_block_rewards",
            "reward_days",
            "delegation_cap_multiplier",
        ):
            if getattr(self, name) <= 0:
                raise ConfigValidationError(f"{name} 必须为正数")


@dataclass
class NodeSpec:
    """节点（账户）定义"""

    id: str
    stake: int = 0

    def __post_init__(self):
        if not self.id:
            raise ConfigValidationError("NodeSpec 必须提供 id")
        if ":" in self.id or "\t" in self.id:
            raise ConfigValidationError(f"节点 id 不能包含 ':' 或制表符: {self.id}")
        if not isinstance(self.stake, int) or isinstance(self.stake, bool):
            raise ConfigValidationError(f"节点 {self.id} 的 stake 必须为整数")
        if self.stake < 0:
            raise ConfigValidationError(f"节点 {self.id} 的 stake 不能为负")


@dataclass
class FaultSpec:
    """故障注入定义"""

    node_id: str
    behavior: FaultBehavior = FaultBehavior.HONEST
    param: Optional[float] = None

    def __post_init__(self):
        if self.behavior == FaultBehavior.SILENT_AFTER and self.param is None:
            raise ConfigValidationError(f"{self.node_id}: silent_after 需要 tick 参数")
        if self.behavior == FaultBehavior.EQUIVOCATE:
            if self.param is None:
                self.param = 1.0
            if not 0 < self.param <= 1:
                raise ConfigValidationError(
                    f"{self.node_id}: equivocate 概率必须位于 (0, 1]"
                )
        if self.behavior == FaultBehavior.SPAM:
            if self.param is None:
                self.param = 2
            if self.param < 1:
                raise ConfigValidationError(f"{self.node_id}: spam 参数必须 >= 1")


@dataclass
class DelegationSpec:
    """创世委托"""

    source: str
    target: str
    amount: int
    lock_days: int = 1


@dataclass
class StakeChangeSpec:
    """在检查点帧生效的质押变更"""

    checkpoint: int
    account: str
    kind: StakeChangeKind
    amount: int


# 扁平键到 ProtocolParams 字段的映射
_PARAM_KEYS: Dict[str, str] = {
    "U": "U",
    "L": "L",
    "k": "k",
    "epsilon": "epsilon",
    "lambda_days": "lambda_days",
    "checkpoint_interval": "checkpoint_frame_interval",
    "checkpoint_frame_interval": "checkpoint_frame_interval",
    "exit_lock_days": "exit_lock_days",
    "F_total_supply": "F_total_supply",
    "Z_total_block_rewards": "Z_total_block_rewards",
    "reward_days": "reward_days",
    "phi": "phi_spv_commission",
    "phi_spv_commission": "phi_spv_commission",
    "mu": "mu_validator_commission",
    "mu_validator_commission": "mu_validator_commission",
    "delegation_cap_multiplier": "delegation_cap_multiplier",
}

_SCALAR_KEYS: Dict[str, type] = {
    "name": str,
    "seed": int,
    "max_ticks": int,
    "latency_min": int,
    "latency_max": int,
    "create_probability": float,
    "frames_per_day": int,
    "sample_interval": int,
    "drain_ticks": int,
    "max_txns_per_block": int,
    "max_fee": int,
    "reporter_fraction": float,
    "points_per_finding": int,
}

_ENUM_KEYS: Dict[str, type] = {
    "selection_mode": SelectionMode,
    "fee_mode": FeeMode,
    "observer_reward": ObserverRewardMode,
}

_LIST_KEYS = ("nodes", "faults", "delegations", "stake_changes")


def _coerce(key: str, value: Any, typ: type) -> Any:
    """按声明类型检查/转换配置值"""
    if typ is int:
        if isinstance(value, bool):
            raise ConfigValidationError(f"{key} 必须为整数: {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise ConfigValidationError(f"{key} 必须为整数: {value!r}")
    if typ is float:
        if isinstance(value, bool):
            raise ConfigValidationError(f"{key} 必须为数字: {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigValidationError(f"{key} 必须为数字: {value!r}")
    if typ is str:
        return str(value)
    if issubclass(typ, Enum):
        try:
            return typ(value)
        except ValueError:
            allowed = ", ".join(m.value for m in typ)
            raise ConfigValidationError(f"{key} 必须是 {allowed} 之一: {value!r}")
    return value


@dataclass
class ScenarioConfig:
    """场景主配置类"""

    nodes: List[NodeSpec] = field(default_factory=list)
    faults: List[FaultSpec] = field(default_factory=list)
    params: ProtocolParams = field(default_factory=ProtocolParams)

    name: str = "scenario"
    seed: int = 42
    max_ticks: int = 2000
    latency_min: int = 1
    latency_max: int = 3
    create_probability: float = 0.9
    frames_per_day: int = 50
    sample_interval: int = 50
    drain_ticks: int = 500
    max_txns_per_block: int = 3
    max_fee: int = 10
    selection_mode: SelectionMode = SelectionMode.STAKE
    fee_mode: FeeMode = FeeMode.CREATOR
    reporter_fraction: float = 0.10
    observer_reward: ObserverRewardMode = ObserverRewardMode.BURN_SHARE
    points_per_finding: int = 1
    delegations: List[DelegationSpec] = field(default_factory=list)
    stake_changes: List[StakeChangeSpec] = field(default_factory=list)

    # 原始配置字典
    _raw_config: Dict[str, Any] = field(default_factory=dict, repr=False)

    # ------------------------------------------------------------------
    # 加载
    # ------------------------------------------------------------------

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        """从文件加载配置（支持 from 继承）"""
        config_dict = cls.read_file(path)
        merged = cls._resolve_inheritance(config_dict, Path(path).parent, depth=0)
        return cls.from_dict(merged)

    @staticmethod
    def read_file(path: Union[str, Path]) -> Dict[str, Any]:
        """按后缀读取 toml / yaml / json"""
        path = Path(path)
        if not path.exists():
            raise ConfigParseError(f"配置文件不存在: {path}", context={"path": str(path)})

        suffix = path.suffix.lower()
        try:
            text = path.read_text(encoding="utf-8")
            if suffix in (".toml", ".cfg"):
                data = toml.loads(text)
            elif suffix == ".json":
                data = json.loads(text)
            elif suffix in (".yaml", ".yml"):
                data = yaml.safe_load(text)
            else:
                raise ConfigParseError(f"不支持的配置文件格式: {suffix}")
        except ConfigParseError:
            raise
        except Exception as e:
            raise ConfigParseError(f"解析配置失败: {path}: {e}", context={"path": str(path)})

        if not isinstance(data, dict):
            raise ConfigParseError(f"配置根节点必须是字典: {path}")
        if "nodes" in data and data["nodes"] in ([], None):
            # toml 会把截断的 `nodes = [` 读成空列表
            raise ConfigParseError(f"nodes 为空，文件可能不完整: {path}", context={"path": str(path)})
        return data

    @classmethod
    def _resolve_inheritance(
        cls, config_dict: Dict[str, Any], base_dir: Path, depth: int
    ) -> Dict[str, Any]:
        """递归解析 from 继承（仅本地文件）"""
        parent_refs = config_dict.get("from")
        if not parent_refs:
            return config_dict
        if depth > 8:
            raise ConfigParseError("配置继承层级过深")

        if isinstance(parent_refs, (str, dict)):
            parent_refs = [parent_refs]

        final_dict: Dict[str, Any] = {}
        for ref in parent_refs:
            ref_path = ref.get("path", "") if isinstance(ref, dict) else ref
            if not ref_path:
                continue
            parent_path = (base_dir / ref_path).resolve()
            parent_dict = cls.read_file(parent_path)
            resolved = cls._resolve_inheritance(parent_dict, parent_path.parent, depth + 1)
            final_dict = cls._merge_dicts(final_dict, resolved)

        return cls._merge_dicts(final_dict, config_dict)

    @classmethod
    def _merge_dicts(
        cls, base: Dict[str, Any], overlay: Dict[str, Any]
    ) -> Dict[str, Any]:
        """合并两个配置字典"""
        result = base.copy()

        for key, value in overlay.items():
            if key == "from":
                continue

            if (
                key in result
                and isinstance(result[key], dict)
                and isinstance(value, dict)
            ):
                result[key] = cls._merge_dicts(result[key], value)
            elif (
                key in result
                and isinstance(result[key], list)
                and isinstance(value, list)
            ):
                # 列表合并去重
                combined = result[key] + value
                seen = []
                for item in combined:
                    if item not in seen:
                        seen.append(item)
                result[key] = seen
            else:
                result[key] = value

        return result

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "ScenarioConfig":
        """从字典创建配置对象，未知键直接拒绝"""
        raw_config = dict(config_dict)
        config_dict = {k: v for k, v in config_dict.items() if k != "from"}

        known = set(_PARAM_KEYS) | set(_SCALAR_KEYS) | set(_ENUM_KEYS) | set(_LIST_KEYS)
        unknown = sorted(set(config_dict) - known)
        if unknown:
            raise ConfigValidationError(
                f"未知配置键: {', '.join(unknown)}", context={"keys": unknown}
            )

        param_values: Dict[str, Any] = {}
        for key, target in _PARAM_KEYS.items():
            if key in config_dict:
                typ = float if target.endswith("_commission") else int
                param_values[target] = _coerce(key, config_dict[key], typ)
        params = ProtocolParams(**param_values)

        kwargs: Dict[str, Any] = {}
        for key, typ in _SCALAR_KEYS.items():
            if key in config_dict:
                kwargs[key] = _coerce(key, config_dict[key], typ)
        for key, typ in _ENUM_KEYS.items():
            if key in config_dict:
                kwargs[key] = _coerce(key, config_dict[key], typ)

        return cls(
            nodes=cls._parse_nodes(config_dict.get("nodes", [])),
            faults=cls._parse_faults(config_dict.get("faults", [])),
            params=params,
            delegations=cls._parse_delegations(config_dict.get("delegations", [])),
            stake_changes=cls._parse_stake_changes(config_dict.get("stake_changes", [])),
            _raw_config=raw_config,
            **kwargs,
        )

    @staticmethod
    def _parse_nodes(entries: List[Any]) -> List[NodeSpec]:
        """解析节点条目，支持 id:stake 语法"""
        result = []
        for entry in entries:
            if isinstance(entry, str):
                if ":" not in entry:
                    raise ConfigValidationError(f"节点条目应为 id:stake 形式: {entry!r}")
                node_id, stake = entry.rsplit(":", 1)
                result.append(NodeSpec(id=node_id.strip(), stake=_coerce("stake", stake.strip(), int)))
            elif isinstance(entry, dict):
                result.append(
                    NodeSpec(
                        id=str(entry.get("id", "")),
                        stake=_coerce("stake", entry.get("stake", 0), int),
                    )
                )
            else:
                raise ConfigValidationError(f"无效的节点条目类型: {type(entry)}")
        return result

    @staticmethod
    def _parse_faults(entries: List[Any]) -> List[FaultSpec]:
        """解析故障条目，支持 id:behavior[:param] 语法"""
        result = []
        for entry in entries:
            if isinstance(entry, str):
                parts = [p.strip() for p in entry.split(":")]
                if len(parts) not in (2, 3):
                    raise ConfigValidationError(
                        f"故障条目应为 id:behavior[:param] 形式: {entry!r}"
                    )
                param = _coerce("param", parts[2], float) if len(parts) == 3 else None
                result.append(
                    FaultSpec(
                        node_id=parts[0],
                        behavior=_coerce("behavior", parts[1], FaultBehavior),
                        param=param,
                    )
                )
            elif isinstance(entry, dict):
                param = entry.get("param")
                result.append(
                    FaultSpec(
                        node_id=str(entry.get("id", "")),
                        behavior=_coerce("behavior", entry.get("behavior", "honest"), FaultBehavior),
                        param=None if param is None else _coerce("param", param, float),
                    )
                )
            else:
                raise ConfigValidationError(f"无效的故障条目类型: {type(entry)}")
        return result

    @staticmethod
    def _parse_delegations(entries: List[Any]) -> List[DelegationSpec]:
        """解析创世委托"""
        result = []
        for entry in entries:
            if not isinstance(entry, dict):
                raise ConfigValidationError(f"无效的委托条目类型: {type(entry)}")
            result.append(
                DelegationSpec(
                    source=str(entry.get("from", "")),
                    target=str(entry.get("to", "")),
                    amount=_coerce("amount", entry.get("amount", 0), int),
                    lock_days=_coerce("lock_days", entry.get("lock_days", 1), int),
                )
            )
        return result

    @staticmethod
    def _parse_stake_changes(entries: List[Any]) -> List[StakeChangeSpec]:
        """解析检查点质押变更"""
        result = []
        for entry in entries:
            if not isinstance(entry, dict):
                raise ConfigValidationError(f"无效的质押变更条目类型: {type(entry)}")
            result.append(
                StakeChangeSpec(
                    checkpoint=_coerce("checkpoint", entry.get("checkpoint", 0), int),
                    account=str(entry.get("account", "")),
                    kind=_coerce("kind", entry.get("kind", "deposit"), StakeChangeKind),
                    amount=_coerce("amount", entry.get("amount", 0), int),
                )
            )
        return result

    # ------------------------------------------------------------------
    # 覆盖与序列化
    # ------------------------------------------------------------------

    def with_overrides(self, overrides: Dict[str, str]) -> "ScenarioConfig":
        """应用 --set key=value 覆盖，按字段类型检查"""
        data = self.to_dict()
        for key, value in overrides.items():
            if key in _PARAM_KEYS:
                typ = float if _PARAM_KEYS[key].endswith("_commission") else int
                data[key] = _coerce(key, value, typ)
            elif key in _SCALAR_KEYS:
                data[key] = _coerce(key, value, _SCALAR_KEYS[key])
            elif key in _ENUM_KEYS:
                data[key] = _coerce(key, value, _ENUM_KEYS[key]).value
            else:
                raise ConfigValidationError(
                    f"不可覆盖的配置键: {key}", context={"key": key}
                )
        return ScenarioConfig.from_dict(data)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        """返回替换种子后的配置"""
        return self.with_overrides({"seed": str(seed)})

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式（扁平键）"""
        data: Dict[str, Any] = {
            "name": self.name,
            "seed": self.seed,
            "nodes": [f"{n.id}:{n.stake}" for n in self.nodes],
            "faults": [
                {"id": f.node_id, "behavior": f.behavior.value, **({"param": f.param} if f.param is not None else {})}
                for f in self.faults
            ],
            "k": self.params.k,
            "U": self.params.U,
            "L": self.params.L,
            "epsilon": self.params.epsilon,
            "lambda_days": self.params.lambda_days,
            "checkpoint_interval": self.params.checkpoint_frame_interval,
            "exit_lock_days": self.params.exit_lock_days,
            "F_total_supply": self.params.F_total_supply,
            "Z_total_block_rewards": self.params.Z_total_block_rewards,
            "reward_days": self.params.reward_days,
            "phi": self.params.phi_spv_commission,
            "mu": self.params.mu_validator_commission,
            "delegation_cap_multiplier": self.params.delegation_cap_multiplier,
            "delegations": [
                {"from": d.source, "to": d.target, "amount": d.amount, "lock_days": d.lock_days}
                for d in self.delegations
            ],
            "stake_changes": [
                {"checkpoint": c.checkpoint, "account": c.account, "kind": c.kind.value, "amount": c.amount}
                for c in self.stake_changes
            ],
        }
        for key in _SCALAR_KEYS:
            data[key] = getattr(self, key)
        for key in _ENUM_KEYS:
            data[key] = getattr(self, key).value
        return data

    # ------------------------------------------------------------------
    # 校验
    # ------------------------------------------------------------------

    def fault_for(self, node_id: str) -> FaultSpec:
        """获取节点故障计划（默认诚实）"""
        for fault in self.faults:
            if fault.node_id == node_id:
                return fault
        return FaultSpec(node_id=node_id)

    def validate(self) -> None:
        """验证场景完整性（ConfigInvalid → ConfigValidationError）"""
        self.params.validate()

        if not self.nodes:
            raise ConfigValidationError("场景必须至少包含一个节点")

        ids = [n.id for n in self.nodes]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ConfigValidationError(f"节点 id 重复: {', '.join(duplicates)}")

        validators = [n for n in self.nodes if n.stake >= self.params.U]
        users = [n for n in self.nodes if self.params.L <= n.stake < self.params.U]
        if not validators:
            raise ConfigValidationError("场景中没有 Validator 节点")
        if not users:
            raise ConfigValidationError("场景中没有 User 节点，无法满足交叉类型引用")
        if self.params.k - 1 > len(validators) + len(users) - 1:
            raise ConfigValidationError(
                f"k={self.params.k} 超过可引用的节点数",
                context={"k": self.params.k, "validating_nodes": len(validators) + len(users)},
            )

        if self.max_ticks <= 0:
            raise ConfigValidationError("max_ticks 必须为正数")
        if self.latency_min < 1 or self.latency_max < self.latency_min:
            raise ConfigValidationError(
                f"延迟范围无效: [{self.latency_min}, {self.latency_max}]"
            )
        if not 0 < self.create_probability <= 1:
            raise ConfigValidationError("create_probability 必须位于 (0, 1]")
        if not 0 <= self.reporter_fraction <= 1:
            raise ConfigValidationError("reporter_fraction 必须位于 [0, 1]")
        for name in ("frames_per_day", "sample_interval", "max_fee"):
            if getattr(self, name) <= 0:
                raise ConfigValidationError(f"{name} 必须为正数")
        if self.drain_ticks < 0 or self.max_txns_per_block < 0 or self.points_per_finding < 0:
            raise ConfigValidationError("drain_ticks / max_txns_per_block / points_per_finding 不能为负")

        known = set(ids)
        stakes = {n.id: n.stake for n in self.nodes}
        seen_faults = set()
        for fault in self.faults:
            if fault.node_id not in known:
                raise ConfigValidationError(f"故障引用了未知节点: {fault.node_id}")
            if fault.node_id in seen_faults:
                raise ConfigValidationError(f"节点 {fault.node_id} 配置了多个故障")
            seen_faults.add(fault.node_id)
            if stakes[fault.node_id] < self.params.L:
                raise ConfigValidationError(f"观察者节点不能注入故障: {fault.node_id}")

        for d in self.delegations:
            if d.source not in known or d.target not in known:
                raise ConfigValidationError(f"委托引用了未知节点: {d.source} -> {d.target}")
            if d.source == d.target:
                raise ConfigValidationError(f"不能委托给自己: {d.source}")

        interval = self.params.checkpoint_frame_interval
        for c in self.stake_changes:
            if c.account not in known:
                raise ConfigValidationError(f"质押变更引用了未知节点: {c.account}")
            if c.checkpoint <= 0 or c.checkpoint % interval != 0:
                raise ConfigValidationError(
                    f"质押变更必须落在检查点帧 ({interval} 的正整数倍): {c.checkpoint}"
                )
            if c.kind == StakeChangeKind.RENEW:
                if c.amount < 0:
                    raise ConfigValidationError(f"续期的数量不能为负: {c.amount}")
            elif c.amount <= 0:
                raise ConfigValidationError(f"质押变更数量必须为正: {c.amount}")


__all__ = [
    "FaultBehavior",
    "SelectionMode",
    "FeeMode",
    "ObserverRewardMode",
    "StakeChangeKind",
    "ProtocolParams",
    "NodeSpec",
    "FaultSpec",
    "DelegationSpec",
    "StakeChangeSpec",
    "ScenarioConfig",
]
