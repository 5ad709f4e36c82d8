"""
stairsim 数据模型包

包含场景配置与协议参数模型定义。
"""

from stairsim.models.config import (
    FaultBehavior,
    SelectionMode,
    FeeMode,
    ObserverRewardMode,
    StakeChangeKind,
    ProtocolParams,
    NodeSpec,
    FaultSpec,
    DelegationSpec,
    StakeChangeSpec,
    ScenarioConfig,
)

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
