"""
配置模块

从 models 导入配置类，提供简短的导入路径。
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
