"""
stairsim - PoS x-DAG 共识模拟器
"""

__version__ = "0.2.0"

# 初始化日志
from stairsim.logger import setup_logger

setup_logger()

# 导出主要组件
from stairsim.models import ProtocolParams, ScenarioConfig
from stairsim.gossip import RunReport, SimNetwork, run_scenario
from stairsim.orchestrator import ScenarioOrchestrator
from stairsim.exceptions import StairSimError
from stairsim.logger import logger

__all__ = [
    "__version__",
    "ProtocolParams",
    "ScenarioConfig",
    "RunReport",
    "SimNetwork",
    "run_scenario",
    "ScenarioOrchestrator",
    "StairSimError",
    "logger",
]
