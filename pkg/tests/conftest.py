"""
公共测试夹具
"""

from pathlib import Path

import pytest

from stairsim.exporter import write_bundle
from stairsim.gossip import SimNetwork, run_scenario
from stairsim.ledger import StakeLedger
from stairsim.models import ProtocolParams, ScenarioConfig

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

FIVE_NODES = ["u1:1", "u2:1", "u3:1", "v1:1000", "v2:2000"]


def make_config(**overrides) -> ScenarioConfig:
    """三个 User、两个 Validator 的小规模场景"""
    data = {
        "name": "five_node",
        "nodes": list(FIVE_NODES),
        "k": 2,
        "seed": 42,
        "max_ticks": 300,
        "drain_ticks": 300,
        "frames_per_day": 10,
    }
    data.update(overrides)
    return ScenarioConfig.from_dict(data)


@pytest.fixture
def params() -> ProtocolParams:
    return ProtocolParams()


@pytest.fixture
def five_node_config() -> ScenarioConfig:
    return make_config()


@pytest.fixture
def five_node_ledger(five_node_config) -> StakeLedger:
    return StakeLedger.from_scenario(five_node_config)


@pytest.fixture(scope="session")
def observed_run():
    """带一个观察者的五节点运行（整个测试会话共享）"""
    config = make_config(nodes=FIVE_NODES + ["o1:0"])
    network = SimNetwork(config)
    report = run_scenario(config, network)
    return network, report


@pytest.fixture(scope="session")
def observed_report(observed_run):
    return observed_run[1]


@pytest.fixture
def export_dir(observed_report, tmp_path) -> Path:
    write_bundle(observed_report.bundle, tmp_path / "export")
    return tmp_path / "export"
