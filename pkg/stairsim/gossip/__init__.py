"""
模拟网络包

节点的创建/响应循环、k-PeerSelection、同步消息与投递队列。
"""

from stairsim.gossip.messages import MessageKind, SyncMessage
from stairsim.gossip.network import SimNetwork, check_invariants, run_scenario
from stairsim.gossip.node import NodeStats, SimNode
from stairsim.gossip.peers import k_peer_selection
from stairsim.gossip.queue import DeliveryQueue, Priority, ScheduledMessage
from stairsim.gossip.report import RunReport

__all__ = [
    "MessageKind",
    "SyncMessage",
    "SimNetwork",
    "check_invariants",
    "run_scenario",
    "NodeStats",
    "SimNode",
    "k_peer_selection",
    "DeliveryQueue",
    "Priority",
    "ScheduledMessage",
    "RunReport",
]
