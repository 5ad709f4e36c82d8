"""
x-DAG 核心包

事件区块结构、k 引用创建规则、可达性与验证分数。
"""

from stairsim.dag.block import (
    EventBlock,
    Transaction,
    compute_block_id,
    payload_digest,
)
from stairsim.dag.xdag import ValidationScore, XDag, iter_bits

__all__ = [
    "EventBlock",
    "Transaction",
    "compute_block_id",
    "payload_digest",
    "ValidationScore",
    "XDag",
    "iter_bits",
]
