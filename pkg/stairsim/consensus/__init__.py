"""
共识引擎包

帧分配、根选举、Clotho 投票、Atropos 定序与检查点。
"""

from stairsim.consensus.engine import (
    COIN_FRAME_DELAY,
    ConsensusEngine,
    coin_bit,
    exceeds_two_thirds,
    is_coin_frame,
)
from stairsim.consensus.records import (
    Checkpoint,
    DoubleVote,
    Fame,
    FinalityRecord,
    FrameOutcome,
    RootRecord,
)

__all__ = [
    "COIN_FRAME_DELAY",
    "ConsensusEngine",
    "coin_bit",
    "exceeds_two_thirds",
    "is_coin_frame",
    "Checkpoint",
    "DoubleVote",
    "Fame",
    "FinalityRecord",
    "FrameOutcome",
    "RootRecord",
]
