"""
同步消息
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Sequence, Tuple

from stairsim.dag.block import EventBlock


class MessageKind(Enum):
    SYNC_REQUEST = "SyncRequest"
    SYNC_RESPONSE = "SyncResponse"
    BROADCAST = "Broadcast"


@dataclass(frozen=True)
class SyncMessage:
    """节点间消息"""

    kind: MessageKind
    sender: str
    recipient: str
    known_heights: Dict[str, int] = field(default_factory=dict)
    wanted: Tuple[str, ...] = ()
    blocks: Tuple[EventBlock, ...] = ()

    @classmethod
    def request(
        cls,
        sender: str,
        recipient: str,
        known_heights: Dict[str, int],
        wanted: Sequence[str] = (),
    ) -> "SyncMessage":
        return cls(
            MessageKind.SYNC_REQUEST,
            sender,
            recipient,
            known_heights=dict(known_heights),
            wanted=tuple(sorted(wanted)),
        )

    @classmethod
    def response(
        cls, sender: str, recipient: str, blocks: Sequence[EventBlock]
    ) -> "SyncMessage":
        return cls(MessageKind.SYNC_RESPONSE, sender, recipient, blocks=tuple(blocks))

    @classmethod
    def broadcast(
        cls, sender: str, recipient: str, blocks: Sequence[EventBlock]
    ) -> "SyncMessage":
        return cls(MessageKind.BROADCAST, sender, recipient, blocks=tuple(blocks))


__all__ = ["MessageKind", "SyncMessage"]
