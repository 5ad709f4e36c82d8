"""
k-PeerSelection

先按质押比例从相反类型中选一个节点，再从其余节点中按质押比例
不放回地选 k-2 个。
"""

from typing import Dict, List

import numpy as np

from stairsim.exceptions import GossipError, NoOppositeTypePeer
from stairsim.ledger.account import Role
from stairsim.models.config import SelectionMode


def _weighted_pick(
    rng: np.random.Generator, candidates: Dict[str, float], size: int
) -> List[str]:
    ids = sorted(candidates)
    weights = np.array([candidates[i] for i in ids], dtype=float)
    total = weights.sum()
    if total <= 0:
        probabilities = None
    else:
        probabilities = weights / total
    picks = rng.choice(len(ids), size=size, replace=False, p=probabilities)
    return [ids[int(i)] for i in picks]


def k_peer_selection(
    node_id: str,
    role: Role,
    users: Dict[str, int],
    validators: Dict[str, int],
    rng: np.random.Generator,
    k: int,
    mode: SelectionMode = SelectionMode.STAKE,
) -> List[str]:
    """
    选择 k-1 个引用节点

    Args:
        node_id: 当前节点
        role: 当前节点角色
        users / validators: 候选节点 id -> 有效质押
        rng: 节点随机数发生器
        k: 引用数
        mode: stake 按质押比例；inverse 时 Validator 按质押反比选择 User

    Raises:
        NoOppositeTypePeer: 没有可选的相反类型节点
    """
    if k < 2:
        raise GossipError(f"k 必须 >= 2: {k}")
    if role == Role.USER:
        opposite = validators
    elif role == Role.VALIDATOR:
        opposite = users
    else:
        raise GossipError(f"观察者 {node_id} 不参与选择")

    candidates = {p: float(s) for p, s in opposite.items() if p != node_id}
    if not candidates:
        raise NoOppositeTypePeer(
            f"{node_id} 没有可选的相反类型节点", context={"node": node_id, "role": role.value}
        )
    if mode == SelectionMode.INVERSE and role == Role.VALIDATOR:
        candidates = {p: 1.0 / s if s > 0 else 0.0 for p, s in candidates.items()}

    first = _weighted_pick(rng, candidates, 1)[0]
    if k == 2:
        return [first]

    rest = {
        p: float(s)
        for p, s in {**users, **validators}.items()
        if p not in (node_id, first)
    }
    if len(rest) < k - 2:
        raise GossipError(
            f"{node_id} 可选节点不足: 需要 {k - 2}，只有 {len(rest)}",
            context={"node": node_id, "k": k},
        )
    return [first, *_weighted_pick(rng, rest, k - 2)]


__all__ = ["k_peer_selection"]
