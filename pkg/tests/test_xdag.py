import dataclasses
from collections import Counter

import numpy as np
import pytest

from stairsim.dag import EventBlock, Transaction, XDag
from stairsim.exceptions import (
    CrossTypeViolation,
    DuplicateCreator,
    ForkDetected,
    InvalidStructure,
    MissingParents,
    UnknownBlock,
    UnknownFrame,
)
from stairsim.ledger import Role

WEIGHTS = {"u1": 1, "u2": 1, "u3": 1, "v1": 1000, "v2": 2000}


def _role(creator: str) -> Role:
    return Role.USER if creator.startswith("u") else Role.VALIDATOR


@pytest.fixture
def dag():
    """five_node 人口的叶子区块，全部登记为帧 0 的根"""
    dag = XDag(k=2)
    for creator, weight in WEIGHTS.items():
        leaf = dag.create_event(creator, None, [], [], _role(creator))
        dag.insert_block(leaf)
        dag.register_root(0, leaf.id, weight)
    return dag


def _extend(dag, creator, other_creator, payload=b"", insert=True):
    block = dag.create_event(
        creator,
        dag.tops[creator],
        [dag.tops[other_creator]],
        [Transaction(payload=payload, fee=1)],
        _role(creator),
    )
    if insert:
        dag.insert_block(block)
    return block


# ---------------------------------------------------------------------------
# 创建
# ---------------------------------------------------------------------------


def test_leaf_block_shape(dag):
    leaf = dag.blocks[dag.tops["v2"]]
    assert leaf.is_leaf
    assert leaf.seq == 0
    assert leaf.lamport_ts == 0
    assert leaf.verify_id()


def test_user_referencing_validator_is_valid(dag):
    block = _extend(dag, "u1", "v2")
    assert block.self_parent is not None
    assert block.other_parents == (dag.tops["v2"],)
    assert block.lamport_ts == 1
    assert dag.tops["u1"] == block.id


def test_validator_referencing_validator_rejected(dag):
    with pytest.raises(CrossTypeViolation):
        _extend(dag, "v1", "v2", insert=False)


def test_duplicate_creator_rejected():
    dag = XDag(k=3)
    for creator in ("u1", "v1", "v2"):
        dag.insert_block(dag.create_event(creator, None, [], [], _role(creator)))
    with pytest.raises(DuplicateCreator):
        dag.create_event(
            "u1", dag.tops["u1"], [dag.tops["v1"], dag.tops["v1"]], [], Role.USER
        )


def test_second_leaf_rejected(dag):
    with pytest.raises(InvalidStructure):
        dag.create_event("u1", None, [], [], Role.USER)


def test_observer_cannot_create(dag):
    with pytest.raises(InvalidStructure):
        dag.create_event("o1", None, [], [], Role.OBSERVER)


def test_lamport_is_one_plus_max_parent(dag):
    _extend(dag, "u1", "v2")
    _extend(dag, "u1", "v1")
    block = _extend(dag, "v2", "u1")
    assert block.lamport_ts == 3


# ---------------------------------------------------------------------------
# 插入
# ---------------------------------------------------------------------------


def test_insert_missing_parents(dag):
    other = XDag(k=2)
    for creator in ("u1", "v1"):
        other.insert_block(dag.blocks[dag.tops[creator]])
    block = _extend(other, "u1", "v1")
    child = _extend(other, "v1", "u1")

    with pytest.raises(MissingParents) as exc:
        dag.insert_block(child)
    assert exc.value.missing == [block.id]
    assert child.id not in dag


def test_reinsert_is_idempotent(dag):
    block = _extend(dag, "u1", "v2")
    assert dag.insert_block(block) is False
    assert len(dag) == 6


def test_tampered_block_rejected(dag):
    block = _extend(dag, "u1", "v2", insert=False)
    tampered = dataclasses.replace(block, lamport_ts=7)
    with pytest.raises(InvalidStructure):
        dag.insert_block(tampered)


def test_fork_detected_and_both_kept(dag):
    a = _extend(dag, "v1", "u1", payload=b"a", insert=False)
    b = _extend(dag, "v1", "u2", payload=b"b", insert=False)
    dag.insert_block(a)
    with pytest.raises(ForkDetected) as exc:
        dag.insert_block(b)
    assert exc.value.creator == "v1"
    assert set(exc.value.block_ids) == {a.id, b.id}
    assert a.id in dag and b.id in dag
    assert dag.is_cheater("v1")
    assert dag.fork_slots() == [("v1", 1, tuple(sorted([a.id, b.id])))]


def test_insertion_order_independence(dag):
    blocks = [
        _extend(dag, "u1", "v2"),
        _extend(dag, "v1", "u1"),
        _extend(dag, "u2", "v1"),
        _extend(dag, "v2", "u2"),
        _extend(dag, "u3", "v2"),
    ]
    leaves = [b for b in dag if b.is_leaf]
    rng = np.random.default_rng(3)
    for _ in range(20):
        other = XDag(k=2)
        for leaf in leaves:
            other.insert_block(leaf)
        pending = [blocks[int(i)] for i in rng.permutation(len(blocks))]
        while pending:
            block = pending.pop(0)
            try:
                other.insert_block(block)
            except MissingParents:
                pending.append(block)
        assert set(other.blocks) == set(dag.blocks)
        for leaf in leaves:
            other.register_root(0, leaf.id, WEIGHTS[leaf.creator])
        for block in blocks:
            assert other.reach_weight(block.id, 0) == dag.reach_weight(block.id, 0)


# ---------------------------------------------------------------------------
# 可达性与分数
# ---------------------------------------------------------------------------


def test_leaf_root_reaches_itself(dag):
    leaf = dag.tops["v2"]
    assert dag.reachable_roots(leaf, 0) == {leaf}
    assert dag.validation_score(leaf, 0).score == 2000


def test_score_sums_reachable_roots(dag):
    block = _extend(dag, "u1", "v2")
    assert dag.validation_score(block.id, 0).score == 2001

    _extend(dag, "v1", "u1")
    reach = _extend(dag, "u2", "v1")
    # u2 叶子、v1、u1（经 v1 的 other-parent）、v2（经 u1）
    assert dag.validation_score(reach.id, 0).score == 1 + 1000 + 1 + 2000


def test_block_reaching_users_and_validator(dag):
    _extend(dag, "v1", "u1")
    block = _extend(dag, "u2", "v1")
    assert dag.reachable_roots(block.id, 0) == {
        dag.blocks[dag.tops["u2"]].self_parent,
        dag.blocks[dag.tops["v1"]].self_parent,
        dag.blocks[dag.blocks[dag.tops["v1"]].other_parents[0]].id,
    }
    assert dag.validation_score(block.id, 0).score == 1002


def test_unknown_frame_and_block(dag):
    with pytest.raises(UnknownFrame):
        dag.reachable_roots(dag.tops["u1"], 5)
    with pytest.raises(UnknownBlock):
        dag.validation_score("ff" * 16, 0)


def test_forked_creator_excluded_from_score(dag):
    a = _extend(dag, "v1", "u1", payload=b"a", insert=False)
    b = _extend(dag, "v1", "u2", payload=b"b", insert=False)
    dag.insert_block(a)
    with pytest.raises(ForkDetected):
        dag.insert_block(b)

    c1 = dag.create_event("u3", dag.tops["u3"], [a.id], [], Role.USER)
    dag.insert_block(c1)
    c2 = dag.create_event("u3", c1.id, [b.id], [], Role.USER)
    dag.insert_block(c2)

    # c1 只见到分叉的一支
    assert dag.forks_seen(c1.id) == frozenset()
    assert dag.validation_score(c1.id, 0).score == 1 + 1000 + 1
    # c2 的祖先同时包含两支，v1 的根不再计入
    assert dag.forks_seen(c2.id) == frozenset({"v1"})
    assert dag.validation_score(c2.id, 0).score == 3


def test_child_score_not_below_parent(dag):
    parent = _extend(dag, "u1", "v2")
    child = _extend(dag, "v1", "u1")
    assert dag.reach_weight(child.id, 0) >= dag.reach_weight(parent.id, 0)


# ---------------------------------------------------------------------------
# 确定性全序
# ---------------------------------------------------------------------------


def test_topological_order(dag):
    parent = _extend(dag, "u1", "v2")
    child = _extend(dag, "v1", "u1")
    order = dag.topological_order([child.id, parent.id])
    assert order == [parent.id, child.id]
    assert dag.topological_order([]) == []

    leaves = [b.id for b in dag if b.is_leaf]
    rng = np.random.default_rng(5)
    expected = dag.topological_order(leaves)
    assert expected == sorted(leaves)
    for _ in range(100):
        shuffled = [leaves[int(i)] for i in rng.permutation(len(leaves))]
        assert dag.topological_order(shuffled) == expected


def test_topological_order_unknown_block(dag):
    with pytest.raises(UnknownBlock):
        dag.topological_order(["00" * 16])


def test_blocks_above_heights(dag):
    _extend(dag, "u1", "v2")
    _extend(dag, "u1", "v1")
    _extend(dag, "v2", "u1")
    known = {c: 0 for c in WEIGHTS}
    above = dag.blocks_above(known)
    assert [(b.creator, b.seq) for b in above] == [("u1", 1), ("u1", 2), ("v2", 1)]
    assert dag.blocks_above(dag.heights()) == []


def test_event_block_id_covers_payload():
    a = EventBlock.build("u1", 0, None, (), [Transaction(b"x", 1)], 0, Role.USER)
    b = EventBlock.build("u1", 0, None, (), [Transaction(b"y", 1)], 0, Role.USER)
    assert a.id != b.id
    assert a.payload_digest != b.payload_digest


# ---------------------------------------------------------------------------
# 随机 DAG 与穷举搜索
# ---------------------------------------------------------------------------


def _random_dag(rng, total: int) -> XDag:
    """随机人口与引用关系，约 5% 的区块带一个分叉双块"""
    users = [f"u{i}" for i in range(1, int(rng.integers(2, 6)) + 1)]
    validators = [f"v{i}" for i in range(1, int(rng.integers(1, 5)) + 1)]
    creators = users + validators
    dag = XDag(k=int(rng.integers(2, 4)))
    for creator in creators:
        leaf = dag.create_event(creator, None, [], [], _role(creator))
        dag.insert_block(leaf)
        dag.register_root(0, leaf.id, int(rng.integers(1, 3000)))

    while len(dag.blocks) < total:
        creator = creators[int(rng.integers(len(creators)))]
        opposite = validators if creator in users else users
        first = opposite[int(rng.integers(len(opposite)))]
        rest = [c for c in creators if c not in (creator, first)]
        picked = [first] + [rest[int(i)] for i in rng.choice(len(rest), dag.k - 2, replace=False)]
        tops = [dag.tops[c] for c in picked]
        block = dag.create_event(
            creator, dag.tops[creator], tops, [Transaction(rng.bytes(4), 1)], _role(creator)
        )
        twin = None
        if rng.random() < 0.05:
            twin = dag.create_event(
                creator,
                dag.tops[creator],
                tops,
                [Transaction(b"twin" + rng.bytes(4), 0)],
                _role(creator),
            )
        dag.insert_block(block)
        if twin is not None:
            with pytest.raises(ForkDetected):
                dag.insert_block(twin)
    return dag


def _reach_by_search(dag: XDag, block_id: str, frame: int) -> set:
    seen, stack = set(), [block_id]
    while stack:
        current = stack.pop()
        if current not in seen:
            seen.add(current)
            stack.extend(dag.blocks[current].parents)
    slots = Counter((dag.blocks[b].creator, dag.blocks[b].seq) for b in seen)
    forked = {creator for (creator, _), n in slots.items() if n >= 2}
    return {
        r for r in dag.root_index[frame] if r in seen and dag.blocks[r].creator not in forked
    }


@pytest.mark.slow
def test_score_matches_exhaustive_search_on_random_dags():
    rng = np.random.default_rng(11)
    for _ in range(50):
        dag = _random_dag(rng, int(rng.integers(20, 200)))
        for block in dag:
            if not block.is_leaf and rng.random() < 0.1:
                dag.register_root(1, block.id, int(rng.integers(1, 3000)))

        for frame, roots in sorted(dag.root_index.items()):
            for block in dag:
                expected = _reach_by_search(dag, block.id, frame)
                assert dag.reachable_roots(block.id, frame) == expected
                assert dag.validation_score(block.id, frame).score == sum(
                    roots[r] for r in expected
                )
