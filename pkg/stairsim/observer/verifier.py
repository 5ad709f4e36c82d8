"""
区块校验器

对导出的区块逐条重算 id、检查结构、交叉类型规则与角色戳。
只使用导出文件中的信息。
"""

import hashlib
from pathlib import Path
from typing import Dict, List, Optional, Union

from stairsim.dag.block import compute_block_id
from stairsim.ledger.account import Role
from stairsim.ledger.schedule import epoch_of
from stairsim.observer.exports import DagRow


class BlockVerifier:
    """区块校验器"""

    @staticmethod
    def calc_id(row: DagRow) -> str:
        """按导出字段重算区块 id"""
        return compute_block_id(
            row.creator,
            row.self_parent,
            row.other_parents,
            row.payload_digest,
            row.lamport_ts,
            row.seq,
        )

    @staticmethod
    def verify_id(row: DagRow) -> bool:
        return BlockVerifier.calc_id(row) == row.id

    @staticmethod
    def joining_role(account: str, roles: Dict[int, Dict[str, Role]]) -> Role:
        """账户在导出纪元中第一次成为非观察者的角色"""
        for epoch in sorted(roles):
            role = roles[epoch].get(account)
            if role is not None and role.can_create:
                return role
        return Role.OBSERVER

    @staticmethod
    def expected_role(
        row: DagRow,
        parent_frames: List[int],
        roles: Dict[int, Dict[str, Role]],
        interval: int,
    ) -> Optional[Role]:
        if row.is_leaf:
            return BlockVerifier.joining_role(row.creator, roles)
        epoch = epoch_of(max(parent_frames), interval)
        return roles.get(epoch, {}).get(row.creator)

    @staticmethod
    def check(
        row: DagRow,
        index: Dict[str, DagRow],
        frames: Dict[str, int],
        roles: Dict[int, Dict[str, Role]],
        k: int,
        interval: int,
    ) -> List[str]:
        """
        检查单个区块

        Args:
            row: 被检查的区块
            index: 导出中全部区块
            frames: 已重算的帧（父区块必须已在其中）
            roles: 纪元角色表
            k: 引用数
            interval: 检查点间隔

        Returns:
            问题描述列表（空表示通过）
        """
        problems = []
        if not BlockVerifier.verify_id(row):
            problems.append("id 与内容不符")
        if row.fee_total < 0:
            problems.append("手续费为负")
        if not row.role.can_create:
            problems.append("观察者区块")

        if row.self_parent is None:
            if row.other_parents or row.seq != 0 or row.lamport_ts != 0:
                problems.append("叶子区块格式错误")
            elif BlockVerifier.joining_role(row.creator, roles) != row.role:
                problems.append(f"角色戳 {row.role.value} 不符")
            return problems

        missing = [p for p in row.parents if p not in index]
        if missing:
            problems.append(f"父区块缺失: {','.join(missing)}")
            return problems
        if len(row.other_parents) != k - 1:
            problems.append(f"other-parent 数量应为 {k - 1}")

        top = index[row.self_parent]
        if top.creator != row.creator or top.seq != row.seq - 1:
            problems.append("self-parent 链不连续")

        others = [index[p] for p in row.other_parents]
        creators = [o.creator for o in others]
        if row.creator in creators or len(set(creators)) != len(creators):
            problems.append("other-parent 创建者重复")
        opposite = row.role.opposite()
        if opposite is not None and not any(o.role == opposite for o in others):
            problems.append("缺少相反类型的 other-parent")

        expected_lamport = 1 + max(index[p].lamport_ts for p in row.parents)
        if row.lamport_ts != expected_lamport:
            problems.append(f"lamport_ts 应为 {expected_lamport}")

        parent_frames = [frames[p] for p in row.parents if p in frames]
        if len(parent_frames) == len(row.parents):
            expected = BlockVerifier.expected_role(row, parent_frames, roles, interval)
            if expected != row.role:
                problems.append(
                    f"角色戳 {row.role.value} 不符，应为 {expected.value if expected else '-'}"
                )
        return problems

    @staticmethod
    def file_digest(path: Union[str, Path]) -> Optional[str]:
        """文件内容摘要（文件不存在返回 None）"""
        path = Path(path)
        if not path.is_file():
            return None
        digest = hashlib.blake2b(digest_size=16)
        with path.open("rb") as f:
            for chunk in iter(lambda: f.read(4096), b""):
                digest.update(chunk)
        return digest.hexdigest()


__all__ = ["BlockVerifier"]
