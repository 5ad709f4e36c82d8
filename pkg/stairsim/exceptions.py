"""
stairsim 统一异常体系

提供分层的异常结构，支持错误代码、上下文信息和字典序列化。
"""

from typing import Any, Dict, Optional


class StairSimError(Exception):
    """stairsim 基础异常类"""

    def __init__(
        self,
        message: str,
        code: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.code = code or self._get_default_code()
        self.context = context or {}

    def _get_default_code(self) -> str:
        """获取默认错误代码"""
        return "E000"

    def to_dict(self) -> Dict[str, Any]:
        """将异常转换为字典格式"""
        return {
            "error": True,
            "code": self.code,
            "message": self.message,
            "context": self.context,
            "type": self.__class__.__name__,
        }

    def __str__(self) -> str:
        if self.code:
            return f"[{self.code}] {self.message}"
        return self.message


# ---------------------------------------------------------------------------
# 配置
# ---------------------------------------------------------------------------


class ConfigError(StairSimError):
    """配置相关错误"""

    def _get_default_code(self) -> str:
        return "E100"


class ConfigParseError(ConfigError):
    """配置解析错误"""

    def _get_default_code(self) -> str:
        return "E101"


class ConfigValidationError(ConfigError):
    """配置验证错误（场景不合法）"""

    def _get_default_code(self) -> str:
        return "E102"


# ---------------------------------------------------------------------------
# 账本
# ---------------------------------------------------------------------------


class LedgerError(StairSimError):
    """账本相关错误"""

    def _get_default_code(self) -> str:
        return "E200"


class UnknownAccount(LedgerError):
    """账户不存在"""

    def _get_default_code(self) -> str:
        return "E201"


class InsufficientBalance(LedgerError):
    """质押/委托总额超过持有量"""

    def _get_default_code(self) -> str:
        return "E202"


class BelowMinimum(LedgerError):
    """数量低于最小单位"""

    def _get_default_code(self) -> str:
        return "E203"


class DelegationCapExceeded(LedgerError):
    """委托总额超过目标持有量的上限倍数"""

    def _get_default_code(self) -> str:
        return "E204"


class LockTooShort(LedgerError):
    """锁定期过短"""

    def _get_default_code(self) -> str:
        return "E205"


class StillLocked(LedgerError):
    """仍处于锁定期"""

    def _get_default_code(self) -> str:
        return "E206"


class NoSuchDelegation(LedgerError):
    """委托不存在或数量不足"""

    def _get_default_code(self) -> str:
        return "E207"


class NothingToWithdraw(LedgerError):
    """没有退出中的质押可以提取"""

    def _get_default_code(self) -> str:
        return "E208"


# ---------------------------------------------------------------------------
# x-DAG
# ---------------------------------------------------------------------------


class DagError(StairSimError):
    """x-DAG 相关错误"""

    def _get_default_code(self) -> str:
        return "E300"


class CrossTypeViolation(DagError):
    """缺少相反类型的 other-parent"""

    def _get_default_code(self) -> str:
        return "E301"


class DuplicateCreator(DagError):
    """other-parent 中存在重复创建者"""

    def _get_default_code(self) -> str:
        return "E302"


class UnknownParent(DagError):
    """创建区块时引用了本地未知的父区块"""

    def _get_default_code(self) -> str:
        return "E303"


class MissingParents(DagError):
    """插入区块时父区块尚未到达"""

    def __init__(
        self,
        message: str,
        missing: Optional[list] = None,
        code: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, code, context)
        self.missing = list(missing or [])
        self.context["missing"] = self.missing

    def _get_default_code(self) -> str:
        return "E304"


class InvalidStructure(DagError):
    """区块结构不合法"""

    def _get_default_code(self) -> str:
        return "E305"


class ForkDetected(DagError):
    """同一创建者同一 seq 出现两个不同区块（两个区块均已保存）"""

    def __init__(
        self,
        message: str,
        creator: str = "",
        block_ids: tuple = (),
        code: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, code, context)
        self.creator = creator
        self.block_ids = tuple(block_ids)
        self.context.update({"creator": creator, "block_ids": list(block_ids)})

    def _get_default_code(self) -> str:
        return "E306"


class UnknownBlock(DagError):
    """区块不存在"""

    def _get_default_code(self) -> str:
        return "E307"


class UnknownFrame(DagError):
    """帧尚无根索引"""

    def _get_default_code(self) -> str:
        return "E308"


# ---------------------------------------------------------------------------
# 共识
# ---------------------------------------------------------------------------


class ConsensusError(StairSimError):
    """共识相关错误"""

    def _get_default_code(self) -> str:
        return "E400"


class EarlierFramesUndecided(ConsensusError):
    """更早的帧尚未决定"""

    def _get_default_code(self) -> str:
        return "E401"


# ---------------------------------------------------------------------------
# 奖励
# ---------------------------------------------------------------------------


class RewardError(StairSimError):
    """奖励相关错误"""

    def _get_default_code(self) -> str:
        return "E500"


class NotFlagged(RewardError):
    """账户未被标记为双重投票者"""

    def _get_default_code(self) -> str:
        return "E501"


# ---------------------------------------------------------------------------
# Gossip
# ---------------------------------------------------------------------------


class GossipError(StairSimError):
    """Gossip 网络相关错误"""

    def _get_default_code(self) -> str:
        return "E600"


class NoOppositeTypePeer(GossipError):
    """没有可选的相反类型节点"""

    def _get_default_code(self) -> str:
        return "E601"


# ---------------------------------------------------------------------------
# 观察者
# ---------------------------------------------------------------------------


class ObserverError(StairSimError):
    """观察者相关错误"""

    def _get_default_code(self) -> str:
        return "E700"


class MalformedExport(ObserverError):
    """导出文件缺失或格式错误"""

    def _get_default_code(self) -> str:
        return "E701"


class DuplicateReport(ObserverError):
    """同一证据已被提交过"""

    def _get_default_code(self) -> str:
        return "E702"


class InvariantViolation(StairSimError):
    """运行中检测到不变量被破坏"""

    def _get_default_code(self) -> str:
        return "E800"


__all__ = [
    "StairSimError",
    "ConfigError",
    "ConfigParseError",
    "ConfigValidationError",
    "LedgerError",
    "UnknownAccount",
    "InsufficientBalance",
    "BelowMinimum",
    "DelegationCapExceeded",
    "LockTooShort",
    "StillLocked",
    "NoSuchDelegation",
    "NothingToWithdraw",
    "DagError",
    "CrossTypeViolation",
    "DuplicateCreator",
    "UnknownParent",
    "MissingParents",
    "InvalidStructure",
    "ForkDetected",
    "UnknownBlock",
    "UnknownFrame",
    "ConsensusError",
    "EarlierFramesUndecided",
    "RewardError",
    "NotFlagged",
    "GossipError",
    "NoOppositeTypePeer",
    "ObserverError",
    "MalformedExport",
    "DuplicateReport",
    "InvariantViolation",
]
