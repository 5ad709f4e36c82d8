"""
日志模块

使用 loguru 提供统一的日志记录功能。诊断信息一律写入 stderr，
stdout 留给 CLI 的 key=value 输出。

节点相关的日志通过 node_logger 绑定节点 id，输出在格式的 node 列中；
未绑定时该列为 "-"。
"""

import sys
from typing import Optional

from loguru import logger

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[node]: <4} | {message}"


def setup_logger(
    level: Optional[str] = None,
    sink=sys.stderr,
    enqueue: bool = False,
    colorize: bool = True,
) -> None:
    """
    设置日志记录器

    Args:
        level: 日志级别 (DEBUG, INFO, WARNING, ERROR)，默认 INFO
        sink: 输出目标
        enqueue: 是否启用队列，模拟是单线程的，默认关闭
        colorize: 是否启用颜色
    """
    level = level or "INFO"

    logger.remove()
    logger.configure(extra={"node": "-"})
    logger.add(
        sink=sink,
        format=LOG_FORMAT,
        enqueue=enqueue,
        level=level,
        colorize=colorize,
        backtrace=(level == "DEBUG"),
        diagnose=(level == "DEBUG"),
    )

    if level == "DEBUG":
        logger.debug("DEBUG 模式已启用，每个节点的插入与判定都会输出")


def node_logger(node_id: str):
    """返回绑定了节点 id 的记录器"""
    return logger.bind(node=node_id)


__all__ = ["logger", "setup_logger", "node_logger", "LOG_FORMAT"]
