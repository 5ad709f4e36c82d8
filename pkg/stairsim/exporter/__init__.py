"""
导出包

生成并写出一次运行的全部导出文件。
"""

from stairsim.exporter.writers import (
    build_bundle,
    finality_lines,
    write_bundle,
    write_finality_log,
)

__all__ = ["build_bundle", "finality_lines", "write_bundle", "write_finality_log"]
