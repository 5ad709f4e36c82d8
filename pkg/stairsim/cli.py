"""
CLI 模块

命令行接口实现。stdout 只输出 key=value 行，诊断信息写入 stderr。

退出码: 0 成功；2 配置/用法错误或导出格式错误；3 违反不变量；4 审计有发现。
"""

import re
import sys
from typing import Dict, List, Optional, Tuple

import click
from loguru import logger

from stairsim import __version__
from stairsim.exceptions import ConfigError, MalformedExport, StairSimError
from stairsim.gossip.report import RunReport, format_value
from stairsim.logger import setup_logger
from stairsim.config import ScenarioConfig
from stairsim.orchestrator import ScenarioOrchestrator

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_AUDIT = 4

_SEED_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def parse_overrides(values: Tuple[str, ...]) -> Dict[str, str]:
    """解析 --set key=value"""
    overrides = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise click.BadParameter(f"覆盖项必须是 key=value 形式: {item}", param_hint="--set")
        overrides[key.strip()] = value.strip()
    return overrides


def parse_seeds(text: str) -> List[int]:
    """解析 A..B（闭区间）或逗号分隔的种子列表"""
    match = _SEED_RANGE.match(text)
    if match:
        start, end = int(match.group(1)), int(match.group(2))
        seeds = list(range(start, end + 1))
    else:
        try:
            seeds = [int(s) for s in text.split(",") if s.strip()]
        except ValueError:
            raise click.BadParameter(f"无法解析种子: {text}", param_hint="--seeds")
    if not seeds:
        raise click.BadParameter(f"种子列表为空: {text}", param_hint="--seeds")
    return seeds


def load_config(
    config_path: str, overrides: Tuple[str, ...], seed: Optional[int] = None
) -> ScenarioConfig:
    """加载并校验场景配置（失败时以退出码 2 结束）"""
    try:
        config = ScenarioConfig.load(config_path)
        parsed = parse_overrides(overrides)
        if seed is not None:
            parsed["seed"] = str(seed)
        if parsed:
            config = config.with_overrides(parsed)
        config.validate()
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        sys.exit(EXIT_CONFIG)
    return config


def emit(pairs: Dict[str, object], fmt: str) -> None:
    """按 --format 输出到 stdout"""
    for key, value in pairs.items():
        if fmt == "kv":
            click.echo(f"{key}={value}")
        else:
            click.echo(f"{key:<24} {value}")


def emit_report(report: RunReport, fmt: str) -> None:
    if fmt == "kv":
        click.echo(report.to_kv(), nl=False)
        return
    lines = report.to_kv().splitlines()
    emit(dict(line.split("=", 1) for line in lines), fmt)


def config_option(f):
    return click.option(
        "--config",
        "config_path",
        required=True,
        type=click.Path(dir_okay=False),
        help="场景配置文件 (toml/yaml/json)",
    )(f)


def overrides_option(f):
    return click.option(
        "--set", "overrides", multiple=True, metavar="KEY=VALUE", help="覆盖配置项（可多次使用）"
    )(f)


def format_option(f):
    return click.option(
        "--format",
        "fmt",
        type=click.Choice(["text", "kv"]),
        default="kv",
        show_default=True,
        help="输出格式",
    )(f)


@click.group()
@click.option("--debug", is_flag=True, help="启用调试模式")
@click.version_option(version=__version__)
def main(debug: bool):
    """stairsim - PoS x-DAG 共识模拟器"""
    if debug:
        setup_logger(level="DEBUG")
        logger.debug("调试模式已启用")


@main.command()
@config_option
@click.option("--seed", type=int, default=None, help="随机种子（覆盖配置）")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="产物目录")
@overrides_option
@format_option
def run(config_path: str, seed: Optional[int], out_dir: Optional[str], overrides, fmt: str):
    """运行一次场景"""
    config = load_config(config_path, overrides, seed)
    orchestrator = ScenarioOrchestrator(config, out_dir)
    try:
        report = orchestrator.run()
    except StairSimError as e:
        logger.error(f"运行失败: {e}")
        sys.exit(EXIT_CONFIG)
    emit_report(report, fmt)
    sys.exit(EXIT_OK if report.passed else EXIT_INVARIANT)


@main.command()
@config_option
@click.option("--seeds", "seeds_text", required=True, help="种子范围 A..B 或列表 1,2,3")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="产物目录")
@overrides_option
@format_option
def sweep(config_path: str, seeds_text: str, out_dir: Optional[str], overrides, fmt: str):
    """按种子范围批量运行"""
    seeds = parse_seeds(seeds_text)
    config = load_config(config_path, overrides)
    orchestrator = ScenarioOrchestrator(config, out_dir)
    try:
        reports = orchestrator.sweep(seeds)
    except StairSimError as e:
        logger.error(f"运行失败: {e}")
        sys.exit(EXIT_CONFIG)

    if fmt == "kv":
        for report in reports:
            row = report.summary()
            click.echo(" ".join(f"{k}={format_value(v)}" for k, v in row.items()))
    else:
        click.echo(orchestrator.summary_text(reports), nl=False)
    passed = sum(r.passed for r in reports)
    click.echo(f"passed={passed}/{len(reports)}")
    sys.exit(EXIT_OK if passed == len(reports) else EXIT_INVARIANT)


@main.command()
@click.argument("export_dir", type=click.Path(file_okay=False))
@click.option("--reporter", default="", help="审计者 id")
@format_option
def audit(export_dir: str, reporter: str, fmt: str):
    """审计导出目录"""
    try:
        report = ScenarioOrchestrator.audit(export_dir, reporter=reporter)
    except MalformedExport as e:
        logger.error(f"导出格式错误: {e}")
        sys.exit(EXIT_CONFIG)

    emit(
        {
            "verdict": report.verdict,
            "blocks_scanned": report.blocks_scanned,
            "findings": len(report.findings),
            **{f"findings.{k}": v for k, v in report.counts().items() if v},
        },
        fmt,
    )
    for finding in report.findings:
        click.echo(f"finding={finding.to_line()}")
    sys.exit(EXIT_OK if report.is_clean else EXIT_AUDIT)


@main.command("rewards-report")
@click.argument("export_dir", type=click.Path(file_okay=False))
@format_option
def rewards_report(export_dir: str, fmt: str):
    """汇总导出目录中的奖励"""
    try:
        text = ScenarioOrchestrator.rewards_report(export_dir)
    except MalformedExport as e:
        logger.error(f"导出格式错误: {e}")
        sys.exit(EXIT_CONFIG)
    emit(dict(line.split("=", 1) for line in text.splitlines()), fmt)


@main.command("validate-config")
@config_option
@overrides_option
def validate_config(config_path: str, overrides):
    """只校验配置"""
    config = load_config(config_path, overrides)
    logger.success(f"配置有效: {config.name}")
    emit(
        {
            "name": config.name,
            "nodes": len(config.nodes),
            "faults": len(config.faults),
            "k": config.params.k,
            "seed": config.seed,
        },
        "kv",
    )


@main.command()
@config_option
@click.option("--seed", type=int, default=None, help="随机种子（覆盖配置）")
@click.option(
    "--dir", "golden_dir", type=click.Path(file_okay=False), default="golden", show_default=True
)
@click.option("--update", is_flag=True, help="重写 golden 文件")
@overrides_option
def golden(config_path: str, seed: Optional[int], golden_dir: str, update: bool, overrides):
    """与 golden 最终顺序比对"""
    config = load_config(config_path, overrides, seed)
    result = ScenarioOrchestrator(config).golden(golden_dir, update=update)
    emit(
        {
            "golden": result.path,
            "matched": str(result.matched).lower(),
            "updated": str(result.updated).lower(),
        },
        "kv",
    )
    if not result.matched:
        click.echo(f"first_difference={result.first_difference}")
        sys.exit(EXIT_INVARIANT)


if __name__ == "__main__":
    main()
