"""
按日结算

沿参考节点的定序结果推进模拟日：每个帧定序后为新 Atropos 计 Saga 分并
累计手续费，跨日时关闭前一天的结算单。未分配的奖励池结转到下一天。
"""

from typing import Dict, Iterable, List, Optional, Set, Tuple

from loguru import logger

from stairsim.consensus.records import FrameOutcome
from stairsim.dag.xdag import XDag
from stairsim.ledger.ledger import StakeLedger
from stairsim.ledger.schedule import EpochSchedule
from stairsim.models.config import ScenarioConfig
from stairsim.rewards.distribution import (
    burn_deposit,
    distribute_validation_rewards,
    route_transaction_fees,
)
from stairsim.rewards.money import ZERO, daily_block_reward
from stairsim.rewards.saga import SagaLedger, award_saga_points
from stairsim.rewards.statement import RewardStatement


class RewardTracker:
    """奖励结算器"""

    def __init__(
        self,
        config: ScenarioConfig,
        dag: XDag,
        schedule: EpochSchedule,
        ledger: StakeLedger,
    ):
        self.config = config
        self.params = config.params
        self.dag = dag
        self.schedule = schedule
        self.ledger = ledger
        self.saga = SagaLedger()
        self.statements: List[RewardStatement] = []
        self.flagged: Set[str] = set()

        self._day = 0
        self._day_frame = 0
        self._fees: List[Tuple[str, int]] = []
        self._carry = ZERO
        self._finished = False

    # ------------------------------------------------------------------
    # 推进
    # ------------------------------------------------------------------

    def on_frame(self, outcome: FrameOutcome) -> None:
        """处理一个已定序帧"""
        day = self.schedule.day_of(outcome.frame)
        while self._day < day:
            self._close_day()
        self._day_frame = outcome.frame

        award_saga_points(self.saga, outcome.atroposes, self.dag)
        for record in outcome.records:
            block = self.dag.blocks[record.block_id]
            if block.fee_total > 0:
                self._fees.append((block.creator, block.fee_total))

    def run(self, outcomes: Iterable[FrameOutcome]) -> List[RewardStatement]:
        for outcome in outcomes:
            self.on_frame(outcome)
        return self.finish()

    def finish(self) -> List[RewardStatement]:
        """关闭最后一天"""
        if not self._finished:
            self._close_day()
            self._finished = True
        return self.statements

    def _close_day(self) -> RewardStatement:
        day = self._day
        epoch = self.schedule.epoch_of(self._day_frame)
        powers = self.schedule.powers(epoch)

        pool = daily_block_reward(day, self.params) + self._carry
        statement = RewardStatement(day=day)
        statement.absorb(
            distribute_validation_rewards(pool, self.saga, powers, self.ledger, self.params)
        )
        validating = [a for a, p in powers.items() if p > 0]
        statement.absorb(
            route_transaction_fees(
                self._fees, self.ledger, self.params, self.config.fee_mode, validating
            )
        )
        statement.day = day
        self._carry = statement.remainder
        self._fees = []
        self.statements.append(statement)
        self._day += 1
        logger.debug(
            f"第 {day} 天结算: 奖励池 {statement.pool}，手续费 {statement.fees_collected}，"
            f"SPV {statement.spv_credit}，结转 {statement.remainder}"
        )
        return statement

    # ------------------------------------------------------------------
    # 销毁
    # ------------------------------------------------------------------

    def flag(self, creators: Iterable[str]) -> None:
        """标记双重投票者"""
        self.flagged.update(creators)

    def burn(self, account: str, reporter: Optional[str] = None) -> RewardStatement:
        """销毁押金并记入最后一张结算单"""
        fragment = burn_deposit(
            self.ledger,
            account,
            self.flagged,
            reporter=reporter,
            reporter_fraction=self.config.reporter_fraction,
            mode=self.config.observer_reward,
            saga=self.saga,
            points=self.config.points_per_finding,
            day=self.last_day,
        )
        self._target_statement().absorb(fragment)
        return fragment

    def burn_unreported(self) -> List[str]:
        """销毁无人举报的标记账户"""
        burned = sorted(self.flagged)
        for account in burned:
            self.burn(account)
        return burned

    @property
    def last_day(self) -> int:
        return self.statements[-1].day if self.statements else self._day

    def _target_statement(self) -> RewardStatement:
        if not self.statements:
            self.statements.append(RewardStatement(day=self._day))
        return self.statements[-1]

    # ------------------------------------------------------------------
    # 汇总
    # ------------------------------------------------------------------

    def totals(self) -> Dict[str, object]:
        return {
            "days": len(self.statements),
            "pool": sum((s.pool for s in self.statements), ZERO),
            "fees": sum((s.fees_collected for s in self.statements), ZERO),
            "spv": sum((s.spv_credit for s in self.statements), ZERO),
            "burned": sum((s.burned_total for s in self.statements), ZERO),
            "conserved": all(s.is_conserved() for s in self.statements),
        }


__all__ = ["RewardTracker"]
