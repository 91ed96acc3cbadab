//! Scenario description consumed by the corpus generator: which stocks
//! trade on which dates, and what each stock-day does (random walk inside
//! the limits, or planted hit segments with optional approach and trade
//! scripts).
//!
//! The JSON encoding of [`ScenarioSpec`] is the generator's external
//! interface.

use serde::{Deserialize, Serialize};

use crate::aggregation::Regime;
use crate::limit_engine::HitDirection;
use crate::market_data::{Cents, Date, Shares};
use crate::prehit::TradeSide;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    /// Book depth of the emitted format, 3 or 5.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Quote-record cadence on planted-hit days, seconds.
    #[serde(default = "default_tick_seconds")]
    pub tick_seconds: u32,
    /// Quote-record cadence on no-hit days; defaults to `tick_seconds`.
    /// Sparse no-hit days keep large corpora small without touching any
    /// planted feature.
    #[serde(default)]
    pub no_hit_tick_seconds: Option<u32>,
    pub stocks: Vec<StockSpec>,
    pub dates: Vec<DateSpec>,
    /// Stock-days not listed here default to `no_hit`.
    #[serde(default)]
    pub plans: Vec<DayPlanSpec>,
}

pub fn default_levels() -> usize {
    5
}

pub fn default_tick_seconds() -> u32 {
    5
}

impl ScenarioSpec {
    pub fn no_hit_cadence(&self) -> u32 {
        self.no_hit_tick_seconds.unwrap_or(self.tick_seconds)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StockSpec {
    /// 6-digit symbol.
    pub stock_id: String,
    pub shares_outstanding: Shares,
    /// Close of the (virtual) day before the first sample date, cents.
    pub initial_prev_close: Cents,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DateSpec {
    pub date: Date,
    /// Market-state label the manifest uses for bull/bear splits; must
    /// agree with the analysis calendar for oracle comparisons.
    pub regime: Regime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayPlanSpec {
    pub stock_id: String,
    pub date: Date,
    /// Flagged sessions are generated and parsed but excluded from every
    /// statistic downstream.
    #[serde(default)]
    pub is_ipo_day: bool,
    #[serde(default)]
    pub is_ex_dividend_day: bool,
    pub plan: PlanKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanKind {
    /// Random walk strictly inside the limits.
    NoHit,
    Hit(HitPlan),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitPlan {
    /// One or two directions; segments across all directions must be
    /// disjoint in time.
    pub hits: Vec<DirectionPlan>,
    pub next_day_open_relation: OpenRelation,
    /// Scripted threshold-crossing times for the velocity profile; only
    /// allowed on single-direction plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<ApproachScript>,
    /// Scripted trade window ending at the hit trade, for the event study;
    /// only allowed on single-direction plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trade_script: Option<TradeScript>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionPlan {
    pub direction: HitDirection,
    pub segments: Vec<PlannedSegment>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlannedSegment {
    /// Seconds since midnight of the opening at-limit trade.
    pub start: u32,
    /// Seconds; `start + duration == 15:00:00` means the segment holds
    /// through the close, otherwise an interior trade prints exactly at
    /// `start + duration`.
    pub duration: u32,
}

impl PlannedSegment {
    pub fn end(&self) -> u32 {
        self.start + self.duration
    }
}

/// How the next trading day opens relative to this day's close.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenRelation {
    Higher,
    Lower,
    Equal,
    /// No next-day session at all: the following date is skipped for this
    /// stock and the sidecar's next-day open stays empty.
    Halt,
}

/// Subinterval traversal times for the approach band, outermost first.
/// The generator places the threshold-crossing trades so the measured
/// durations equal these exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproachScript {
    pub subinterval_seconds: Vec<u32>,
}

/// Exact trade window ending at the hit: entry 0 is the pre-window
/// reference trade, the last entry is the hit trade at the limit price.
/// Trades print one cadence step apart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeScript {
    pub trades: Vec<ScriptedTrade>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScriptedTrade {
    pub price: Cents,
    pub volume: Shares,
    /// Aggressor side relative to the hit direction; the quotes below must
    /// realize it under the quote-rule/tick-test classification.
    pub side: TradeSide,
    /// Best quotes standing when this trade arrives (they are written on
    /// the preceding record). Zero encodes an absent book side.
    pub bid_before: Cents,
    pub ask_before: Cents,
}
