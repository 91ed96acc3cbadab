//! Rolls per-day hit records up into market-level counters, per-stock
//! statistics, pooled summary statistics, and intraday occurrence patterns,
//! split by bull/bear regime and daily capitalization portfolio.
//!
//! All accumulation is mergeable: integer counters, integer duration sums
//! and distinct-stock sets combine associatively and commutatively, so a
//! parallel fold gives bitwise-identical results to a single pass. Means
//! and medians are computed once at finalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::limit_engine::{DayHitRecord, HitDirection, HitWindow, NextDayClass};
use crate::market_data::Date;

/// Market state label for a calendar span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Bull,
    Bear,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Bull => "bull",
            Regime::Bear => "bear",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "bull" => Some(Regime::Bull),
            "bear" => Some(Regime::Bear),
            _ => None,
        }
    }
}

/// Date-range → regime mapping covering the whole sample, contiguous and
/// gap-free by construction: bull windows over a bear baseline.
#[derive(Debug, Clone)]
pub struct RegimeCalendar {
    coverage_start: Date,
    coverage_end: Date,
    bull_windows: Vec<(Date, Date)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalendarError {
    EmptyCoverage,
    WindowOutsideCoverage,
    OverlappingWindows,
    DateOutsideCoverage(Date),
}

impl fmt::Display for CalendarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalendarError::EmptyCoverage => write!(f, "calendar coverage is empty"),
            CalendarError::WindowOutsideCoverage => {
                write!(f, "bull window extends outside calendar coverage")
            }
            CalendarError::OverlappingWindows => write!(f, "bull windows overlap or are unordered"),
            CalendarError::DateOutsideCoverage(d) => {
                write!(f, "date {d} outside calendar coverage")
            }
        }
    }
}

impl std::error::Error for CalendarError {}

impl RegimeCalendar {
    /// Bear baseline over `[coverage_start, coverage_end]` with inclusive
    /// bull windows, which must be ordered and disjoint.
    pub fn new(
        coverage_start: Date,
        coverage_end: Date,
        bull_windows: Vec<(Date, Date)>,
    ) -> Result<RegimeCalendar, CalendarError> {
        if coverage_start > coverage_end {
            return Err(CalendarError::EmptyCoverage);
        }
        let mut prev_end: Option<Date> = None;
        for &(start, end) in &bull_windows {
            if start > end {
                return Err(CalendarError::OverlappingWindows);
            }
            if start < coverage_start || end > coverage_end {
                return Err(CalendarError::WindowOutsideCoverage);
            }
            if let Some(pe) = prev_end {
                if start <= pe {
                    return Err(CalendarError::OverlappingWindows);
                }
            }
            prev_end = Some(end);
        }
        Ok(RegimeCalendar { coverage_start, coverage_end, bull_windows })
    }

    /// Bundled calendar for the Chinese A-share markets: the SSEC index was
    /// bullish 2000-01-04..2001-06-13, 2005-06-04..2007-10-16 and
    /// 2008-10-28..2009-08-04; every other date is bearish. Coverage is
    /// deliberately wide so synthetic dates resolve too.
    pub fn cn_a_share_default() -> RegimeCalendar {
        let d = |s: &str| Date::parse(s).unwrap();
        RegimeCalendar::new(
            d("1990-01-01"),
            d("2099-12-31"),
            vec![
                (d("2000-01-04"), d("2001-06-13")),
                (d("2005-06-04"), d("2007-10-16")),
                (d("2008-10-28"), d("2009-08-04")),
            ],
        )
        .expect("static calendar is valid")
    }

    pub fn regime_for(&self, date: Date) -> Result<Regime, CalendarError> {
        if date < self.coverage_start || date > self.coverage_end {
            return Err(CalendarError::DateOutsideCoverage(date));
        }
        for &(start, end) in &self.bull_windows {
            if date >= start && date <= end {
                return Ok(Regime::Bull);
            }
        }
        Ok(Regime::Bear)
    }

    pub fn bull_windows(&self) -> &[(Date, Date)] {
        &self.bull_windows
    }
}

/// Slim per-session view the aggregation layer consumes so full tick data
/// can be dropped as soon as a session has been segmented. One entry per
/// retained (non-IPO, non-ex-dividend) session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionMeta {
    pub stock_id: String,
    pub date: Date,
    /// Shares outstanding times previous close, cent-shares.
    pub capitalization: i64,
}

/// Daily capitalization sextile of every limit-hitting stock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortfolioAssignment {
    pub date: Date,
    /// stock_id → 1-based portfolio index; 1 = smallest capitalizations.
    pub by_stock: BTreeMap<String, u8>,
}

/// Sorts stocks by (capitalization, stock_id) ascending and splits them
/// into `count` contiguous groups. With `n = count·q + s` the `s`
/// largest-cap groups take the extra member, so on thin days the
/// small-cap portfolios may be empty.
pub fn assign_portfolios(
    date: Date,
    stocks: &[(String, i64)],
    count: usize,
) -> PortfolioAssignment {
    assert!(count >= 1);
    let mut sorted: Vec<&(String, i64)> = stocks.iter().collect();
    sorted.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n = sorted.len();
    let q = n / count;
    let s = n % count;
    let mut by_stock = BTreeMap::new();
    let mut idx = 0usize;
    for j in 0..count {
        let size = if j < count - s { q } else { q + 1 };
        for _ in 0..size {
            by_stock.insert(sorted[idx].0.clone(), (j + 1) as u8);
            idx += 1;
        }
    }
    PortfolioAssignment { date, by_stock }
}

/// Per-date portfolio assignments for the whole sample.
pub type PortfolioMap = BTreeMap<Date, PortfolioAssignment>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggError {
    Calendar(CalendarError),
    MissingSessionMeta { stock_id: String, date: Date },
    MissingPortfolio { stock_id: String, date: Date },
    BadBinMinutes { bin_minutes: u32 },
}

impl fmt::Display for AggError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggError::Calendar(e) => write!(f, "{e}"),
            AggError::MissingSessionMeta { stock_id, date } => {
                write!(f, "no session metadata for {stock_id} on {date}")
            }
            AggError::MissingPortfolio { stock_id, date } => {
                write!(f, "no portfolio assignment for {stock_id} on {date}")
            }
            AggError::BadBinMinutes { bin_minutes } => {
                write!(f, "bin width {bin_minutes} min must divide both auction sessions")
            }
        }
    }
}

impl std::error::Error for AggError {}

impl From<CalendarError> for AggError {
    fn from(e: CalendarError) -> Self {
        AggError::Calendar(e)
    }
}

/// Builds daily portfolio assignments over the stocks with hits on each
/// date, using capitalization from the session table.
pub fn build_portfolio_map(
    records: &[DayHitRecord],
    sessions: &[SessionMeta],
    count: usize,
) -> Result<PortfolioMap, AggError> {
    let caps: BTreeMap<(&str, Date), i64> = sessions
        .iter()
        .map(|s| ((s.stock_id.as_str(), s.date), s.capitalization))
        .collect();
    let mut per_date: BTreeMap<Date, Vec<(String, i64)>> = BTreeMap::new();
    for rec in records {
        let cap = *caps.get(&(rec.stock_id.as_str(), rec.date)).ok_or_else(|| {
            AggError::MissingSessionMeta { stock_id: rec.stock_id.clone(), date: rec.date }
        })?;
        per_date.entry(rec.date).or_default().push((rec.stock_id.clone(), cap));
    }
    Ok(per_date
        .into_iter()
        .map(|(date, stocks)| (date, assign_portfolios(date, &stocks, count)))
        .collect())
}

/// Regime filter of a reporting scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeScope {
    Whole,
    Bull,
    Bear,
}

impl RegimeScope {
    pub fn matches(&self, regime: Regime) -> bool {
        match self {
            RegimeScope::Whole => true,
            RegimeScope::Bull => regime == Regime::Bull,
            RegimeScope::Bear => regime == Regime::Bear,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeScope::Whole => "whole",
            RegimeScope::Bull => "bull",
            RegimeScope::Bear => "bear",
        }
    }

    pub const ALL: [RegimeScope; 3] = [RegimeScope::Whole, RegimeScope::Bull, RegimeScope::Bear];
}

/// A reporting scope: regime filter plus optional portfolio filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scope {
    pub regime: RegimeScope,
    /// `None` = all stocks; `Some(j)` = capitalization portfolio j.
    pub portfolio: Option<u8>,
}

/// One direction's family of day counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DirectionCounters {
    /// Limit-hitting days attributed to this direction.
    pub n: u64,
    pub n_con: u64,
    pub n_rev: u64,
    pub n_open: u64,
    pub n_am: u64,
    pub n_pm: u64,
    pub n_close: u64,
    pub n_close_con: u64,
    pub n_close_rev: u64,
}

impl DirectionCounters {
    fn absorb(&mut self, o: &DirectionCounters) {
        self.n += o.n;
        self.n_con += o.n_con;
        self.n_rev += o.n_rev;
        self.n_open += o.n_open;
        self.n_am += o.n_am;
        self.n_pm += o.n_pm;
        self.n_close += o.n_close;
        self.n_close_con += o.n_close_con;
        self.n_close_rev += o.n_close_rev;
    }
}

/// Finalized counters for one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct HitCounters {
    pub up: DirectionCounters,
    pub down: DirectionCounters,
    /// Distinct stocks with at least one retained session in the scope's
    /// date range (the portfolio filter does not narrow this: the
    /// per-portfolio mean is taken over the same stock universe, so the
    /// portfolio means sum to the all-stocks mean).
    pub stocks_in_scope: u64,
}

impl HitCounters {
    pub fn mean_n(&self, dir: HitDirection) -> Option<f64> {
        if self.stocks_in_scope == 0 {
            return None;
        }
        let n = match dir {
            HitDirection::Up => self.up.n,
            HitDirection::Down => self.down.n,
        };
        Some(n as f64 / self.stocks_in_scope as f64)
    }

    pub fn direction(&self, dir: HitDirection) -> &DirectionCounters {
        match dir {
            HitDirection::Up => &self.up,
            HitDirection::Down => &self.down,
        }
    }
}

/// Mergeable partial aggregate behind [`HitCounters`].
#[derive(Debug, Clone, Default)]
pub struct CounterAccumulator {
    up: DirectionCounters,
    down: DirectionCounters,
    stocks: BTreeSet<String>,
}

impl CounterAccumulator {
    pub fn add_session(&mut self, stock_id: &str) {
        if !self.stocks.contains(stock_id) {
            self.stocks.insert(stock_id.to_owned());
        }
    }

    /// Adds one limit-hitting day. The record counts once, in its
    /// first-hit direction family.
    pub fn add_record(&mut self, rec: &DayHitRecord) {
        let c = match rec.direction {
            HitDirection::Up => &mut self.up,
            HitDirection::Down => &mut self.down,
        };
        c.n += 1;
        match rec.next_day_class {
            NextDayClass::Continuation => c.n_con += 1,
            NextDayClass::Reversal => c.n_rev += 1,
            NextDayClass::Flat | NextDayClass::Unavailable => {}
        }
        match rec.first_hit_window {
            HitWindow::Open => c.n_open += 1,
            HitWindow::Am => c.n_am += 1,
            HitWindow::Pm => c.n_pm += 1,
        }
        if rec.closed_at_limit {
            c.n_close += 1;
            match rec.next_day_class {
                NextDayClass::Continuation => c.n_close_con += 1,
                NextDayClass::Reversal => c.n_close_rev += 1,
                NextDayClass::Flat | NextDayClass::Unavailable => {}
            }
        }
    }

    pub fn merge(mut self, other: CounterAccumulator) -> CounterAccumulator {
        self.up.absorb(&other.up);
        self.down.absorb(&other.down);
        self.stocks.extend(other.stocks);
        self
    }

    pub fn finalize(self) -> HitCounters {
        HitCounters { up: self.up, down: self.down, stocks_in_scope: self.stocks.len() as u64 }
    }
}

/// Counts limit-hitting days for one scope.
///
/// Every record's date must be covered by the calendar; records inside a
/// portfolio scope must carry an assignment for their date.
pub fn tabulate_counters(
    records: &[DayHitRecord],
    sessions: &[SessionMeta],
    calendar: &RegimeCalendar,
    portfolios: &PortfolioMap,
    scope: Scope,
) -> Result<HitCounters, AggError> {
    let mut acc = CounterAccumulator::default();
    for s in sessions {
        let regime = calendar.regime_for(s.date)?;
        if scope.regime.matches(regime) {
            acc.add_session(&s.stock_id);
        }
    }
    for rec in records {
        let regime = calendar.regime_for(rec.date)?;
        if !scope.regime.matches(regime) {
            continue;
        }
        if let Some(j) = scope.portfolio {
            let assigned = portfolios
                .get(&rec.date)
                .and_then(|a| a.by_stock.get(&rec.stock_id))
                .copied()
                .ok_or_else(|| AggError::MissingPortfolio {
                    stock_id: rec.stock_id.clone(),
                    date: rec.date,
                })?;
            if assigned != j {
                continue;
            }
        }
        acc.add_record(rec);
    }
    Ok(acc.finalize())
}

/// Per-stock hit statistics. A day belongs to the up (down) side when it
/// has at least one up (down) segment, so a day that touched both limits
/// counts on both sides and `k_days <= k_up + k_days`.
#[derive(Debug, Clone, PartialEq)]
pub struct StockHitStats {
    pub stock_id: String,
    /// Retained trading days in the sample.
    pub t_days: u64,
    /// Days with at least one hit in either direction.
    pub k_days: u64,
    pub k_up: u64,
    pub k_down: u64,
    /// k_days / t_days and the per-direction variants.
    pub hit_prob: f64,
    pub hit_prob_up: f64,
    pub hit_prob_down: f64,
    /// Mean daily hit count over hitting days only; absent when the stock
    /// never hit that side.
    pub mean_m_up: Option<f64>,
    pub mean_m_down: Option<f64>,
    /// Mean daily total at-limit duration, seconds.
    pub mean_duration_up: Option<f64>,
    pub mean_duration_down: Option<f64>,
    /// Mean daily first-to-last hit span, seconds.
    pub mean_span_up: Option<f64>,
    pub mean_span_down: Option<f64>,
}

/// Computes per-stock statistics over the retained sessions, sorted by
/// stock id. Stocks with no hits appear with zero probabilities and absent
/// means.
pub fn per_stock_stats(records: &[DayHitRecord], sessions: &[SessionMeta]) -> Vec<StockHitStats> {
    #[derive(Default)]
    struct Acc {
        t: u64,
        k: u64,
        k_up: u64,
        k_down: u64,
        m_up: u64,
        m_down: u64,
        dur_up: u64,
        dur_down: u64,
        span_up: u64,
        span_down: u64,
    }
    let mut by_stock: BTreeMap<&str, Acc> = BTreeMap::new();
    for s in sessions {
        by_stock.entry(s.stock_id.as_str()).or_default().t += 1;
    }
    for r in records {
        let a = by_stock.entry(r.stock_id.as_str()).or_default();
        a.k += 1;
        if r.m_up() > 0 {
            a.k_up += 1;
            a.m_up += r.m_up() as u64;
            a.dur_up += r.total_duration(HitDirection::Up) as u64;
            a.span_up += r.span(HitDirection::Up) as u64;
        }
        if r.m_down() > 0 {
            a.k_down += 1;
            a.m_down += r.m_down() as u64;
            a.dur_down += r.total_duration(HitDirection::Down) as u64;
            a.span_down += r.span(HitDirection::Down) as u64;
        }
    }
    by_stock
        .into_iter()
        .map(|(stock_id, a)| {
            let ratio = |num: u64| if a.t == 0 { 0.0 } else { num as f64 / a.t as f64 };
            let mean = |sum: u64, k: u64| if k == 0 { None } else { Some(sum as f64 / k as f64) };
            StockHitStats {
                stock_id: stock_id.to_string(),
                t_days: a.t,
                k_days: a.k,
                k_up: a.k_up,
                k_down: a.k_down,
                hit_prob: ratio(a.k),
                hit_prob_up: ratio(a.k_up),
                hit_prob_down: ratio(a.k_down),
                mean_m_up: mean(a.m_up, a.k_up),
                mean_m_down: mean(a.m_down, a.k_down),
                mean_duration_up: mean(a.dur_up, a.k_up),
                mean_duration_down: mean(a.dur_down, a.k_down),
                mean_span_up: mean(a.span_up, a.k_up),
                mean_span_down: mean(a.span_down, a.k_down),
            }
        })
        .collect()
}

/// Max, mean and median of one pooled value set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SummaryStats {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub count: u64,
}

/// Max/mean/median of an integer sample; `None` when empty. The median of
/// an even-sized set is the midpoint of the two central values.
pub fn summarize_u64(values: &mut [u64]) -> Option<SummaryStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    let max = *values.last().unwrap() as f64;
    let sum: u64 = values.iter().sum();
    let mean = sum as f64 / n as f64;
    let median = if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    };
    Some(SummaryStats { max, mean, median, count: n as u64 })
}

fn summarize_f64(values: &mut [f64]) -> Option<SummaryStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let max = *values.last().unwrap();
    let sum: f64 = values.iter().sum();
    let mean = sum / n as f64;
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    Some(SummaryStats { max, mean, median, count: n as u64 })
}

/// One scope × direction cell of the pooled summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCell {
    pub scope: Scope,
    pub direction: HitDirection,
    /// Day-level hit counts M.
    pub m: Option<SummaryStats>,
    /// Day-level total at-limit durations, seconds.
    pub duration: Option<SummaryStats>,
    /// Per-stock average spans (the headline span variant), seconds.
    pub span_per_stock: Option<SummaryStats>,
    /// Day-level spans, seconds (companion aggregation).
    pub span_per_day: Option<SummaryStats>,
}

/// Pools day-level hit counts, durations and spans per scope × direction.
///
/// A day enters a direction's pool when it has segments in that direction
/// (set membership, not headline direction). Span statistics are reported
/// over per-stock averages, with the day-level pooling kept alongside.
pub fn summarize_pooled(
    records: &[DayHitRecord],
    calendar: &RegimeCalendar,
    portfolios: &PortfolioMap,
    portfolio_count: usize,
) -> Result<Vec<SummaryCell>, AggError> {
    let mut cells = Vec::new();
    for regime in RegimeScope::ALL {
        let mut scopes = vec![None];
        scopes.extend((1..=portfolio_count as u8).map(Some));
        for portfolio in scopes {
            let scope = Scope { regime, portfolio };
            for direction in [HitDirection::Up, HitDirection::Down] {
                let mut m_pool: Vec<u64> = Vec::new();
                let mut dur_pool: Vec<u64> = Vec::new();
                let mut span_pool: Vec<u64> = Vec::new();
                let mut per_stock_spans: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
                for rec in records {
                    let reg = calendar.regime_for(rec.date)?;
                    if !scope.regime.matches(reg) {
                        continue;
                    }
                    if let Some(j) = scope.portfolio {
                        let assigned = portfolios
                            .get(&rec.date)
                            .and_then(|a| a.by_stock.get(&rec.stock_id))
                            .copied()
                            .ok_or_else(|| AggError::MissingPortfolio {
                                stock_id: rec.stock_id.clone(),
                                date: rec.date,
                            })?;
                        if assigned != j {
                            continue;
                        }
                    }
                    let m = match direction {
                        HitDirection::Up => rec.m_up(),
                        HitDirection::Down => rec.m_down(),
                    };
                    if m == 0 {
                        continue;
                    }
                    m_pool.push(m as u64);
                    dur_pool.push(rec.total_duration(direction) as u64);
                    let span = rec.span(direction) as u64;
                    span_pool.push(span);
                    let e = per_stock_spans.entry(rec.stock_id.as_str()).or_insert((0, 0));
                    e.0 += span;
                    e.1 += 1;
                }
                let mut stock_means: Vec<f64> =
                    per_stock_spans.values().map(|(sum, k)| *sum as f64 / *k as f64).collect();
                cells.push(SummaryCell {
                    scope,
                    direction,
                    m: summarize_u64(&mut m_pool),
                    duration: summarize_u64(&mut dur_pool),
                    span_per_stock: summarize_f64(&mut stock_means),
                    span_per_day: summarize_u64(&mut span_pool),
                });
            }
        }
    }
    Ok(cells)
}

/// Occurrence counts of first hits per intraday bin, split by direction
/// and regime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntradayPattern {
    pub bin_minutes: u32,
    pub bins: Vec<IntradayBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct IntradayBin {
    /// Bin left edge, seconds since midnight; bins are (start, start+Δt].
    pub start: u32,
    pub c_up: u64,
    pub c_down: u64,
    pub c_up_bull: u64,
    pub c_up_bear: u64,
    pub c_down_bull: u64,
    pub c_down_bear: u64,
}

/// Bins each day's first hit time per direction into intraday intervals
/// over the two continuous auction sessions.
///
/// Bins are right-closed. Opening-auction hits (at or before 9:30) land in
/// the first morning bin; a hit exactly at the afternoon reopen lands in
/// the first afternoon bin.
pub fn intraday_pattern(
    records: &[DayHitRecord],
    calendar: &RegimeCalendar,
    bin_minutes: u32,
    windows: &crate::market_data::SessionWindows,
) -> Result<IntradayPattern, AggError> {
    let bin_s = bin_minutes * 60;
    let am_len = windows.am_end - windows.open_end;
    let pm_len = windows.close - windows.pm_start;
    if bin_minutes == 0 || am_len % bin_s != 0 || pm_len % bin_s != 0 {
        return Err(AggError::BadBinMinutes { bin_minutes });
    }
    let am_bins = (am_len / bin_s) as usize;
    let pm_bins = (pm_len / bin_s) as usize;
    let mut bins: Vec<IntradayBin> = Vec::with_capacity(am_bins + pm_bins);
    for i in 0..am_bins {
        bins.push(IntradayBin { start: windows.open_end + i as u32 * bin_s, ..Default::default() });
    }
    for i in 0..pm_bins {
        bins.push(IntradayBin { start: windows.pm_start + i as u32 * bin_s, ..Default::default() });
    }

    let bin_index = |ts: u32| -> usize {
        if ts <= windows.open_end {
            0 // opening-auction hits fold into the first morning bin
        } else if ts <= windows.am_end {
            ((ts - windows.open_end - 1) / bin_s) as usize
        } else if ts <= windows.pm_start {
            am_bins // reopen boundary folds into the first afternoon bin
        } else {
            am_bins + ((ts - windows.pm_start - 1) / bin_s) as usize
        }
    };

    for rec in records {
        let regime = calendar.regime_for(rec.date)?;
        for dir in [HitDirection::Up, HitDirection::Down] {
            let Some(ts) = rec.first_hit_time(dir) else { continue };
            let bin = &mut bins[bin_index(ts)];
            match (dir, regime) {
                (HitDirection::Up, Regime::Bull) => {
                    bin.c_up += 1;
                    bin.c_up_bull += 1;
                }
                (HitDirection::Up, Regime::Bear) => {
                    bin.c_up += 1;
                    bin.c_up_bear += 1;
                }
                (HitDirection::Down, Regime::Bull) => {
                    bin.c_down += 1;
                    bin.c_down_bull += 1;
                }
                (HitDirection::Down, Regime::Bear) => {
                    bin.c_down += 1;
                    bin.c_down_bear += 1;
                }
            }
        }
    }
    Ok(IntradayPattern { bin_minutes, bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_engine::HitSegment;
    use crate::market_data::SessionWindows;
    use crate::rng::SplitMix64;

    fn d(s: &str) -> Date {
        Date::parse(s).unwrap()
    }

    fn record(
        stock: &str,
        date: &str,
        direction: HitDirection,
        first_ts: u32,
        window: HitWindow,
        closed: bool,
        next: NextDayClass,
    ) -> DayHitRecord {
        let seg = HitSegment { direction, start_time: first_ts, duration: 60, ends_at_close: false };
        DayHitRecord {
            stock_id: stock.to_string(),
            date: d(date),
            direction,
            segments_up: if direction == HitDirection::Up { vec![seg] } else { vec![] },
            segments_down: if direction == HitDirection::Down { vec![seg] } else { vec![] },
            first_hit_window: window,
            closed_at_limit: closed,
            close_direction: if closed { Some(direction) } else { None },
            next_day_class: next,
        }
    }

    #[test]
    fn default_calendar_matches_published_windows() {
        let cal = RegimeCalendar::cn_a_share_default();
        assert_eq!(cal.regime_for(d("2000-01-04")).unwrap(), Regime::Bull);
        assert_eq!(cal.regime_for(d("2001-06-13")).unwrap(), Regime::Bull);
        assert_eq!(cal.regime_for(d("2001-06-14")).unwrap(), Regime::Bear);
        assert_eq!(cal.regime_for(d("2005-06-03")).unwrap(), Regime::Bear);
        assert_eq!(cal.regime_for(d("2006-07-01")).unwrap(), Regime::Bull);
        assert_eq!(cal.regime_for(d("2008-10-27")).unwrap(), Regime::Bear);
        assert_eq!(cal.regime_for(d("2009-08-04")).unwrap(), Regime::Bull);
        assert_eq!(cal.regime_for(d("2011-12-30")).unwrap(), Regime::Bear);
        assert!(matches!(
            RegimeCalendar::new(d("2001-01-01"), d("2000-01-01"), vec![]),
            Err(CalendarError::EmptyCoverage)
        ));
    }

    #[test]
    fn portfolio_even_split() {
        let stocks: Vec<(String, i64)> =
            (0..12).map(|i| (format!("6000{i:02}"), (i + 1) * 1000)).collect();
        let a = assign_portfolios(d("2006-01-04"), &stocks, 6);
        assert_eq!(a.by_stock["600000"], 1);
        assert_eq!(a.by_stock["600001"], 1);
        assert_eq!(a.by_stock["600010"], 6);
        assert_eq!(a.by_stock["600011"], 6);
    }

    #[test]
    fn portfolio_remainder_goes_to_largest() {
        let stocks: Vec<(String, i64)> =
            (0..13).map(|i| (format!("6000{i:02}"), (i + 1) * 1000)).collect();
        let a = assign_portfolios(d("2006-01-04"), &stocks, 6);
        let mut sizes = [0usize; 6];
        for j in a.by_stock.values() {
            sizes[(*j - 1) as usize] += 1;
        }
        assert_eq!(sizes, [2, 2, 2, 2, 2, 3]);
    }

    #[test]
    fn portfolio_thin_day_leaves_small_cap_empty() {
        let stocks: Vec<(String, i64)> =
            (0..5).map(|i| (format!("6000{i:02}"), (i + 1) * 1000)).collect();
        let a = assign_portfolios(d("2006-01-04"), &stocks, 6);
        let mut sizes = [0usize; 6];
        for j in a.by_stock.values() {
            sizes[(*j - 1) as usize] += 1;
        }
        assert_eq!(sizes, [0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn portfolio_tie_breaks_by_stock_id() {
        let stocks = vec![("600002".to_string(), 100), ("600001".to_string(), 100)];
        let a = assign_portfolios(d("2006-01-04"), &stocks, 2);
        assert_eq!(a.by_stock["600001"], 1);
        assert_eq!(a.by_stock["600002"], 2);
    }

    #[test]
    fn one_record_trace() {
        // up hit at 10:05, closed at limit, next open higher
        let rec = record(
            "600000",
            "2006-01-04",
            HitDirection::Up,
            36300,
            HitWindow::Am,
            true,
            NextDayClass::Continuation,
        );
        let sessions = vec![SessionMeta {
            stock_id: "600000".to_string(),
            date: d("2006-01-04"),
            capitalization: 1,
        }];
        let cal = RegimeCalendar::cn_a_share_default();
        let pf = build_portfolio_map(&[rec.clone()], &sessions, 6).unwrap();
        let c = tabulate_counters(
            &[rec],
            &sessions,
            &cal,
            &pf,
            Scope { regime: RegimeScope::Whole, portfolio: None },
        )
        .unwrap();
        assert_eq!(c.up.n, 1);
        assert_eq!(c.up.n_am, 1);
        assert_eq!(c.up.n_close, 1);
        assert_eq!(c.up.n_con, 1);
        assert_eq!(c.up.n_close_con, 1);
        assert_eq!(c.up.n_open + c.up.n_pm, 0);
        assert_eq!(c.down.n, 0);
        assert_eq!(c.mean_n(HitDirection::Up), Some(1.0));
    }

    #[test]
    fn partition_identity_over_random_corpus() {
        // random synthetic records; N(all) must equal the sum over portfolios,
        // and window counts must partition N, in every regime scope
        let mut rng = SplitMix64::new(7);
        let dates = ["2006-03-01", "2006-03-02", "2009-09-01", "2009-09-02"];
        let mut records = Vec::new();
        let mut sessions = Vec::new();
        for s in 0..40u64 {
            let stock = format!("60{:04}", s);
            for date in dates {
                sessions.push(SessionMeta {
                    stock_id: stock.clone(),
                    date: d(date),
                    capitalization: 1000 + rng.next_below(100_000) as i64,
                });
                if rng.next_below(3) == 0 {
                    let dir = if rng.next_below(2) == 0 { HitDirection::Up } else { HitDirection::Down };
                    let (ts, w) = match rng.next_below(3) {
                        0 => (34000, HitWindow::Open),
                        1 => (36000, HitWindow::Am),
                        _ => (50000, HitWindow::Pm),
                    };
                    let closed = rng.next_below(2) == 0;
                    let next = match rng.next_below(4) {
                        0 => NextDayClass::Continuation,
                        1 => NextDayClass::Reversal,
                        2 => NextDayClass::Flat,
                        _ => NextDayClass::Unavailable,
                    };
                    records.push(record(&stock, date, dir, ts, w, closed, next));
                }
            }
        }
        let cal = RegimeCalendar::cn_a_share_default();
        let pf = build_portfolio_map(&records, &sessions, 6).unwrap();
        for regime in RegimeScope::ALL {
            let all = tabulate_counters(
                &records,
                &sessions,
                &cal,
                &pf,
                Scope { regime, portfolio: None },
            )
            .unwrap();
            let mut sum_up = 0;
            let mut sum_down = 0;
            let mut mean_sum_up = 0.0;
            for j in 1..=6u8 {
                let c = tabulate_counters(
                    &records,
                    &sessions,
                    &cal,
                    &pf,
                    Scope { regime, portfolio: Some(j) },
                )
                .unwrap();
                sum_up += c.up.n;
                sum_down += c.down.n;
                mean_sum_up += c.mean_n(HitDirection::Up).unwrap_or(0.0);
                assert_eq!(c.stocks_in_scope, all.stocks_in_scope);
            }
            assert_eq!(all.up.n, sum_up);
            assert_eq!(all.down.n, sum_down);
            assert_eq!(all.up.n_open + all.up.n_am + all.up.n_pm, all.up.n);
            assert_eq!(all.down.n_open + all.down.n_am + all.down.n_pm, all.down.n);
            assert!(all.up.n_con + all.up.n_rev <= all.up.n);
            assert!(all.up.n_close_con + all.up.n_close_rev <= all.up.n_close);
            if all.stocks_in_scope > 0 {
                let diff = (mean_sum_up - all.mean_n(HitDirection::Up).unwrap()).abs();
                assert!(diff < 1e-12);
            }
        }
    }

    #[test]
    fn date_outside_calendar_is_fatal() {
        let cal = RegimeCalendar::new(d("2006-01-01"), d("2006-12-31"), vec![]).unwrap();
        let rec = record(
            "600000",
            "2007-01-04",
            HitDirection::Up,
            36000,
            HitWindow::Am,
            false,
            NextDayClass::Flat,
        );
        let sessions = vec![SessionMeta {
            stock_id: "600000".to_string(),
            date: d("2007-01-04"),
            capitalization: 1,
        }];
        let pf = build_portfolio_map(&[rec.clone()], &sessions, 6).unwrap();
        let err = tabulate_counters(
            &[rec],
            &sessions,
            &cal,
            &pf,
            Scope { regime: RegimeScope::Whole, portfolio: None },
        );
        assert!(matches!(err, Err(AggError::Calendar(CalendarError::DateOutsideCoverage(_)))));
    }

    #[test]
    fn merge_equals_single_pass() {
        let recs: Vec<DayHitRecord> = (0..30)
            .map(|i| {
                record(
                    &format!("60{:04}", i % 7),
                    "2006-03-01",
                    if i % 2 == 0 { HitDirection::Up } else { HitDirection::Down },
                    36000,
                    HitWindow::Am,
                    i % 3 == 0,
                    NextDayClass::Continuation,
                )
            })
            .collect();
        let mut single = CounterAccumulator::default();
        for r in &recs {
            single.add_record(r);
            single.add_session(&r.stock_id);
        }
        // split in three, merge in a shuffled order
        let mut parts: Vec<CounterAccumulator> = Vec::new();
        for chunk in recs.chunks(10) {
            let mut acc = CounterAccumulator::default();
            for r in chunk {
                acc.add_record(r);
                acc.add_session(&r.stock_id);
            }
            parts.push(acc);
        }
        let merged = parts.remove(1).merge(parts.remove(1)).merge(parts.remove(0));
        assert_eq!(merged.finalize(), single.finalize());
    }

    #[test]
    fn per_stock_hand_case() {
        // T=100, two up days with M = 1 and 3, durations 60 s and 180 s
        let mut sessions: Vec<SessionMeta> = (0..100)
            .map(|i| SessionMeta {
                stock_id: "600000".to_string(),
                date: Date::new(2006, 1 + (i / 28) as u8, 1 + (i % 28) as u8).unwrap(),
                capitalization: 1,
            })
            .collect();
        sessions.sort_by_key(|s| s.date);
        let mk = |date: Date, m: u32, dur_total: u32| {
            let seg_dur = dur_total / m;
            let segs: Vec<HitSegment> = (0..m)
                .map(|i| HitSegment {
                    direction: HitDirection::Up,
                    start_time: 36000 + i * 600,
                    duration: seg_dur,
                    ends_at_close: false,
                })
                .collect();
            DayHitRecord {
                stock_id: "600000".to_string(),
                date,
                direction: HitDirection::Up,
                segments_up: segs,
                segments_down: vec![],
                first_hit_window: HitWindow::Am,
                closed_at_limit: false,
                close_direction: None,
                next_day_class: NextDayClass::Unavailable,
            }
        };
        let records = vec![mk(sessions[0].date, 1, 60), mk(sessions[1].date, 3, 180)];
        let stats = per_stock_stats(&records, &sessions);
        assert_eq!(stats.len(), 1);
        let s = &stats[0];
        assert_eq!(s.t_days, 100);
        assert_eq!(s.k_up, 2);
        assert!((s.hit_prob_up - 0.02).abs() < 1e-15);
        assert_eq!(s.mean_m_up, Some(2.0));
        assert_eq!(s.mean_duration_up, Some(120.0));
        assert_eq!(s.mean_m_down, None);
    }

    #[test]
    fn per_stock_no_hits_and_both_direction_day() {
        let sessions = vec![
            SessionMeta { stock_id: "600000".to_string(), date: d("2006-01-04"), capitalization: 1 },
            SessionMeta { stock_id: "600001".to_string(), date: d("2006-01-04"), capitalization: 1 },
        ];
        let seg = |dir| HitSegment { direction: dir, start_time: 36000, duration: 60, ends_at_close: false };
        let both = DayHitRecord {
            stock_id: "600001".to_string(),
            date: d("2006-01-04"),
            direction: HitDirection::Up,
            segments_up: vec![seg(HitDirection::Up)],
            segments_down: vec![seg(HitDirection::Down)],
            first_hit_window: HitWindow::Am,
            closed_at_limit: false,
            close_direction: None,
            next_day_class: NextDayClass::Unavailable,
        };
        let stats = per_stock_stats(&[both], &sessions);
        let quiet = &stats[0];
        assert_eq!(quiet.k_days, 0);
        assert_eq!(quiet.hit_prob, 0.0);
        assert_eq!(quiet.mean_m_up, None);
        let busy = &stats[1];
        // same-day up+down: K = 1 while K_up + K_down = 2
        assert_eq!(busy.k_days, 1);
        assert_eq!(busy.k_up + busy.k_down, 2);
    }

    #[test]
    fn pooled_two_point_set() {
        let mut v = vec![1u64, 3];
        let s = summarize_u64(&mut v).unwrap();
        assert_eq!(s.max, 3.0);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.median, 2.0);
        assert!(summarize_u64(&mut []).is_none());
    }

    #[test]
    fn intraday_bin_membership() {
        let cal = RegimeCalendar::cn_a_share_default();
        let w = SessionWindows::default();
        let mk = |ts: u32, window: HitWindow| {
            record("600000", "2006-01-04", HitDirection::Up, ts, window, false, NextDayClass::Flat)
        };
        // 9:31 -> bin (9:30, 9:35]; exactly 9:35:00 -> same bin; opening hit -> first bin
        let records = vec![
            mk(34260, HitWindow::Am),
            mk(34500, HitWindow::Am),
            mk(34200, HitWindow::Open),
            mk(34501, HitWindow::Am),
            mk(46800, HitWindow::Pm),
        ];
        let p = intraday_pattern(&records, &cal, 5, &w).unwrap();
        assert_eq!(p.bins.len(), 48);
        assert_eq!(p.bins[0].c_up, 3);
        assert_eq!(p.bins[1].c_up, 1);
        assert_eq!(p.bins[24].start, 46800);
        assert_eq!(p.bins[24].c_up, 1);
        let total: u64 = p.bins.iter().map(|b| b.c_up).sum();
        assert_eq!(total, 5);
        for b in &p.bins {
            assert_eq!(b.c_up, b.c_up_bull + b.c_up_bear);
            assert_eq!(b.c_down, b.c_down_bull + b.c_down_bear);
        }
        assert!(matches!(
            intraday_pattern(&records, &cal, 7, &w),
            Err(AggError::BadBinMinutes { .. })
        ));
    }
}
