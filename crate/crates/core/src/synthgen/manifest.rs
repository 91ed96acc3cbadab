//! Ground-truth manifest: everything the analytics pipeline is expected to
//! produce on a generated corpus, derived from the scenario plan alone.
//!
//! The aggregation here is intentionally written from scratch (plain loops,
//! own portfolio split, own medians) rather than calling the analysis
//! modules, so a defect on either side surfaces as a manifest mismatch
//! instead of cancelling out.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::aggregation::{DirectionCounters, IntradayBin, Regime, SummaryStats};
use crate::limit_engine::{HitDirection, HitWindow, NextDayClass};
use crate::market_data::{Cents, Date, Shares};
use crate::prehit::TradeSide;

use super::generator::{AM_END, AM_START, CLOSE, PM_START};
use super::scenario::{OpenRelation, PlannedSegment};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthManifest {
    pub seed: u64,
    pub levels: usize,
    pub sessions: Vec<ManifestSession>,
    /// Expected per-day hit records, excluding IPO/ex-dividend days,
    /// sorted by (stock_id, date).
    pub day_records: Vec<ManifestDayRecord>,
    /// Counters for all 21 scopes (3 regimes × all + 6 portfolios).
    pub counters: Vec<ManifestCounters>,
    pub summary: Vec<ManifestSummaryCell>,
    pub intraday: ManifestIntraday,
    /// Velocity expectations over approach-scripted events only.
    pub velocity: Vec<ManifestVelocity>,
    /// Event-study expectations over trade-scripted events only.
    pub event_study: Vec<ManifestStudy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSession {
    pub stock_id: String,
    pub date: Date,
    pub regime: Regime,
    /// Tick rows emitted for this session.
    pub rows: u64,
    pub prev_close: Cents,
    pub shares_outstanding: Shares,
    pub capitalization: i64,
    pub is_ipo_day: bool,
    pub is_ex_dividend_day: bool,
    pub next_day_open: Option<Cents>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestDayRecord {
    pub stock_id: String,
    pub date: Date,
    pub direction: HitDirection,
    pub m_up: u32,
    pub m_down: u32,
    pub dt_up_s: u32,
    pub dt_down_s: u32,
    pub span_up_s: u32,
    pub span_down_s: u32,
    pub first_window: HitWindow,
    pub closed_at_limit: bool,
    pub close_direction: Option<HitDirection>,
    pub next_day_class: NextDayClass,
    /// First segment start per direction, for intraday binning.
    pub first_hit_up: Option<u32>,
    pub first_hit_down: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCounters {
    /// whole / bull / bear.
    pub regime_scope: String,
    /// 0 = all stocks, 1..=6 = capitalization portfolio.
    pub portfolio: u8,
    pub up: DirectionCounters,
    pub down: DirectionCounters,
    pub stocks_in_scope: u64,
    pub mean_n_up: Option<f64>,
    pub mean_n_down: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSummaryCell {
    pub regime_scope: String,
    pub portfolio: u8,
    pub direction: HitDirection,
    pub m: Option<SummaryStats>,
    pub duration: Option<SummaryStats>,
    pub span_per_stock: Option<SummaryStats>,
    pub span_per_day: Option<SummaryStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestIntraday {
    pub bin_minutes: u32,
    pub bins: Vec<IntradayBin>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestVelocity {
    pub class: String,
    pub event_count: u64,
    pub velocities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestStudy {
    pub class: String,
    pub window: usize,
    pub event_count: u64,
    pub s_plus: Vec<Option<f64>>,
    pub s_minus: Vec<Option<f64>>,
    pub ret: Vec<f64>,
    pub vol: Vec<f64>,
    pub spread: Vec<Option<f64>>,
    pub n_plus: Vec<u64>,
    pub n_minus: Vec<u64>,
    pub n_spread: Vec<u64>,
}

/// Scripted study event as echoed into the manifest computation.
#[derive(Debug, Clone)]
pub(super) struct ScriptEcho {
    pub prices: Vec<Cents>,
    pub sizes: Vec<Shares>,
    pub sides: Vec<TradeSide>,
    /// (bid, ask) standing before trade k; zero-encoded sides removed.
    pub quotes: Vec<Option<(Cents, Cents)>>,
}

/// Everything the generator learned about one session, enough to derive
/// the manifest without looking at the emitted bytes.
#[derive(Debug, Clone)]
pub(super) struct SessionOutcome {
    pub stock_id: String,
    pub date: Date,
    pub regime: Regime,
    pub rows: u64,
    pub prev_close: Cents,
    pub shares_outstanding: Shares,
    pub is_ipo_day: bool,
    pub is_ex_dividend_day: bool,
    pub next_day_open: Option<Cents>,
    /// Planted segments per direction (empty on no-hit days).
    pub segments_up: Vec<PlannedSegment>,
    pub segments_down: Vec<PlannedSegment>,
    pub relation: Option<OpenRelation>,
    pub approach_durations: Option<Vec<u32>>,
    pub script: Option<ScriptEcho>,
}

impl SessionOutcome {
    fn retained(&self) -> bool {
        !self.is_ipo_day && !self.is_ex_dividend_day
    }

    fn has_hit(&self) -> bool {
        !self.segments_up.is_empty() || !self.segments_down.is_empty()
    }
}

fn window_for(ts: u32) -> HitWindow {
    if ts <= AM_START {
        HitWindow::Open
    } else if ts <= AM_END {
        HitWindow::Am
    } else {
        HitWindow::Pm
    }
}

fn span_of(segs: &[PlannedSegment]) -> u32 {
    match (segs.first(), segs.last()) {
        (Some(f), Some(l)) => l.end() - f.start,
        _ => 0,
    }
}

fn expected_day(outcome: &SessionOutcome) -> ManifestDayRecord {
    let first_up = outcome.segments_up.first().map(|s| s.start);
    let first_down = outcome.segments_down.first().map(|s| s.start);
    let direction = match (first_up, first_down) {
        (Some(u), Some(d)) if d < u => HitDirection::Down,
        (Some(_), _) => HitDirection::Up,
        _ => HitDirection::Down,
    };
    let first_ts = first_up.into_iter().chain(first_down).min().unwrap();
    let close_direction = if outcome.segments_up.last().map(|s| s.end()) == Some(CLOSE) {
        Some(HitDirection::Up)
    } else if outcome.segments_down.last().map(|s| s.end()) == Some(CLOSE) {
        Some(HitDirection::Down)
    } else {
        None
    };
    let next_day_class = match outcome.relation {
        Some(OpenRelation::Halt) | None => NextDayClass::Unavailable,
        Some(OpenRelation::Equal) => NextDayClass::Flat,
        Some(OpenRelation::Higher) => match direction {
            HitDirection::Up => NextDayClass::Continuation,
            HitDirection::Down => NextDayClass::Reversal,
        },
        Some(OpenRelation::Lower) => match direction {
            HitDirection::Up => NextDayClass::Reversal,
            HitDirection::Down => NextDayClass::Continuation,
        },
    };
    ManifestDayRecord {
        stock_id: outcome.stock_id.clone(),
        date: outcome.date,
        direction,
        m_up: outcome.segments_up.len() as u32,
        m_down: outcome.segments_down.len() as u32,
        dt_up_s: outcome.segments_up.iter().map(|s| s.duration).sum(),
        dt_down_s: outcome.segments_down.iter().map(|s| s.duration).sum(),
        span_up_s: span_of(&outcome.segments_up),
        span_down_s: span_of(&outcome.segments_down),
        first_window: window_for(first_ts),
        closed_at_limit: close_direction.is_some(),
        close_direction,
        next_day_class,
        first_hit_up: first_up,
        first_hit_down: first_down,
    }
}

fn scope_matches(scope: &str, regime: Regime) -> bool {
    match scope {
        "whole" => true,
        "bull" => regime == Regime::Bull,
        "bear" => regime == Regime::Bear,
        _ => unreachable!(),
    }
}

fn median_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn stats_of(mut values: Vec<f64>) -> Option<SummaryStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sum: f64 = values.iter().sum();
    Some(SummaryStats {
        max: *values.last().unwrap(),
        mean: sum / values.len() as f64,
        median: median_sorted(&values),
        count: values.len() as u64,
    })
}

pub(super) fn build_manifest(
    seed: u64,
    levels: usize,
    outcomes: &[SessionOutcome],
    portfolio_count: usize,
    intraday_bin_minutes: u32,
) -> TruthManifest {
    let sessions: Vec<ManifestSession> = outcomes
        .iter()
        .map(|o| ManifestSession {
            stock_id: o.stock_id.clone(),
            date: o.date,
            regime: o.regime,
            rows: o.rows,
            prev_close: o.prev_close,
            shares_outstanding: o.shares_outstanding,
            capitalization: o.shares_outstanding * o.prev_close,
            is_ipo_day: o.is_ipo_day,
            is_ex_dividend_day: o.is_ex_dividend_day,
            next_day_open: o.next_day_open,
        })
        .collect();

    let retained: Vec<&SessionOutcome> = outcomes.iter().filter(|o| o.retained()).collect();
    let mut hit_days: Vec<(&SessionOutcome, ManifestDayRecord)> = retained
        .iter()
        .filter(|o| o.has_hit())
        .map(|o| (*o, expected_day(o)))
        .collect();
    hit_days.sort_by(|a, b| (&a.1.stock_id, a.1.date).cmp(&(&b.1.stock_id, b.1.date)));

    // daily portfolio split over hitting stocks, smallest caps first,
    // remainder to the largest-cap groups
    let mut per_date: BTreeMap<Date, Vec<(i64, String)>> = BTreeMap::new();
    for (o, rec) in &hit_days {
        per_date
            .entry(rec.date)
            .or_default()
            .push((o.shares_outstanding * o.prev_close, rec.stock_id.clone()));
    }
    let mut portfolio_of: BTreeMap<(String, Date), u8> = BTreeMap::new();
    for (date, mut stocks) in per_date {
        stocks.sort();
        let n = stocks.len();
        let q = n / portfolio_count;
        let s = n % portfolio_count;
        let mut idx = 0usize;
        for j in 0..portfolio_count {
            let size = if j < portfolio_count - s { q } else { q + 1 };
            for _ in 0..size {
                portfolio_of.insert((stocks[idx].1.clone(), date), (j + 1) as u8);
                idx += 1;
            }
        }
    }

    let scopes = ["whole", "bull", "bear"];
    let mut counters = Vec::new();
    let mut summary = Vec::new();
    for scope in scopes {
        let stock_universe: BTreeSet<&str> = retained
            .iter()
            .filter(|o| scope_matches(scope, o.regime))
            .map(|o| o.stock_id.as_str())
            .collect();
        let stocks_in_scope = stock_universe.len() as u64;
        for portfolio in 0..=portfolio_count as u8 {
            let selected: Vec<&(&SessionOutcome, ManifestDayRecord)> = hit_days
                .iter()
                .filter(|(o, rec)| {
                    scope_matches(scope, o.regime)
                        && (portfolio == 0
                            || portfolio_of[&(rec.stock_id.clone(), rec.date)] == portfolio)
                })
                .collect();
            let mut up = DirectionCounters::default();
            let mut down = DirectionCounters::default();
            for (_, rec) in &selected {
                let c = match rec.direction {
                    HitDirection::Up => &mut up,
                    HitDirection::Down => &mut down,
                };
                c.n += 1;
                match rec.next_day_class {
                    NextDayClass::Continuation => c.n_con += 1,
                    NextDayClass::Reversal => c.n_rev += 1,
                    _ => {}
                }
                match rec.first_window {
                    HitWindow::Open => c.n_open += 1,
                    HitWindow::Am => c.n_am += 1,
                    HitWindow::Pm => c.n_pm += 1,
                }
                if rec.closed_at_limit {
                    c.n_close += 1;
                    match rec.next_day_class {
                        NextDayClass::Continuation => c.n_close_con += 1,
                        NextDayClass::Reversal => c.n_close_rev += 1,
                        _ => {}
                    }
                }
            }
            let mean = |n: u64| {
                if stocks_in_scope == 0 {
                    None
                } else {
                    Some(n as f64 / stocks_in_scope as f64)
                }
            };
            counters.push(ManifestCounters {
                regime_scope: scope.to_string(),
                portfolio,
                mean_n_up: mean(up.n),
                mean_n_down: mean(down.n),
                up,
                down,
                stocks_in_scope,
            });

            for direction in [HitDirection::Up, HitDirection::Down] {
                let mut m_pool = Vec::new();
                let mut dur_pool = Vec::new();
                let mut span_pool = Vec::new();
                let mut per_stock: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
                for (_, rec) in &selected {
                    let (m, dur, span) = match direction {
                        HitDirection::Up => (rec.m_up, rec.dt_up_s, rec.span_up_s),
                        HitDirection::Down => (rec.m_down, rec.dt_down_s, rec.span_down_s),
                    };
                    if m == 0 {
                        continue;
                    }
                    m_pool.push(m as f64);
                    dur_pool.push(dur as f64);
                    span_pool.push(span as f64);
                    let e = per_stock.entry(rec.stock_id.as_str()).or_insert((0, 0));
                    e.0 += span as u64;
                    e.1 += 1;
                }
                let stock_means: Vec<f64> =
                    per_stock.values().map(|(s, k)| *s as f64 / *k as f64).collect();
                summary.push(ManifestSummaryCell {
                    regime_scope: scope.to_string(),
                    portfolio,
                    direction,
                    m: stats_of(m_pool),
                    duration: stats_of(dur_pool),
                    span_per_stock: stats_of(stock_means),
                    span_per_day: stats_of(span_pool),
                });
            }
        }
    }

    // intraday first-hit bins over the two continuous sessions
    let bin_s = intraday_bin_minutes * 60;
    let am_bins = ((AM_END - AM_START) / bin_s) as usize;
    let pm_bins = ((CLOSE - PM_START) / bin_s) as usize;
    let mut bins: Vec<IntradayBin> = (0..am_bins)
        .map(|i| IntradayBin { start: AM_START + i as u32 * bin_s, ..Default::default() })
        .chain((0..pm_bins).map(|i| IntradayBin {
            start: PM_START + i as u32 * bin_s,
            ..Default::default()
        }))
        .collect();
    let index_of = |ts: u32| -> usize {
        if ts <= AM_START {
            0
        } else if ts <= AM_END {
            ((ts - AM_START - 1) / bin_s) as usize
        } else if ts <= PM_START {
            am_bins
        } else {
            am_bins + ((ts - PM_START - 1) / bin_s) as usize
        }
    };
    for (o, rec) in &hit_days {
        for (dir, first) in
            [(HitDirection::Up, rec.first_hit_up), (HitDirection::Down, rec.first_hit_down)]
        {
            let Some(ts) = first else { continue };
            let b = &mut bins[index_of(ts)];
            match (dir, o.regime) {
                (HitDirection::Up, Regime::Bull) => {
                    b.c_up += 1;
                    b.c_up_bull += 1;
                }
                (HitDirection::Up, Regime::Bear) => {
                    b.c_up += 1;
                    b.c_up_bear += 1;
                }
                (HitDirection::Down, Regime::Bull) => {
                    b.c_down += 1;
                    b.c_down_bull += 1;
                }
                (HitDirection::Down, Regime::Bear) => {
                    b.c_down += 1;
                    b.c_down_bear += 1;
                }
            }
        }
    }

    // velocity over approach-scripted events, grouped by direction × regime
    let class_name = |dir: HitDirection, regime: Regime| {
        format!("{}_{}", dir.as_str(), regime.as_str())
    };
    let mut velocity = Vec::new();
    let mut study = Vec::new();
    for dir in [HitDirection::Up, HitDirection::Down] {
        for regime in [Regime::Bull, Regime::Bear] {
            let events: Vec<&Vec<u32>> = hit_days
                .iter()
                .filter(|(o, rec)| {
                    o.regime == regime && rec.direction == dir && o.approach_durations.is_some()
                })
                .map(|(o, _)| o.approach_durations.as_ref().unwrap())
                .collect();
            if !events.is_empty() {
                let m_count = events[0].len();
                let mut share_sums = vec![0.0f64; m_count];
                for durs in &events {
                    let total: u32 = durs.iter().sum();
                    for (m, &d) in durs.iter().enumerate() {
                        share_sums[m] += d as f64 / total as f64;
                    }
                }
                let n = events.len() as f64;
                velocity.push(ManifestVelocity {
                    class: class_name(dir, regime),
                    event_count: events.len() as u64,
                    velocities: share_sums.iter().map(|&s| n / s).collect(),
                });
            }

            let script_events: Vec<&ScriptEcho> = hit_days
                .iter()
                .filter(|(o, rec)| o.regime == regime && rec.direction == dir && o.script.is_some())
                .map(|(o, _)| o.script.as_ref().unwrap())
                .collect();
            if !script_events.is_empty() {
                let window = script_events[0].prices.len() - 1;
                let n = script_events.len() as f64;
                let mut s_plus_sum = vec![0.0f64; window];
                let mut s_minus_sum = vec![0.0f64; window];
                let mut n_plus = vec![0u64; window];
                let mut n_minus = vec![0u64; window];
                let mut ret = vec![0.0f64; window];
                let mut vol = vec![0.0f64; window];
                let mut spread_sum = vec![0.0f64; window];
                let mut n_spread = vec![0u64; window];
                for ev in &script_events {
                    for k in 1..=window {
                        let r = (ev.prices[k] as f64).ln() - (ev.prices[k - 1] as f64).ln();
                        ret[k - 1] += r;
                        vol[k - 1] += r.abs();
                        let side = if k == window { TradeSide::Same } else { ev.sides[k] };
                        match side {
                            TradeSide::Same => {
                                s_plus_sum[k - 1] += (ev.sizes[k] as f64).ln();
                                n_plus[k - 1] += 1;
                            }
                            TradeSide::Opposite => {
                                s_minus_sum[k - 1] += (ev.sizes[k] as f64).ln();
                                n_minus[k - 1] += 1;
                            }
                            TradeSide::Unknown => {}
                        }
                        if let Some((bid, ask)) = ev.quotes[k] {
                            spread_sum[k - 1] += (ask - bid) as f64 / (0.5 * (ask + bid) as f64);
                            n_spread[k - 1] += 1;
                        }
                    }
                }
                let cond = |sums: &[f64], counts: &[u64]| -> Vec<Option<f64>> {
                    sums.iter()
                        .zip(counts)
                        .map(|(&s, &c)| if c == 0 { None } else { Some(s / c as f64) })
                        .collect()
                };
                let mut s_minus = cond(&s_minus_sum, &n_minus);
                s_minus[window - 1] = Some(0.0);
                study.push(ManifestStudy {
                    class: class_name(dir, regime),
                    window,
                    event_count: script_events.len() as u64,
                    s_plus: cond(&s_plus_sum, &n_plus),
                    s_minus,
                    ret: ret.iter().map(|s| s / n).collect(),
                    vol: vol.iter().map(|s| s / n).collect(),
                    spread: cond(&spread_sum, &n_spread),
                    n_plus,
                    n_minus,
                    n_spread,
                });
            }
        }
    }

    TruthManifest {
        seed,
        levels,
        sessions,
        day_records: hit_days.into_iter().map(|(_, rec)| rec).collect(),
        counters,
        summary,
        intraday: ManifestIntraday { bin_minutes: intraday_bin_minutes, bins },
        velocity,
        event_study: study,
    }
}
