//! Bundled scenario builder: a corpus that exercises every feature of the
//! hit pipeline (all hit windows, both directions, multi-segment days,
//! held-to-close days, every next-day relation including halts, same-day
//! dual-limit days, flagged IPO/ex-dividend days, velocity approaches).
//! Used for demos, benchmarks and oracle verification runs.
//!
//! Trade scripts are not planted here: scripted trades carry absolute
//! prices, which requires a deterministic previous close (in practice the
//! stock's first sample day), while this corpus lets closes evolve freely.

use crate::aggregation::RegimeCalendar;
use crate::limit_engine::HitDirection;
use crate::market_data::Date;
use crate::rng::SplitMix64;

use super::generator::{AM_END, AM_START, AUCTION_TS, CLOSE, PM_START};
use super::scenario::{
    ApproachScript, DateSpec, DayPlanSpec, DirectionPlan, HitPlan, OpenRelation, PlanKind,
    PlannedSegment, ScenarioSpec, StockSpec,
};

/// Builds the demo scenario with roughly 4.5% of stock-days carrying a
/// planted hit. Dates run forward from 2007-08-01 so both bull and bear
/// regimes of the bundled calendar appear; regime labels are taken from
/// that calendar, keeping the manifest comparable with analysis output.
pub fn demo_scenario(stocks: usize, days: usize, seed: u64) -> ScenarioSpec {
    let calendar = RegimeCalendar::cn_a_share_default();
    let mut dates = Vec::with_capacity(days);
    let mut d = Date::parse("2007-08-01").unwrap();
    for _ in 0..days {
        dates.push(DateSpec { date: d, regime: calendar.regime_for(d).unwrap() });
        d = d.next_day();
    }

    let stock_specs: Vec<StockSpec> = (0..stocks)
        .map(|i| StockSpec {
            stock_id: format!("{:06}", 600_000 + i),
            shares_outstanding: 1_000_000 * (1 + (i as i64 * 7) % 40),
            initial_prev_close: 600 + 90 * (i as i64 % 37),
        })
        .collect();

    let mut plans = Vec::new();
    let mut rng = SplitMix64::new(seed);
    for (i, stock) in stock_specs.iter().enumerate() {
        let mut skip_next = false; // day consumed by a halt
        let mut prev_planted = false;
        let mut next_dir = if i % 2 == 0 { HitDirection::Up } else { HitDirection::Down };
        for (di, dspec) in dates.iter().enumerate() {
            if skip_next {
                skip_next = false;
                prev_planted = false;
                continue;
            }
            let last_day = di + 1 == dates.len();
            if rng.next_below(22) != 0 {
                // sprinkle a few flagged quiet days for the exclusion path
                if rng.next_below(200) == 0 {
                    plans.push(DayPlanSpec {
                        stock_id: stock.stock_id.clone(),
                        date: dspec.date,
                        is_ipo_day: di == 0,
                        is_ex_dividend_day: di != 0,
                        plan: PlanKind::NoHit,
                    });
                }
                prev_planted = false;
                continue;
            }
            // plant a hit; alternate direction per stock to keep the price
            // from drifting out of range
            let direction = next_dir;
            next_dir = match next_dir {
                HitDirection::Up => HitDirection::Down,
                HitDirection::Down => HitDirection::Up,
            };
            // the day after a relation-carrying hit must not open at the
            // limit, so suppress opening-auction hits there
            let window = if prev_planted { 1 + rng.next_below(2) } else { rng.next_below(3) };
            let closed_at_limit = rng.next_below(2) == 0;
            let relation = if last_day || rng.next_below(8) == 0 {
                OpenRelation::Halt
            } else {
                match rng.next_below(3) {
                    0 => OpenRelation::Higher,
                    1 => OpenRelation::Lower,
                    _ => OpenRelation::Equal,
                }
            };
            let variant = rng.next_below(12);
            let mut approach = None;
            let hits;
            match variant {
                // velocity approach gliding into a single mid-session hit
                1 if window > 0 => {
                    let durations: Vec<u32> =
                        (0..10).map(|m| 20 + 10 * m + rng.next_below(30) as u32).collect();
                    let total: u32 = durations.iter().sum();
                    let start = if window == 1 {
                        AM_START + total + 60 + 5 * rng.next_below(100) as u32
                    } else {
                        PM_START + total + 60 + 5 * rng.next_below(100) as u32
                    };
                    let mut segments = vec![PlannedSegment { start, duration: 300 }];
                    if closed_at_limit {
                        let s = (start + 600).max(PM_START + 3600);
                        segments.push(PlannedSegment { start: s, duration: CLOSE - s });
                    }
                    approach = Some(ApproachScript { subinterval_seconds: durations });
                    hits = vec![DirectionPlan { direction, segments }];
                }
                // same-day dual-limit day: planned direction in the
                // morning, the other side in the afternoon
                0 if window == 1 => {
                    let other = match direction {
                        HitDirection::Up => HitDirection::Down,
                        HitDirection::Down => HitDirection::Up,
                    };
                    let start = 35_000 + 5 * rng.next_below(400) as u32;
                    hits = vec![
                        DirectionPlan {
                            direction,
                            segments: vec![PlannedSegment { start, duration: 240 }],
                        },
                        DirectionPlan {
                            direction: other,
                            segments: vec![PlannedSegment { start: 48_600, duration: 120 }],
                        },
                    ];
                }
                _ => {
                    let segments = plant_segments(&mut rng, window, closed_at_limit);
                    hits = vec![DirectionPlan { direction, segments }];
                }
            }
            let flagged = rng.next_below(40) == 0;
            plans.push(DayPlanSpec {
                stock_id: stock.stock_id.clone(),
                date: dspec.date,
                is_ipo_day: flagged && di == 0,
                is_ex_dividend_day: flagged && di != 0,
                plan: PlanKind::Hit(HitPlan {
                    hits,
                    next_day_open_relation: relation,
                    approach,
                    trade_script: None,
                }),
            });
            skip_next = relation == OpenRelation::Halt && !last_day;
            prev_planted = relation != OpenRelation::Halt;
        }
    }

    ScenarioSpec {
        seed: seed ^ 0x5EED_5EED,
        levels: 5,
        tick_seconds: 5,
        no_hit_tick_seconds: Some(120),
        stocks: stock_specs,
        dates,
        plans,
    }
}

/// One to three disjoint segments whose first hit falls in the requested
/// window class (0 = opening auction, 1 = morning, 2 = afternoon).
fn plant_segments(rng: &mut SplitMix64, window: u64, closed_at_limit: bool) -> Vec<PlannedSegment> {
    let mut segments = Vec::new();
    match window {
        0 => {
            // the opening-auction print itself is the hit
            let duration = 300 + 5 * rng.next_below(120) as u32;
            segments.push(PlannedSegment { start: AUCTION_TS, duration });
        }
        1 => {
            let start = 35_000 + 5 * rng.next_below(400) as u32;
            let duration = 120 + 5 * rng.next_below(100) as u32;
            segments.push(PlannedSegment { start, duration });
        }
        _ => {
            let start = PM_START + 600 + 5 * rng.next_below(400) as u32;
            let duration = 120 + 5 * rng.next_below(100) as u32;
            segments.push(PlannedSegment { start, duration });
        }
    }
    // maybe a follow-up segment in the same continuous session
    for _ in 0..rng.next_below(2) {
        let prev_end = segments.last().unwrap().end();
        let start = prev_end.max(AM_START) + 60 + 5 * rng.next_below(40) as u32;
        let fits_am = start + 120 <= AM_END;
        let fits_pm = start >= PM_START && start + 120 <= CLOSE - 600;
        if fits_am || fits_pm {
            let duration = 60 + 5 * rng.next_below(10) as u32;
            segments.push(PlannedSegment { start, duration });
        }
    }
    if closed_at_limit {
        let prev_end = segments.last().unwrap().end();
        let start = (prev_end + 300).max(PM_START + 3600);
        if start < CLOSE {
            segments.push(PlannedSegment { start, duration: CLOSE - start });
        }
    }
    segments
}
