//! Daily limit prices, at-limit interval segmentation, and next-day
//! continuation/reversal classification.
//!
//! The up/down limits for a day are the previous close scaled by ±10% and
//! rounded to the cent tick, half away from zero. A hit segment starts at
//! the first record whose trade price equals a limit and runs until the
//! first later record whose (carried-forward) trade price is strictly
//! inside the limits; a segment still open at the close runs to 15:00:00.
//! Durations and spans are plain timestamp differences in seconds.

use std::fmt;

use crate::market_data::{format_time_seconds, Cents, Date, SessionWindows, StockDaySession};

/// Basis points of allowed daily movement for common A-shares.
pub const DEFAULT_LIMIT_BP: i64 = 1000;

/// The day's price band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimitPrices {
    pub up_limit: Cents,
    pub down_limit: Cents,
    pub prev_close: Cents,
}

/// Limit prices for the ±10% rule: `round_half_up(prev_close * (1 ± 0.10))`
/// in integer cents.
pub fn compute_limit_prices(prev_close: Cents) -> LimitPrices {
    compute_limit_prices_bp(prev_close, DEFAULT_LIMIT_BP)
}

/// Limit prices for an arbitrary band of `limit_bp` basis points.
///
/// Exact integer arithmetic: `up = ⌊(prev_close·(10000+bp) + 5000) / 10000⌋`
/// and symmetrically for the down limit. All quantities are positive, so
/// half-away-from-zero rounding is half-up.
pub fn compute_limit_prices_bp(prev_close: Cents, limit_bp: i64) -> LimitPrices {
    assert!(prev_close > 0, "prev_close must be positive");
    assert!((1..10_000).contains(&limit_bp), "limit_bp must be in (0, 10000)");
    let up_limit = (prev_close * (10_000 + limit_bp) + 5_000) / 10_000;
    let down_limit = (prev_close * (10_000 - limit_bp) + 5_000) / 10_000;
    LimitPrices { up_limit, down_limit, prev_close }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitDirection {
    Up,
    Down,
}

impl HitDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            HitDirection::Up => "up",
            HitDirection::Down => "down",
        }
    }

    pub fn parse(s: &str) -> Option<HitDirection> {
        match s {
            "up" => Some(HitDirection::Up),
            "down" => Some(HitDirection::Down),
            _ => None,
        }
    }
}

impl fmt::Display for HitDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A maximal contiguous at-limit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HitSegment {
    pub direction: HitDirection,
    /// Seconds since midnight of the opening at-limit trade.
    pub start_time: u32,
    /// Seconds until the first strictly-inside record, or until the close.
    pub duration: u32,
    /// True iff `start_time + duration` is the session close.
    pub ends_at_close: bool,
}

/// Session window a hit time falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitWindow {
    Open,
    Am,
    Pm,
}

impl HitWindow {
    pub fn as_str(&self) -> &'static str {
        match self {
            HitWindow::Open => "open",
            HitWindow::Am => "am",
            HitWindow::Pm => "pm",
        }
    }

    pub fn parse(s: &str) -> Option<HitWindow> {
        match s {
            "open" => Some(HitWindow::Open),
            "am" => Some(HitWindow::Am),
            "pm" => Some(HitWindow::Pm),
            _ => None,
        }
    }
}

/// Relation of the next day's open to the hit day's close.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NextDayClass {
    Continuation,
    Reversal,
    Flat,
    Unavailable,
}

impl NextDayClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NextDayClass::Continuation => "continuation",
            NextDayClass::Reversal => "reversal",
            NextDayClass::Flat => "flat",
            NextDayClass::Unavailable => "unavailable",
        }
    }

    pub fn parse(s: &str) -> Option<NextDayClass> {
        match s {
            "continuation" => Some(NextDayClass::Continuation),
            "reversal" => Some(NextDayClass::Reversal),
            "flat" => Some(NextDayClass::Flat),
            "unavailable" => Some(NextDayClass::Unavailable),
            _ => None,
        }
    }
}

/// Everything the aggregation layer needs to know about one limit-hitting
/// day of one stock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayHitRecord {
    pub stock_id: String,
    pub date: Date,
    /// Direction of the day's first hit; the day is attributed to this
    /// direction when both limits were touched.
    pub direction: HitDirection,
    pub segments_up: Vec<HitSegment>,
    pub segments_down: Vec<HitSegment>,
    pub first_hit_window: HitWindow,
    /// Last trade of the day printed at a limit price.
    pub closed_at_limit: bool,
    pub close_direction: Option<HitDirection>,
    pub next_day_class: NextDayClass,
}

impl DayHitRecord {
    pub fn m_up(&self) -> u32 {
        self.segments_up.len() as u32
    }

    pub fn m_down(&self) -> u32 {
        self.segments_down.len() as u32
    }

    /// Sum of segment durations for one direction, seconds.
    pub fn total_duration(&self, dir: HitDirection) -> u32 {
        self.segments(dir).iter().map(|s| s.duration).sum()
    }

    /// First-hit-start to last-segment-end, seconds; 0 when the direction
    /// never hit.
    pub fn span(&self, dir: HitDirection) -> u32 {
        let segs = self.segments(dir);
        match (segs.first(), segs.last()) {
            (Some(first), Some(last)) => last.start_time + last.duration - first.start_time,
            _ => 0,
        }
    }

    pub fn segments(&self, dir: HitDirection) -> &[HitSegment] {
        match dir {
            HitDirection::Up => &self.segments_up,
            HitDirection::Down => &self.segments_down,
        }
    }

    /// Start of the day's first segment in the given direction.
    pub fn first_hit_time(&self, dir: HitDirection) -> Option<u32> {
        self.segments(dir).first().map(|s| s.start_time)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentError {
    TimestampOutsideSession { timestamp: u32 },
    HitDuringLunchHalt { timestamp: u32 },
}

impl fmt::Display for SegmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentError::TimestampOutsideSession { timestamp } => {
                write!(f, "tick at {} outside session windows", format_time_seconds(*timestamp))
            }
            SegmentError::HitDuringLunchHalt { timestamp } => {
                write!(f, "limit hit at {} inside the lunch halt", format_time_seconds(*timestamp))
            }
        }
    }
}

impl std::error::Error for SegmentError {}

/// Detects and segments at-limit intervals for one session.
///
/// Quote-only records inherit the last trade price for at-limit testing;
/// segments open only on actual trades at a limit. Returns `Ok(None)` when
/// neither limit was touched. The caller is responsible for filtering out
/// IPO and ex-dividend sessions.
pub fn segment_hits(
    session: &StockDaySession,
    limits: &LimitPrices,
    windows: &SessionWindows,
) -> Result<Option<DayHitRecord>, SegmentError> {
    let mut segments_up: Vec<HitSegment> = Vec::new();
    let mut segments_down: Vec<HitSegment> = Vec::new();
    let mut open: Option<(HitDirection, u32)> = None;
    let mut last_trade: Option<Cents> = None;

    let close_segment =
        |dir: HitDirection, start: u32, end: u32, segs_up: &mut Vec<HitSegment>, segs_down: &mut Vec<HitSegment>| {
            let seg = HitSegment {
                direction: dir,
                start_time: start,
                duration: end - start,
                ends_at_close: end == windows.close,
            };
            match dir {
                HitDirection::Up => segs_up.push(seg),
                HitDirection::Down => segs_down.push(seg),
            }
        };

    for tick in &session.ticks {
        let ts = tick.timestamp;
        if ts < windows.session_start || ts > windows.close {
            return Err(SegmentError::TimestampOutsideSession { timestamp: ts });
        }
        if tick.has_trade() {
            last_trade = Some(tick.trade_price);
        }
        let Some(price) = last_trade else { continue };
        let at_limit = if price == limits.up_limit {
            Some(HitDirection::Up)
        } else if price == limits.down_limit {
            Some(HitDirection::Down)
        } else {
            None
        };
        match open {
            None => {
                if let Some(dir) = at_limit {
                    if tick.has_trade() {
                        open = Some((dir, ts));
                    }
                }
            }
            Some((dir, start)) => {
                let strictly_inside = price > limits.down_limit && price < limits.up_limit;
                if strictly_inside {
                    close_segment(dir, start, ts, &mut segments_up, &mut segments_down);
                    open = None;
                } else if let Some(new_dir) = at_limit {
                    if new_dir != dir {
                        // price jumped from one limit to the other with no
                        // interior record in between
                        close_segment(dir, start, ts, &mut segments_up, &mut segments_down);
                        open = Some((new_dir, ts));
                    }
                }
            }
        }
    }
    if let Some((dir, start)) = open {
        close_segment(dir, start, windows.close, &mut segments_up, &mut segments_down);
    }

    if segments_up.is_empty() && segments_down.is_empty() {
        return Ok(None);
    }

    for seg in segments_up.iter().chain(segments_down.iter()) {
        if windows.in_lunch_halt(seg.start_time) {
            return Err(SegmentError::HitDuringLunchHalt { timestamp: seg.start_time });
        }
    }

    let first_up = segments_up.first().map(|s| s.start_time);
    let first_down = segments_down.first().map(|s| s.start_time);
    let (direction, first_ts) = match (first_up, first_down) {
        (Some(u), Some(d)) if d < u => (HitDirection::Down, d),
        (Some(u), _) => (HitDirection::Up, u),
        (None, Some(d)) => (HitDirection::Down, d),
        (None, None) => unreachable!(),
    };

    let first_hit_window = if first_ts <= windows.open_end {
        HitWindow::Open
    } else if first_ts <= windows.am_end {
        HitWindow::Am
    } else if first_ts >= windows.pm_start {
        HitWindow::Pm
    } else {
        return Err(SegmentError::HitDuringLunchHalt { timestamp: first_ts });
    };

    let close_price = last_trade.expect("a segment implies at least one trade");
    let close_direction = if close_price == limits.up_limit {
        Some(HitDirection::Up)
    } else if close_price == limits.down_limit {
        Some(HitDirection::Down)
    } else {
        None
    };

    let next_day_class = classify_next_day(direction, close_price, session.next_day_open);

    Ok(Some(DayHitRecord {
        stock_id: session.stock_id.clone(),
        date: session.date,
        direction,
        segments_up,
        segments_down,
        first_hit_window,
        closed_at_limit: close_direction.is_some(),
        close_direction,
        next_day_class,
    }))
}

/// Classifies the next trading day's open relative to the hit day's close.
///
/// For an up-limit day a higher open continues the move and a lower open
/// reverses it; mirrored for down-limit days. Equality is flat and counts
/// in neither bucket. A missing next-day open (trading halt, end of
/// sample) is unavailable.
pub fn classify_next_day(
    direction: HitDirection,
    today_close: Cents,
    next_day_open: Option<Cents>,
) -> NextDayClass {
    let Some(open) = next_day_open else {
        return NextDayClass::Unavailable;
    };
    let up_move = open > today_close;
    let down_move = open < today_close;
    match direction {
        HitDirection::Up if up_move => NextDayClass::Continuation,
        HitDirection::Up if down_move => NextDayClass::Reversal,
        HitDirection::Down if down_move => NextDayClass::Continuation,
        HitDirection::Down if up_move => NextDayClass::Reversal,
        _ => NextDayClass::Flat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{BookLevel, LobSnapshot, TickRecord};

    fn session_with_prices(prices: &[(u32, Cents)]) -> StockDaySession {
        let ticks = prices
            .iter()
            .map(|&(ts, p)| TickRecord {
                timestamp: ts,
                trade_price: p,
                trade_volume: if p > 0 { 100 } else { 0 },
                lob: LobSnapshot {
                    asks: vec![BookLevel { price: if p > 0 { p } else { 0 }, volume: if p > 0 { 10 } else { 0 } }],
                    bids: vec![],
                },
            })
            .collect();
        StockDaySession {
            stock_id: "600000".to_string(),
            date: Date::parse("2006-01-04").unwrap(),
            prev_close: 1000,
            shares_outstanding: 1_000_000,
            is_ipo_day: false,
            is_ex_dividend_day: false,
            next_day_open: None,
            levels: 3,
            ticks,
        }
    }

    #[test]
    fn rounding_golden_values() {
        // exact 10%
        let l = compute_limit_prices(1000);
        assert_eq!((l.up_limit, l.down_limit), (1100, 900));
        // hand integer arithmetic
        let l = compute_limit_prices(777);
        assert_eq!((l.up_limit, l.down_limit), (855, 699));
        // exact half rounds up
        let l = compute_limit_prices(995);
        assert_eq!((l.up_limit, l.down_limit), (1095, 896));
        // degenerate one-cent stock: both limits round back to the close
        let l = compute_limit_prices(1);
        assert_eq!((l.up_limit, l.down_limit), (1, 1));
        let l = compute_limit_prices(999_999);
        assert_eq!((l.up_limit, l.down_limit), (1_099_999, 899_999));
    }

    #[test]
    fn band_property_holds_above_five_cents() {
        for pc in 6..5000 {
            let l = compute_limit_prices(pc);
            assert!(l.down_limit < pc && pc < l.up_limit, "pc={pc}");
            assert!(l.down_limit > 0);
        }
    }

    #[test]
    fn two_segments_second_held_to_close() {
        // up limit 1100, 5 s spacing: 1090, 1100, 1100, 1099, then 1100 to the close
        let mut prices = vec![(36000, 1090), (36005, 1100), (36010, 1100), (36015, 1099)];
        let mut ts = 36020;
        while ts <= 41400 {
            prices.push((ts, 1100));
            ts += 5;
        }
        let mut ts = 46800;
        while ts <= 54000 {
            prices.push((ts, 1100));
            ts += 5;
        }
        let session = session_with_prices(&prices);
        let limits = compute_limit_prices(1000);
        let rec = segment_hits(&session, &limits, &SessionWindows::default())
            .unwrap()
            .unwrap();
        assert_eq!(rec.m_up(), 2);
        assert_eq!(rec.segments_up[0].duration, 10);
        assert!(!rec.segments_up[0].ends_at_close);
        assert!(rec.segments_up[1].ends_at_close);
        assert_eq!(rec.segments_up[1].start_time, 36020);
        assert_eq!(rec.segments_up[1].duration, 54000 - 36020);
        assert!(rec.closed_at_limit);
        assert_eq!(rec.close_direction, Some(HitDirection::Up));
        assert_eq!(rec.direction, HitDirection::Up);
        assert_eq!(rec.first_hit_window, HitWindow::Am);
        assert_eq!(rec.total_duration(HitDirection::Up), 10 + (54000 - 36020));
        assert_eq!(rec.span(HitDirection::Up), 54000 - 36005);
    }

    #[test]
    fn no_hit_returns_none() {
        let session = session_with_prices(&[(36000, 1050), (36005, 1060)]);
        let limits = compute_limit_prices(1000);
        assert_eq!(segment_hits(&session, &limits, &SessionWindows::default()).unwrap(), None);
    }

    #[test]
    fn call_auction_hit_held_to_close() {
        // single hit at 09:25:00 held to the close: open window, span == duration
        let session = session_with_prices(&[(33900, 1100)]);
        let limits = compute_limit_prices(1000);
        let rec = segment_hits(&session, &limits, &SessionWindows::default())
            .unwrap()
            .unwrap();
        assert_eq!(rec.first_hit_window, HitWindow::Open);
        assert_eq!(rec.m_up(), 1);
        assert_eq!(rec.total_duration(HitDirection::Up), 54000 - 33900);
        assert_eq!(rec.span(HitDirection::Up), rec.total_duration(HitDirection::Up));
        assert!(rec.closed_at_limit);
    }

    #[test]
    fn quote_only_records_carry_last_trade() {
        // trade at limit, then quote-only records, then interior trade
        let session = session_with_prices(&[
            (36000, 1090),
            (36005, 1100),
            (36010, 0),
            (36015, 0),
            (36020, 1099),
        ]);
        let limits = compute_limit_prices(1000);
        let rec = segment_hits(&session, &limits, &SessionWindows::default())
            .unwrap()
            .unwrap();
        assert_eq!(rec.m_up(), 1);
        assert_eq!(rec.segments_up[0].duration, 15);
        assert!(!rec.closed_at_limit);
        assert_eq!(rec.next_day_class, NextDayClass::Unavailable);
    }

    #[test]
    fn down_first_when_both_directions_hit() {
        let session = session_with_prices(&[
            (36000, 950),
            (36005, 900),
            (36010, 950),
            (47000, 1100),
            (47005, 1050),
        ]);
        let limits = compute_limit_prices(1000);
        let rec = segment_hits(&session, &limits, &SessionWindows::default())
            .unwrap()
            .unwrap();
        assert_eq!(rec.direction, HitDirection::Down);
        assert_eq!(rec.m_up(), 1);
        assert_eq!(rec.m_down(), 1);
        assert_eq!(rec.first_hit_window, HitWindow::Am);
        assert!(!rec.closed_at_limit);
    }

    #[test]
    fn lunch_hit_is_an_error() {
        let session = session_with_prices(&[(36000, 1050), (42000, 1100)]);
        let limits = compute_limit_prices(1000);
        assert_eq!(
            segment_hits(&session, &limits, &SessionWindows::default()),
            Err(SegmentError::HitDuringLunchHalt { timestamp: 42000 })
        );
    }

    #[test]
    fn next_day_classification() {
        assert_eq!(
            classify_next_day(HitDirection::Up, 1100, Some(1122)),
            NextDayClass::Continuation
        );
        assert_eq!(
            classify_next_day(HitDirection::Up, 1100, Some(1080)),
            NextDayClass::Reversal
        );
        assert_eq!(classify_next_day(HitDirection::Down, 900, Some(900)), NextDayClass::Flat);
        assert_eq!(
            classify_next_day(HitDirection::Down, 900, Some(890)),
            NextDayClass::Continuation
        );
        assert_eq!(
            classify_next_day(HitDirection::Down, 900, Some(950)),
            NextDayClass::Reversal
        );
        assert_eq!(classify_next_day(HitDirection::Up, 1100, None), NextDayClass::Unavailable);
    }

    #[test]
    fn segments_disjoint_and_sum_matches_total() {
        // sweep a scripted multi-segment day and check the invariants
        let mut prices = vec![(34200, 1050)];
        let mut ts = 34205;
        for block in 0..5u32 {
            let start = 36000 + block * 600;
            while ts < start {
                prices.push((ts, 1080));
                ts += 5;
            }
            while ts < start + 120 {
                prices.push((ts, 1100));
                ts += 5;
            }
            prices.push((ts, 1095));
            ts += 5;
        }
        let session = session_with_prices(&prices);
        let limits = compute_limit_prices(1000);
        let rec = segment_hits(&session, &limits, &SessionWindows::default())
            .unwrap()
            .unwrap();
        assert_eq!(rec.m_up(), 5);
        let mut prev_end = 0;
        for seg in &rec.segments_up {
            assert!(seg.start_time >= prev_end);
            assert!(seg.duration > 0);
            prev_end = seg.start_time + seg.duration;
        }
        let total: u32 = rec.segments_up.iter().map(|s| s.duration).sum();
        assert_eq!(rec.total_duration(HitDirection::Up), total);
        assert!(rec.span(HitDirection::Up) >= total);
    }
}
