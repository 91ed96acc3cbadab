//! Pre-hit dynamics: the dimensionless price-change velocity profile over
//! the approach band, and last-N-trades event studies of trade sizes,
//! returns, volatility, and the bid-ask spread.
//!
//! Every limit hit is classified into one of four cases (up/down ×
//! bull/bear). Per-event extraction is independent and parallelizable;
//! series accumulation folds per-position partial sums in canonical event
//! order so results are reproducible bit for bit.

use std::fmt;

use crate::aggregation::Regime;
use crate::limit_engine::{HitDirection, LimitPrices};
use crate::market_data::{classify_trade_direction, Cents, Shares, StockDaySession, TradeDirection};

/// Direction × regime cell of the pre-hit analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HitClass {
    pub direction: HitDirection,
    pub regime: Regime,
}

impl HitClass {
    pub const ALL: [HitClass; 4] = [
        HitClass { direction: HitDirection::Up, regime: Regime::Bull },
        HitClass { direction: HitDirection::Up, regime: Regime::Bear },
        HitClass { direction: HitDirection::Down, regime: Regime::Bull },
        HitClass { direction: HitDirection::Down, regime: Regime::Bear },
    ];

    pub fn as_str(&self) -> &'static str {
        match (self.direction, self.regime) {
            (HitDirection::Up, Regime::Bull) => "up_bull",
            (HitDirection::Up, Regime::Bear) => "up_bear",
            (HitDirection::Down, Regime::Bull) => "down_bull",
            (HitDirection::Down, Regime::Bear) => "down_bear",
        }
    }
}

impl fmt::Display for HitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why an event was dropped from one of the pre-hit analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exclusion {
    /// Velocity: the day's first trade already sat at or beyond the first
    /// approach threshold, so the path never traversed the band.
    GapOpen,
    /// Velocity: every threshold was crossed by the same trade.
    ZeroTotalDuration,
    /// Event study: the hit happened in the opening call auction, leaving
    /// no pre-event trade history.
    OpeningHit,
    /// Event study: fewer than window+1 same-day trades up to the hit.
    TooFewTrades,
}

impl Exclusion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Exclusion::GapOpen => "gap_open",
            Exclusion::ZeroTotalDuration => "zero_total_duration",
            Exclusion::OpeningHit => "opening_hit",
            Exclusion::TooFewTrades => "too_few_trades",
        }
    }
}

/// Integer-cent approach thresholds for one direction.
///
/// The band between half the limit fraction and the full fraction is split
/// into `subintervals` equal price steps. The threshold for level
/// `q = f/2 + m·f/(2M)` is the smallest cent price at or beyond it (largest
/// for the down side), clamped to the limit price, and the final boundary
/// is the limit price itself.
pub fn approach_thresholds(
    limits: &LimitPrices,
    direction: HitDirection,
    subintervals: usize,
    limit_bp: i64,
) -> Vec<Cents> {
    let m_count = subintervals as i128;
    let den: i128 = 20_000 * m_count;
    let pc = limits.prev_close as i128;
    let mut out = Vec::with_capacity(subintervals + 1);
    for m in 0..m_count {
        let t = match direction {
            HitDirection::Up => {
                let num = pc * (den + limit_bp as i128 * (m_count + m));
                let t = ((num + den - 1) / den) as Cents; // ceil
                t.min(limits.up_limit)
            }
            HitDirection::Down => {
                let num = pc * (den - limit_bp as i128 * (m_count + m));
                let t = num.div_euclid(den) as Cents; // floor
                t.max(limits.down_limit)
            }
        };
        out.push(t);
    }
    out.push(match direction {
        HitDirection::Up => limits.up_limit,
        HitDirection::Down => limits.down_limit,
    });
    out
}

/// Per-event subinterval traversal times, seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VelocityEvent {
    pub durations: Vec<u32>,
}

/// Extracts one velocity event: first-crossing times of every approach
/// threshold from the day's trade path up to the hit.
///
/// `first_hit_ts` is the start of the day's first at-limit segment in this
/// direction (the final threshold's crossing time by construction).
pub fn velocity_event(
    session: &StockDaySession,
    limits: &LimitPrices,
    direction: HitDirection,
    first_hit_ts: u32,
    subintervals: usize,
    limit_bp: i64,
) -> Result<VelocityEvent, Exclusion> {
    let thresholds = approach_thresholds(limits, direction, subintervals, limit_bp);
    let crossed = |price: Cents, thr: Cents| match direction {
        HitDirection::Up => price >= thr,
        HitDirection::Down => price <= thr,
    };
    let mut crossing_ts: Vec<Option<u32>> = vec![None; thresholds.len()];
    let mut first_trade = true;
    for tick in &session.ticks {
        if !tick.has_trade() || tick.timestamp > first_hit_ts {
            continue;
        }
        if first_trade {
            if crossed(tick.trade_price, thresholds[0]) {
                return Err(Exclusion::GapOpen);
            }
            first_trade = false;
        }
        for (i, &thr) in thresholds.iter().enumerate() {
            if crossing_ts[i].is_none() && crossed(tick.trade_price, thr) {
                crossing_ts[i] = Some(tick.timestamp);
            }
        }
        if crossing_ts[thresholds.len() - 1].is_some() {
            break;
        }
    }
    // the hit itself crosses every remaining threshold
    let times: Vec<u32> = crossing_ts.into_iter().map(|t| t.unwrap_or(first_hit_ts)).collect();
    let durations: Vec<u32> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if durations.iter().all(|&d| d == 0) {
        return Err(Exclusion::ZeroTotalDuration);
    }
    Ok(VelocityEvent { durations })
}

/// Dimensionless velocity per approach subinterval for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub class: HitClass,
    pub event_count: u64,
    /// `V[m] = 1 / mean_i(Δt_im / Σ_m Δt_im)`: reciprocals of the mean
    /// normalized traversal shares, so `Σ_m 1/V[m] = 1`.
    pub velocities: Vec<f64>,
    pub per_event_durations: Vec<Vec<u32>>,
}

/// Aggregates velocity events (already in canonical order) into a profile.
/// Returns `None` when the class has no events.
pub fn velocity_profile(
    class: HitClass,
    events: &[VelocityEvent],
    subintervals: usize,
) -> Option<VelocityProfile> {
    if events.is_empty() {
        return None;
    }
    let mut share_sums = vec![0.0f64; subintervals];
    for ev in events {
        debug_assert_eq!(ev.durations.len(), subintervals);
        let total: u32 = ev.durations.iter().sum();
        let total = total as f64;
        for (m, &d) in ev.durations.iter().enumerate() {
            share_sums[m] += d as f64 / total;
        }
    }
    let n = events.len() as f64;
    let velocities = share_sums.iter().map(|&s| n / s).collect();
    Some(VelocityProfile {
        class,
        event_count: events.len() as u64,
        velocities,
        per_event_durations: events.iter().map(|e| e.durations.clone()).collect(),
    })
}

/// Side of a trade relative to the imminent hit: same-direction trades push
/// the price toward the limit, opposite-direction trades away from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradeSide {
    Same,
    Opposite,
    Unknown,
}

impl TradeSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            TradeSide::Same => "same",
            TradeSide::Opposite => "opposite",
            TradeSide::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<TradeSide> {
        match s {
            "same" => Some(TradeSide::Same),
            "opposite" => Some(TradeSide::Opposite),
            "unknown" => Some(TradeSide::Unknown),
            _ => None,
        }
    }
}

fn map_side(direction: HitDirection, aggressor: TradeDirection) -> TradeSide {
    match (direction, aggressor) {
        (_, TradeDirection::Unknown) => TradeSide::Unknown,
        (HitDirection::Up, TradeDirection::BuyerInitiated) => TradeSide::Same,
        (HitDirection::Up, TradeDirection::SellerInitiated) => TradeSide::Opposite,
        (HitDirection::Down, TradeDirection::SellerInitiated) => TradeSide::Same,
        (HitDirection::Down, TradeDirection::BuyerInitiated) => TradeSide::Opposite,
    }
}

/// The last `window + 1` trades ending at the hit trade, with each trade's
/// aggressor side and the best quotes standing immediately before it.
/// Position `window` is the hit trade; position 0 is the pre-window
/// reference price.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyEvent {
    pub prices: Vec<Cents>,
    pub sizes: Vec<Shares>,
    pub sides: Vec<TradeSide>,
    /// `(bid, ask)` standing before each trade; `None` when either side of
    /// the book was empty. Index 0 is unused.
    pub quotes: Vec<Option<(Cents, Cents)>>,
}

/// Extracts one event-study window.
///
/// The hit trade is the day's first trade at the limit price in the given
/// direction; it is same-direction by definition regardless of what the
/// classifier would say. Opening-auction hits and days with fewer than
/// `window + 1` trades up to the hit are excluded.
pub fn study_event(
    session: &StockDaySession,
    limits: &LimitPrices,
    direction: HitDirection,
    hit_at_open: bool,
    window: usize,
) -> Result<StudyEvent, Exclusion> {
    if hit_at_open {
        return Err(Exclusion::OpeningHit);
    }
    let limit_price = match direction {
        HitDirection::Up => limits.up_limit,
        HitDirection::Down => limits.down_limit,
    };
    struct TradeView {
        price: Cents,
        size: Shares,
        side: TradeSide,
        quotes: Option<(Cents, Cents)>,
    }
    let mut trades: Vec<TradeView> = Vec::new();
    let mut prev_lob: Option<&crate::market_data::LobSnapshot> = None;
    let mut prev_trade: Option<Cents> = None;
    let mut hit_seen = false;
    for tick in &session.ticks {
        if tick.has_trade() {
            let aggressor = classify_trade_direction(tick, prev_lob, prev_trade);
            let quotes = prev_lob.and_then(|l| match (l.best_bid(), l.best_ask()) {
                (Some(b), Some(a)) => Some((b, a)),
                _ => None,
            });
            trades.push(TradeView {
                price: tick.trade_price,
                size: tick.trade_volume,
                side: map_side(direction, aggressor),
                quotes,
            });
            if tick.trade_price == limit_price {
                hit_seen = true;
                break;
            }
            prev_trade = Some(tick.trade_price);
        }
        prev_lob = Some(&tick.lob);
    }
    if !hit_seen || trades.len() < window + 1 {
        return Err(Exclusion::TooFewTrades);
    }
    let tail = &trades[trades.len() - (window + 1)..];
    let mut event = StudyEvent {
        prices: tail.iter().map(|t| t.price).collect(),
        sizes: tail.iter().map(|t| t.size).collect(),
        sides: tail.iter().map(|t| t.side).collect(),
        quotes: tail.iter().map(|t| t.quotes).collect(),
    };
    // the trade that prints at the limit is same-direction by definition
    event.sides[window] = TradeSide::Same;
    event.sides[0] = TradeSide::Unknown;
    event.quotes[0] = None;
    Ok(event)
}

/// Cross-event averages over the last `window` trades before hits of one
/// class. All positions are indexed k = 1..=window, stored at k−1.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStudySeries {
    pub class: HitClass,
    pub window: usize,
    pub event_count: u64,
    /// Mean log size of same-direction trades at k, over events whose k-th
    /// trade is same-direction.
    pub s_plus: Vec<Option<f64>>,
    /// Mean log size of opposite-direction trades at k; fixed to 0 at
    /// k = window by convention (the hit trade is never opposite).
    pub s_minus: Vec<Option<f64>>,
    /// Mean trade-by-trade log return.
    pub ret: Vec<f64>,
    /// Mean absolute trade-by-trade log return.
    pub vol: Vec<f64>,
    /// Mean relative bid-ask spread before the k-th trade, over events with
    /// both best quotes standing.
    pub spread: Vec<Option<f64>>,
    pub n_plus: Vec<u64>,
    pub n_minus: Vec<u64>,
    pub n_spread: Vec<u64>,
}

/// Averages study events (already in canonical order) into per-position
/// series. Returns `None` when the class has no events.
///
/// Unknown-side trades stay out of the size averages but contribute to
/// returns, volatility and spread; events with an empty book side at k
/// drop out of the spread mean only.
pub fn event_study(
    class: HitClass,
    events: &[StudyEvent],
    window: usize,
) -> Option<EventStudySeries> {
    if events.is_empty() {
        return None;
    }
    let n_events = events.len() as f64;
    let mut s_plus_sum = vec![0.0f64; window];
    let mut s_minus_sum = vec![0.0f64; window];
    let mut n_plus = vec![0u64; window];
    let mut n_minus = vec![0u64; window];
    let mut ret_sum = vec![0.0f64; window];
    let mut vol_sum = vec![0.0f64; window];
    let mut spread_sum = vec![0.0f64; window];
    let mut n_spread = vec![0u64; window];
    for ev in events {
        debug_assert_eq!(ev.prices.len(), window + 1);
        for k in 1..=window {
            let i = k - 1;
            let r = (ev.prices[k] as f64).ln() - (ev.prices[k - 1] as f64).ln();
            ret_sum[i] += r;
            vol_sum[i] += r.abs();
            match ev.sides[k] {
                TradeSide::Same => {
                    s_plus_sum[i] += (ev.sizes[k] as f64).ln();
                    n_plus[i] += 1;
                }
                TradeSide::Opposite => {
                    s_minus_sum[i] += (ev.sizes[k] as f64).ln();
                    n_minus[i] += 1;
                }
                TradeSide::Unknown => {}
            }
            if let Some((bid, ask)) = ev.quotes[k] {
                spread_sum[i] += (ask - bid) as f64 / (0.5 * (ask + bid) as f64);
                n_spread[i] += 1;
            }
        }
    }
    let cond_mean = |sums: &[f64], counts: &[u64]| -> Vec<Option<f64>> {
        sums.iter()
            .zip(counts)
            .map(|(&s, &c)| if c == 0 { None } else { Some(s / c as f64) })
            .collect()
    };
    let mut s_minus = cond_mean(&s_minus_sum, &n_minus);
    // the hit trade is same-direction for every event; the opposite-size
    // series is pinned to zero there rather than left undefined
    s_minus[window - 1] = Some(0.0);
    Some(EventStudySeries {
        class,
        window,
        event_count: events.len() as u64,
        s_plus: cond_mean(&s_plus_sum, &n_plus),
        s_minus,
        ret: ret_sum.iter().map(|s| s / n_events).collect(),
        vol: vol_sum.iter().map(|s| s / n_events).collect(),
        spread: cond_mean(&spread_sum, &n_spread),
        n_plus,
        n_minus,
        n_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_engine::compute_limit_prices;
    use crate::market_data::{BookLevel, Date, LobSnapshot, TickRecord};

    /// Builds a session from (ts, price, volume, bid, ask) tuples; the
    /// quotes on each record stand until the next record, so trade k reads
    /// record k−1's book.
    fn session(trades: &[(u32, Cents, Shares, Cents, Cents)]) -> StockDaySession {
        let ticks = trades
            .iter()
            .map(|&(ts, p, v, bid, ask)| TickRecord {
                timestamp: ts,
                trade_price: p,
                trade_volume: v,
                lob: LobSnapshot {
                    asks: vec![BookLevel { price: ask, volume: if ask > 0 { 50 } else { 0 } }],
                    bids: vec![BookLevel { price: bid, volume: if bid > 0 { 50 } else { 0 } }],
                },
            })
            .collect();
        StockDaySession {
            stock_id: "600000".into(),
            date: Date::parse("2006-01-04").unwrap(),
            prev_close: 1000,
            shares_outstanding: 1_000_000,
            is_ipo_day: false,
            is_ex_dividend_day: false,
            next_day_open: None,
            levels: 1,
            ticks,
        }
    }

    #[test]
    fn thresholds_integer_cent_convention() {
        let limits = compute_limit_prices(1000);
        let t = approach_thresholds(&limits, HitDirection::Up, 10, 1000);
        assert_eq!(t[0], 1050);
        assert_eq!(t[1], 1055);
        assert_eq!(t[9], 1095);
        assert_eq!(t[10], 1100);
        let t = approach_thresholds(&limits, HitDirection::Down, 10, 1000);
        assert_eq!(t[0], 950);
        assert_eq!(t[1], 945);
        assert_eq!(t[10], 900);
        // rounding never puts a threshold past the limit
        let limits = compute_limit_prices(994);
        let t = approach_thresholds(&limits, HitDirection::Up, 10, 1000);
        assert!(t.iter().all(|&x| x <= limits.up_limit));
        assert_eq!(t[10], limits.up_limit);
    }

    #[test]
    fn velocity_event_scripted_crossings() {
        let limits = compute_limit_prices(1000);
        // cross threshold m at time 36000 + m*10, hit at 36100
        let mut trades = vec![(35000, 1000, 100, 999, 1001)];
        for m in 0..10u32 {
            let price = 1050 + 5 * m as i64;
            trades.push((36000 + m * 10, price, 100, price - 1, price + 1));
        }
        trades.push((36100, 1100, 100, 1099, 1100));
        let s = session(&trades);
        let ev = velocity_event(&s, &limits, HitDirection::Up, 36100, 10, 1000).unwrap();
        assert_eq!(ev.durations, vec![10; 10]);
    }

    #[test]
    fn velocity_event_down_direction() {
        let limits = compute_limit_prices(1000); // down limit 900, thresholds 950, 945, ...
        let mut trades = vec![(35000, 1000, 100, 999, 1001)];
        for m in 0..10u32 {
            let price = 950 - 5 * m as i64;
            trades.push((36000 + m * 20, price, 100, price - 1, price + 1));
        }
        trades.push((36200, 900, 100, 900, 901));
        let s = session(&trades);
        let ev = velocity_event(&s, &limits, HitDirection::Down, 36200, 10, 1000).unwrap();
        assert_eq!(ev.durations, vec![20; 10]);
    }

    #[test]
    fn velocity_gap_open_and_zero_duration_excluded() {
        let limits = compute_limit_prices(1000);
        // first trade already at 6%
        let s = session(&[(36000, 1060, 100, 1059, 1061), (36100, 1100, 100, 1099, 1100)]);
        assert_eq!(
            velocity_event(&s, &limits, HitDirection::Up, 36100, 10, 1000),
            Err(Exclusion::GapOpen)
        );
        // single jump from below the band to the limit
        let s = session(&[(36000, 1000, 100, 999, 1001), (36100, 1100, 100, 1099, 1100)]);
        assert_eq!(
            velocity_event(&s, &limits, HitDirection::Up, 36100, 10, 1000),
            Err(Exclusion::ZeroTotalDuration)
        );
    }

    #[test]
    fn uniform_durations_give_constant_velocity() {
        let events: Vec<VelocityEvent> =
            (1..=7u32).map(|i| VelocityEvent { durations: vec![30 * i; 10] }).collect();
        let p = velocity_profile(HitClass::ALL[0], &events, 10).unwrap();
        assert_eq!(p.event_count, 7);
        for &v in &p.velocities {
            assert!((v - 10.0).abs() < 1e-12, "v={v}");
        }
        let recip: f64 = p.velocities.iter().map(|v| 1.0 / v).sum();
        assert!((recip - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arithmetic_durations_match_direct_evaluation() {
        // single event with durations m+1 seconds, total 55
        let ev = VelocityEvent { durations: (1..=10).collect() };
        let p = velocity_profile(HitClass::ALL[1], &[ev], 10).unwrap();
        assert!((p.velocities[0] - 55.0).abs() < 55.0 * 1e-12);
        assert!((p.velocities[9] - 5.5).abs() < 5.5 * 1e-12);
        let recip: f64 = p.velocities.iter().map(|v| 1.0 / v).sum();
        assert!((recip - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_events_no_profile() {
        assert!(velocity_profile(HitClass::ALL[0], &[], 10).is_none());
        assert!(event_study(HitClass::ALL[0], &[], 100).is_none());
    }

    #[test]
    fn event_order_does_not_change_the_means() {
        let mut events: Vec<StudyEvent> = (0..5)
            .map(|i| {
                let mut ev = study_fixture(20);
                ev.sizes[7] = 100 + 37 * i;
                ev.prices[3] = 1040 + i;
                ev
            })
            .collect();
        let forward = event_study(HitClass::ALL[0], &events, 20).unwrap();
        events.reverse();
        let reversed = event_study(HitClass::ALL[0], &events, 20).unwrap();
        for k in 0..20 {
            assert!((forward.ret[k] - reversed.ret[k]).abs() < 1e-12);
            assert!((forward.vol[k] - reversed.vol[k]).abs() < 1e-12);
            match (forward.s_plus[k], reversed.s_plus[k]) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (a, b) => assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }

    fn study_fixture(window: usize) -> StudyEvent {
        // constant interior price, hit at the limit on the last trade
        let mut prices = vec![1050; window + 1];
        prices[window] = 1100;
        StudyEvent {
            prices,
            sizes: vec![100; window + 1],
            sides: {
                let mut s = vec![TradeSide::Same; window + 1];
                s[0] = TradeSide::Unknown;
                s
            },
            quotes: {
                let mut q = vec![Some((998, 1000)); window + 1];
                q[0] = None;
                q
            },
        }
    }

    #[test]
    fn constant_prices_zero_return_and_volatility() {
        let mut ev = study_fixture(100);
        ev.prices = vec![1050; 101];
        let s = event_study(HitClass::ALL[0], &[ev], 100).unwrap();
        assert!(s.ret.iter().all(|&r| r == 0.0));
        assert!(s.vol.iter().all(|&v| v == 0.0));
        assert_eq!(s.s_minus[99], Some(0.0));
    }

    #[test]
    fn two_event_hand_computed_values() {
        let mut a = study_fixture(100);
        let mut b = study_fixture(100);
        a.sizes[50] = 100;
        b.sizes[50] = 800;
        // one opposite trade and one unknown at k = 30
        a.sides[30] = TradeSide::Opposite;
        a.sizes[30] = 400;
        b.sides[30] = TradeSide::Unknown;
        // a missing book side at k = 70 in one event
        b.quotes[70] = None;
        let s = event_study(HitClass::ALL[0], &[a, b], 100).unwrap();
        assert_eq!(s.event_count, 2);
        let expect_s50 = 0.5 * ((100.0f64).ln() + (800.0f64).ln());
        assert!((s.s_plus[49].unwrap() - expect_s50).abs() < 1e-12);
        assert_eq!(s.n_plus[49], 2);
        // k = 30: one opposite (counted in s_minus), one unknown (dropped)
        assert_eq!(s.n_minus[29], 1);
        assert!((s.s_minus[29].unwrap() - (400.0f64).ln()).abs() < 1e-12);
        assert_eq!(s.n_plus[29], 0);
        assert!(s.s_plus[29].is_none());
        // spread 2/999 where both quotes stand
        assert!((s.spread[49].unwrap() - 2.0 / 999.0).abs() < 1e-15);
        assert_eq!(s.n_spread[69], 1);
        // return at the hit trade: ln(1100/1050) in both events
        let hit_ret = (1100.0f64).ln() - (1050.0f64).ln();
        assert!((s.ret[99] - hit_ret).abs() < 1e-12);
        // telescoping: Σ_k R(k)·N = Σ_i (ln p_i(w) − ln p_i(0))
        let total: f64 = s.ret.iter().sum::<f64>() * 2.0;
        let expect = 2.0 * ((1100.0f64).ln() - (1050.0f64).ln());
        assert!((total - expect).abs() < 1e-9);
    }

    #[test]
    fn study_event_extraction_window_and_sides() {
        let limits = compute_limit_prices(1000);
        let trades = vec![
            (36000, 1010, 10, 1009, 1011),
            (36005, 1020, 20, 1019, 1021),
            (36010, 1030, 30, 1029, 1031),
            (36015, 1020, 40, 1019, 1021), // sells into the standing bid
            (36020, 1040, 50, 1039, 1041),
            (36025, 1100, 60, 1099, 1100),
        ];
        let s = session(&trades);
        let ev = study_event(&s, &limits, HitDirection::Up, false, 4).unwrap();
        assert_eq!(ev.prices, vec![1020, 1030, 1020, 1040, 1100]);
        assert_eq!(ev.sizes, vec![20, 30, 40, 50, 60]);
        // 1030 lifted the standing ask 1021: buyer, same direction
        assert_eq!(ev.sides[1], TradeSide::Same);
        // 1020 hit the standing bid 1029: seller, opposite direction
        assert_eq!(ev.sides[2], TradeSide::Opposite);
        assert_eq!(ev.sides[4], TradeSide::Same);
        assert_eq!(ev.quotes[1], Some((1019, 1021)));
        assert_eq!(
            study_event(&s, &limits, HitDirection::Up, false, 100),
            Err(Exclusion::TooFewTrades)
        );
        assert_eq!(
            study_event(&s, &limits, HitDirection::Up, true, 4),
            Err(Exclusion::OpeningHit)
        );
    }
}
