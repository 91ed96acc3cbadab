//! Deterministic corpus generation: turns a [`ScenarioSpec`] into tick and
//! sidecar CSV files in the canonical ingestion format plus the
//! [`TruthManifest`] describing what every analysis stage must find.
//!
//! Output is byte-deterministic for a given spec: per-stock-day SplitMix64
//! streams are derived from the master seed by (stock, date) index, so
//! generation order never matters. Planted features appear exactly as
//! scripted; random-walk filler stays in a ±3% band around the previous
//! close, strictly inside the limit prices and below the velocity approach
//! band.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::limit_engine::{compute_limit_prices, HitDirection, LimitPrices, DEFAULT_LIMIT_BP};
use crate::market_data::{
    tick_header, BookLevel, Cents, Date, LobSnapshot, Shares, TickRecord, SIDECAR_HEADER,
};
use crate::prehit::{approach_thresholds, TradeSide};
use crate::rng::{derive_seed, SplitMix64};

use super::manifest::{build_manifest, ScriptEcho, SessionOutcome, TruthManifest};
use super::scenario::{
    DayPlanSpec, HitPlan, OpenRelation, PlanKind, PlannedSegment, ScenarioSpec,
};

/// Session landmarks baked into generated corpora (seconds since
/// midnight): the opening-auction print, both continuous sessions, the
/// close. Analyses must run with the matching default windows for oracle
/// comparisons.
pub const AUCTION_TS: u32 = 9 * 3600 + 25 * 60;
pub const AM_START: u32 = 9 * 3600 + 30 * 60;
pub const AM_END: u32 = 11 * 3600 + 30 * 60;
pub const PM_START: u32 = 13 * 3600;
pub const CLOSE: u32 = 15 * 3600;

/// Intraday bin width the manifest tabulates, minutes.
pub const MANIFEST_BIN_MINUTES: u32 = 5;
/// Portfolio count the manifest tabulates.
pub const MANIFEST_PORTFOLIOS: usize = 6;

#[derive(Debug)]
pub enum GenError {
    Io(std::io::Error),
    Invalid(String),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::Io(e) => write!(f, "i/o error: {e}"),
            GenError::Invalid(m) => write!(f, "infeasible scenario: {m}"),
        }
    }
}

impl std::error::Error for GenError {}

impl From<std::io::Error> for GenError {
    fn from(e: std::io::Error) -> Self {
        GenError::Io(e)
    }
}

fn invalid(msg: impl Into<String>) -> GenError {
    GenError::Invalid(msg.into())
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub ticks_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: TruthManifest,
}

struct PendingSidecar {
    stock_id: String,
    date: Date,
    prev_close: Cents,
    shares_outstanding: Shares,
    is_ipo_day: bool,
    is_ex_dividend_day: bool,
    outcome_idx: usize,
}

impl PendingSidecar {
    fn write<W: Write>(
        &self,
        out: &mut W,
        next_open: Option<Cents>,
        outcomes: &mut [SessionOutcome],
    ) -> std::io::Result<()> {
        let open_field = next_open.map(|c| format!("{}.{:02}", c / 100, c % 100)).unwrap_or_default();
        writeln!(
            out,
            "{},{},{}.{:02},{},{},{},{}",
            self.stock_id,
            self.date,
            self.prev_close / 100,
            self.prev_close % 100,
            self.shares_outstanding,
            self.is_ipo_day as u8,
            self.is_ex_dividend_day as u8,
            open_field
        )?;
        outcomes[self.outcome_idx].next_day_open = next_open;
        Ok(())
    }
}

/// Generates the corpus under `out_dir` as `ticks.csv`, `sidecar.csv` and
/// `manifest.json`.
pub fn generate(spec: &ScenarioSpec, out_dir: &Path) -> Result<GeneratedCorpus, GenError> {
    validate_structure(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let ticks_path = out_dir.join("ticks.csv");
    let sidecar_path = out_dir.join("sidecar.csv");
    let manifest_path = out_dir.join("manifest.json");

    let mut ticks = BufWriter::with_capacity(1 << 20, File::create(&ticks_path)?);
    let mut sidecar = BufWriter::new(File::create(&sidecar_path)?);
    writeln!(ticks, "{}", tick_header(spec.levels))?;
    writeln!(sidecar, "{SIDECAR_HEADER}")?;

    let plan_index: BTreeMap<(&str, Date), &DayPlanSpec> =
        spec.plans.iter().map(|p| ((p.stock_id.as_str(), p.date), p)).collect();

    let mut outcomes: Vec<SessionOutcome> = Vec::new();
    let mut row_buf = String::with_capacity(256);
    for (stock_idx, stock) in spec.stocks.iter().enumerate() {
        let mut prev_close = stock.initial_prev_close;
        let mut pending: Option<PendingSidecar> = None;
        let mut open_relation: Option<OpenRelation> = None;
        let mut halt_next = false;
        for (date_idx, dspec) in spec.dates.iter().enumerate() {
            let key = (stock.stock_id.as_str(), dspec.date);
            if halt_next {
                if plan_index.contains_key(&key) {
                    return Err(invalid(format!(
                        "{} {}: session is halted by the previous day's plan",
                        stock.stock_id, dspec.date
                    )));
                }
                halt_next = false;
                if let Some(p) = pending.take() {
                    p.write(&mut sidecar, None, &mut outcomes)?;
                }
                continue;
            }
            if prev_close < 100 {
                return Err(invalid(format!(
                    "{} {}: previous close {prev_close} below 1.00 yuan; rebalance the scenario",
                    stock.stock_id, dspec.date
                )));
            }
            let plan = plan_index.get(&key).copied();
            let mut rng =
                SplitMix64::new(derive_seed(spec.seed, stock_idx as u64, date_idx as u64));
            let day = build_day(
                spec,
                &stock.stock_id,
                dspec.date,
                prev_close,
                plan,
                open_relation,
                &mut rng,
                &mut ticks,
                &mut row_buf,
            )?;

            if let Some(p) = pending.take() {
                p.write(&mut sidecar, Some(day.open), &mut outcomes)?;
            }
            let (is_ipo, is_exdiv) =
                plan.map(|p| (p.is_ipo_day, p.is_ex_dividend_day)).unwrap_or((false, false));
            let relation = plan.and_then(|p| match &p.plan {
                PlanKind::Hit(h) => Some(h.next_day_open_relation),
                PlanKind::NoHit => None,
            });
            if date_idx + 1 == spec.dates.len()
                && relation.is_some_and(|r| r != OpenRelation::Halt)
            {
                return Err(invalid(format!(
                    "{} {}: next-day open relation needs a following trading day",
                    stock.stock_id, dspec.date
                )));
            }
            halt_next = relation == Some(OpenRelation::Halt);
            outcomes.push(SessionOutcome {
                stock_id: stock.stock_id.clone(),
                date: dspec.date,
                regime: dspec.regime,
                rows: day.rows,
                prev_close,
                shares_outstanding: stock.shares_outstanding,
                is_ipo_day: is_ipo,
                is_ex_dividend_day: is_exdiv,
                next_day_open: None, // patched when the next session opens
                segments_up: day.segments_up,
                segments_down: day.segments_down,
                relation,
                approach_durations: day.approach_durations,
                script: day.script,
            });
            pending = Some(PendingSidecar {
                stock_id: stock.stock_id.clone(),
                date: dspec.date,
                prev_close,
                shares_outstanding: stock.shares_outstanding,
                is_ipo_day: is_ipo,
                is_ex_dividend_day: is_exdiv,
                outcome_idx: outcomes.len() - 1,
            });
            open_relation = relation.filter(|r| *r != OpenRelation::Halt);
            prev_close = day.close;
        }
        if let Some(p) = pending.take() {
            p.write(&mut sidecar, None, &mut outcomes)?;
        }
    }

    ticks.flush()?;
    sidecar.flush()?;

    let manifest =
        build_manifest(spec.seed, spec.levels, &outcomes, MANIFEST_PORTFOLIOS, MANIFEST_BIN_MINUTES);
    let mf = File::create(&manifest_path)?;
    serde_json::to_writer(BufWriter::new(mf), &manifest).map_err(std::io::Error::from)?;
    Ok(GeneratedCorpus { ticks_path, sidecar_path, manifest_path, manifest })
}

// ---------------------------------------------------------------------------
// Structural validation (price-independent checks)
// ---------------------------------------------------------------------------

fn valid_record_time(ts: u32) -> bool {
    ts == AUCTION_TS || (AM_START..=AM_END).contains(&ts) || (PM_START..=CLOSE).contains(&ts)
}

fn same_continuous_session(a: u32, b: u32) -> bool {
    (AM_START..=AM_END).contains(&a) && (AM_START..=AM_END).contains(&b)
        || (PM_START..=CLOSE).contains(&a) && (PM_START..=CLOSE).contains(&b)
}

fn validate_structure(spec: &ScenarioSpec) -> Result<(), GenError> {
    if spec.levels != 3 && spec.levels != 5 {
        return Err(invalid("levels must be 3 or 5"));
    }
    if spec.tick_seconds == 0 || spec.no_hit_cadence() == 0 {
        return Err(invalid("cadences must be positive"));
    }
    if spec.stocks.is_empty() || spec.dates.is_empty() {
        return Err(invalid("need at least one stock and one date"));
    }
    let mut seen_stocks = std::collections::HashSet::new();
    for s in &spec.stocks {
        if s.stock_id.len() != 6 || !s.stock_id.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid(format!("stock id `{}` must be 6 digits", s.stock_id)));
        }
        if !seen_stocks.insert(&s.stock_id) {
            return Err(invalid(format!("duplicate stock id `{}`", s.stock_id)));
        }
        if s.initial_prev_close < 100 {
            return Err(invalid(format!(
                "{}: initial previous close must be at least 1.00 yuan",
                s.stock_id
            )));
        }
        if s.shares_outstanding <= 0 {
            return Err(invalid(format!("{}: shares outstanding must be positive", s.stock_id)));
        }
    }
    for w in spec.dates.windows(2) {
        if w[0].date >= w[1].date {
            return Err(invalid("dates must be strictly increasing"));
        }
    }
    let mut seen_plans = std::collections::HashSet::new();
    for plan in &spec.plans {
        let key = (plan.stock_id.as_str(), plan.date);
        if !seen_plans.insert(key) {
            return Err(invalid(format!("duplicate plan for {} {}", plan.stock_id, plan.date)));
        }
        if !spec.stocks.iter().any(|s| s.stock_id == plan.stock_id) {
            return Err(invalid(format!("plan references unknown stock {}", plan.stock_id)));
        }
        if !spec.dates.iter().any(|d| d.date == plan.date) {
            return Err(invalid(format!("plan references unknown date {}", plan.date)));
        }
        if let PlanKind::Hit(hit) = &plan.plan {
            validate_hit_plan(plan, hit, spec.tick_seconds)?;
        }
    }
    Ok(())
}

fn validate_hit_plan(plan: &DayPlanSpec, hit: &HitPlan, cadence: u32) -> Result<(), GenError> {
    let ctx = format!("{} {}", plan.stock_id, plan.date);
    if hit.hits.is_empty() || hit.hits.len() > 2 {
        return Err(invalid(format!("{ctx}: need one or two direction plans")));
    }
    if hit.hits.len() == 2 && hit.hits[0].direction == hit.hits[1].direction {
        return Err(invalid(format!("{ctx}: duplicate direction plans")));
    }
    let mut all: Vec<PlannedSegment> = Vec::new();
    for dp in &hit.hits {
        if dp.segments.is_empty() {
            return Err(invalid(format!("{ctx}: direction plan without segments")));
        }
        for w in dp.segments.windows(2) {
            if w[1].start <= w[0].end() {
                return Err(invalid(format!("{ctx}: segments overlap or are unordered")));
            }
        }
        all.extend(dp.segments.iter().copied());
    }
    all.sort_by_key(|s| s.start);
    for w in all.windows(2) {
        if w[1].start <= w[0].end() {
            return Err(invalid(format!("{ctx}: segments of both directions overlap")));
        }
    }
    for seg in &all {
        if seg.duration == 0 {
            return Err(invalid(format!("{ctx}: segment duration must be positive")));
        }
        if !valid_record_time(seg.start) || seg.start >= CLOSE {
            return Err(invalid(format!("{ctx}: segment start {} invalid", seg.start)));
        }
        if seg.end() > CLOSE {
            return Err(invalid(format!("{ctx}: segment runs past the close")));
        }
        if seg.end() != CLOSE && !valid_record_time(seg.end()) || seg.end() <= AUCTION_TS {
            return Err(invalid(format!("{ctx}: segment end {} invalid", seg.end())));
        }
    }
    let single_direction = hit.hits.len() == 1;
    let first_hit = all[0].start;
    if let Some(a) = &hit.approach {
        if !single_direction {
            return Err(invalid(format!("{ctx}: approach script needs a single direction")));
        }
        if a.subinterval_seconds.is_empty() || a.subinterval_seconds.iter().any(|&d| d == 0) {
            return Err(invalid(format!("{ctx}: approach durations must all be positive")));
        }
        let total: u32 = a.subinterval_seconds.iter().sum();
        if first_hit <= AUCTION_TS + total {
            return Err(invalid(format!("{ctx}: approach starts before the session")));
        }
        let t0 = first_hit - total;
        if !same_continuous_session(t0, first_hit) {
            return Err(invalid(format!(
                "{ctx}: approach window must stay inside one continuous session"
            )));
        }
    }
    if let Some(script) = &hit.trade_script {
        if !single_direction {
            return Err(invalid(format!("{ctx}: trade script needs a single direction")));
        }
        let n = script.trades.len();
        if n < 2 {
            return Err(invalid(format!("{ctx}: trade script needs at least 2 trades")));
        }
        let span = cadence * (n as u32 - 1);
        if first_hit <= AUCTION_TS + span {
            return Err(invalid(format!("{ctx}: trade script starts before the session")));
        }
        let t0 = first_hit - span;
        if !same_continuous_session(t0, first_hit) {
            return Err(invalid(format!(
                "{ctx}: trade script window must stay inside one continuous session"
            )));
        }
        if hit.approach.is_some() {
            return Err(invalid(format!(
                "{ctx}: approach and trade script cannot be combined"
            )));
        }
        for (k, t) in script.trades.iter().enumerate() {
            if t.volume <= 0 {
                return Err(invalid(format!("{ctx}: scripted trade {k} has no volume")));
            }
            if t.price <= 0 || t.bid_before < 0 || t.ask_before < 0 {
                return Err(invalid(format!("{ctx}: scripted trade {k} has a bad price")));
            }
            if t.bid_before > 0 && t.ask_before > 0 && t.ask_before < t.bid_before {
                return Err(invalid(format!("{ctx}: scripted trade {k} has crossed quotes")));
            }
            if k > 0 {
                let realized = realized_side(
                    hit.hits[0].direction,
                    t.price,
                    t.bid_before,
                    t.ask_before,
                    script.trades[k - 1].price,
                );
                if realized != t.side {
                    return Err(invalid(format!(
                        "{ctx}: scripted trade {k} side `{}` not realized by its quotes \
                         (classifies as `{}`)",
                        t.side.as_str(),
                        realized.as_str()
                    )));
                }
            }
        }
        if script.trades.last().unwrap().side != TradeSide::Same {
            return Err(invalid(format!("{ctx}: the hit trade must be same-direction")));
        }
    }
    Ok(())
}

/// Mirror of the analysis-side aggressor classification, kept separate so
/// script validation does not depend on the code under test.
fn realized_side(
    direction: HitDirection,
    price: Cents,
    bid: Cents,
    ask: Cents,
    prev_price: Cents,
) -> TradeSide {
    let buyer = if ask > 0 && price >= ask {
        Some(true)
    } else if bid > 0 && price <= bid {
        Some(false)
    } else if price > prev_price {
        Some(true)
    } else if price < prev_price {
        Some(false)
    } else {
        None
    };
    match (buyer, direction) {
        (None, _) => TradeSide::Unknown,
        (Some(true), HitDirection::Up) | (Some(false), HitDirection::Down) => TradeSide::Same,
        _ => TradeSide::Opposite,
    }
}

// ---------------------------------------------------------------------------
// Day generation
// ---------------------------------------------------------------------------

struct DayResult {
    open: Cents,
    close: Cents,
    rows: u64,
    segments_up: Vec<PlannedSegment>,
    segments_down: Vec<PlannedSegment>,
    approach_durations: Option<Vec<u32>>,
    script: Option<ScriptEcho>,
}

#[derive(Clone, Copy)]
struct SegmentMark {
    direction: HitDirection,
    start: u32,
    end: u32,
    ends_at_close: bool,
}

#[allow(clippy::too_many_arguments)]
fn build_day<W: Write>(
    spec: &ScenarioSpec,
    stock_id: &str,
    date: Date,
    prev_close: Cents,
    plan: Option<&DayPlanSpec>,
    open_relation: Option<OpenRelation>,
    rng: &mut SplitMix64,
    out: &mut W,
    row_buf: &mut String,
) -> Result<DayResult, GenError> {
    let ctx = format!("{stock_id} {date}");
    let limits = compute_limit_prices(prev_close);
    let hit_plan = plan.and_then(|p| match &p.plan {
        PlanKind::Hit(h) => Some(h),
        PlanKind::NoHit => None,
    });
    let cadence = if hit_plan.is_some() { spec.tick_seconds } else { spec.no_hit_cadence() };

    // planted segments, globally ordered
    let mut segments: Vec<SegmentMark> = Vec::new();
    let mut segments_up = Vec::new();
    let mut segments_down = Vec::new();
    if let Some(h) = hit_plan {
        for dp in &h.hits {
            for seg in &dp.segments {
                segments.push(SegmentMark {
                    direction: dp.direction,
                    start: seg.start,
                    end: seg.end(),
                    ends_at_close: seg.end() == CLOSE,
                });
                match dp.direction {
                    HitDirection::Up => segments_up.push(*seg),
                    HitDirection::Down => segments_down.push(*seg),
                }
            }
        }
        segments.sort_by_key(|s| s.start);
    }
    let limit_of = |dir: HitDirection| match dir {
        HitDirection::Up => limits.up_limit,
        HitDirection::Down => limits.down_limit,
    };
    let first_hit = segments.first().map(|s| (s.direction, s.start));

    // velocity approach: place threshold-crossing trades so measured
    // durations equal the script exactly
    let mut crossing_rows: BTreeMap<u32, Cents> = BTreeMap::new();
    let mut approach_range: Option<(u32, u32)> = None;
    let mut approach_durations = None;
    if let Some(a) = hit_plan.and_then(|h| h.approach.as_ref()) {
        let (dir, hit_ts) = first_hit.expect("validated: approach implies segments");
        let thresholds =
            approach_thresholds(&limits, dir, a.subinterval_seconds.len(), DEFAULT_LIMIT_BP);
        let interior = &thresholds[..thresholds.len() - 1];
        let strictly_ordered = interior.windows(2).all(|w| match dir {
            HitDirection::Up => w[0] < w[1],
            HitDirection::Down => w[0] > w[1],
        });
        let clear_of_limit = match dir {
            HitDirection::Up => interior.last().is_some_and(|&t| t < limits.up_limit),
            HitDirection::Down => interior.last().is_some_and(|&t| t > limits.down_limit),
        };
        if !strictly_ordered || !clear_of_limit {
            return Err(invalid(format!(
                "{ctx}: approach thresholds collide at this price level; raise the price"
            )));
        }
        let total: u32 = a.subinterval_seconds.iter().sum();
        let mut t = hit_ts - total;
        approach_range = Some((t, hit_ts));
        for (m, &d) in a.subinterval_seconds.iter().enumerate() {
            crossing_rows.insert(t, interior[m]);
            t += d;
        }
        approach_durations = Some(a.subinterval_seconds.clone());
    }

    // trade script: the last window of trades before the hit
    let mut script_rows: BTreeMap<u32, usize> = BTreeMap::new();
    let mut script_range: Option<(u32, u32)> = None;
    let mut script_echo = None;
    if let Some(script) = hit_plan.and_then(|h| h.trade_script.as_ref()) {
        let (dir, hit_ts) = first_hit.expect("validated: script implies segments");
        let n = script.trades.len();
        for (k, t) in script.trades.iter().enumerate() {
            let at_limit = t.price == limit_of(dir);
            let inside = t.price > limits.down_limit && t.price < limits.up_limit;
            if k + 1 == n {
                if !at_limit {
                    return Err(invalid(format!(
                        "{ctx}: the last scripted trade must print at the limit price"
                    )));
                }
            } else if !inside {
                return Err(invalid(format!(
                    "{ctx}: scripted trade {k} must stay strictly inside the limits"
                )));
            }
        }
        let t0 = hit_ts - spec.tick_seconds * (n as u32 - 1);
        script_range = Some((t0, hit_ts));
        for k in 0..n {
            script_rows.insert(t0 + spec.tick_seconds * k as u32, k);
        }
        script_echo = Some(ScriptEcho {
            prices: script.trades.iter().map(|t| t.price).collect(),
            sizes: script.trades.iter().map(|t| t.volume).collect(),
            sides: script.trades.iter().map(|t| t.side).collect(),
            quotes: script
                .trades
                .iter()
                .map(|t| {
                    if t.bid_before > 0 && t.ask_before > 0 {
                        Some((t.bid_before, t.ask_before))
                    } else {
                        None
                    }
                })
                .collect(),
        });
    }

    // timeline: auction print, cadence grid, forced feature times; grid
    // filler is suppressed inside the scripted trade window
    let mut times: Vec<u32> = Vec::new();
    times.push(AUCTION_TS);
    let mut t = AM_START;
    while t <= AM_END {
        times.push(t);
        t += cadence;
    }
    t = PM_START;
    while t <= CLOSE {
        times.push(t);
        t += cadence;
    }
    if let Some((lo, hi)) = script_range {
        times.retain(|&ts| ts <= lo || ts >= hi);
    }
    times.extend(segments.iter().map(|s| s.start));
    times.extend(segments.iter().filter(|s| !s.ends_at_close).map(|s| s.end));
    times.extend(crossing_rows.keys().copied());
    times.extend(script_rows.keys().copied());
    times.sort_unstable();
    times.dedup();

    // open price: planted open hit wins, then the previous day's relation,
    // then a small random step
    let open_limit = first_hit.and_then(|(dir, ts)| (ts == AUCTION_TS).then(|| limit_of(dir)));
    let band = filler_band(&limits, hit_plan, prev_close);
    let open = if let Some(p) = open_limit {
        p
    } else if let Some(rel) = open_relation {
        match rel {
            OpenRelation::Higher => prev_close + 1,
            OpenRelation::Lower => prev_close - 1,
            OpenRelation::Equal => prev_close,
            OpenRelation::Halt => unreachable!("halt days are skipped"),
        }
    } else {
        clamp(prev_close + rng.next_below(3) as Cents - 1, band)
    };
    if let (Some(rel), Some(actual)) = (open_relation, open_limit) {
        let ok = match rel {
            OpenRelation::Higher => actual > prev_close,
            OpenRelation::Lower => actual < prev_close,
            OpenRelation::Equal => actual == prev_close,
            OpenRelation::Halt => false,
        };
        if !ok {
            return Err(invalid(format!(
                "{ctx}: planted opening hit contradicts the previous day's open relation"
            )));
        }
    }
    if open_limit.is_none() && (open <= limits.down_limit || open >= limits.up_limit) {
        return Err(invalid(format!("{ctx}: open price {open} escapes the limit band")));
    }

    // walk the timeline
    let mut writer = RowWriter {
        out,
        row_buf,
        stock_id,
        date_str: date.to_string(),
        levels: spec.levels,
        limits,
        rows: 0,
        last_trade: None,
    };
    let mut price = open;
    let mut in_segment: Option<HitDirection> = None;
    let mut hold_level: Option<Cents> = None;
    let seg_start_at = |ts: u32| segments.iter().find(|s| s.start == ts);
    let seg_end_at = |ts: u32| segments.iter().find(|s| s.end == ts && !s.ends_at_close);
    for &ts in &times {
        if ts == AUCTION_TS {
            writer.trade_row(ts, open, auction_volume(rng), rng)?;
            if let Some(s) = seg_start_at(ts) {
                in_segment = Some(s.direction);
            }
            price = open;
            continue;
        }
        if let Some(s) = seg_end_at(ts) {
            // the interior trade that lifts the price off the limit
            let interior = match s.direction {
                HitDirection::Up => limits.up_limit - 1,
                HitDirection::Down => limits.down_limit + 1,
            };
            writer.trade_row(ts, interior, trade_volume(rng), rng)?;
            in_segment = None;
            price = interior;
            continue;
        }
        if let Some(s) = seg_start_at(ts) {
            let limit = limit_of(s.direction);
            if let Some(&k) = script_rows.get(&ts) {
                writer.script_row(ts, k, hit_plan.unwrap(), s.direction, rng)?;
            } else {
                writer.limit_row(ts, s.direction, true, rng)?;
            }
            in_segment = Some(s.direction);
            hold_level = None;
            price = limit;
            continue;
        }
        if let Some(dir) = in_segment {
            writer.limit_row(ts, dir, rng.next_below(4) != 0, rng)?;
            price = limit_of(dir);
            continue;
        }
        if let Some(&k) = script_rows.get(&ts) {
            let h = hit_plan.unwrap();
            writer.script_row(ts, k, h, h.hits[0].direction, rng)?;
            price = h.trade_script.as_ref().unwrap().trades[k].price;
            continue;
        }
        if let Some(&thr) = crossing_rows.get(&ts) {
            writer.trade_row(ts, thr, trade_volume(rng), rng)?;
            hold_level = Some(thr);
            price = thr;
            continue;
        }
        if let Some((lo, hi)) = approach_range {
            if ts > lo && ts < hi {
                let level = hold_level.expect("inside the approach a level is always set");
                if rng.next_below(4) == 0 {
                    writer.quote_row(ts, level, rng)?;
                } else {
                    writer.trade_row(ts, level, trade_volume(rng), rng)?;
                }
                continue;
            }
        }
        // plain filler
        price = clamp(price + rng.next_below(3) as Cents - 1, band);
        if rng.next_below(4) == 0 {
            writer.quote_row(ts, price, rng)?;
        } else {
            writer.trade_row(ts, price, trade_volume(rng), rng)?;
        }
    }

    let close = writer.last_trade.expect("every day prints at least the auction trade");
    let rows = writer.rows;
    Ok(DayResult {
        open,
        close,
        rows,
        segments_up,
        segments_down,
        approach_durations,
        script: script_echo,
    })
}

fn clamp(p: Cents, (lo, hi): (Cents, Cents)) -> Cents {
    p.max(lo).min(hi)
}

/// Filler stays within ±3% of the previous close, strictly inside the
/// limits, and below the approach band on approach-scripted days.
fn filler_band(limits: &LimitPrices, hit_plan: Option<&HitPlan>, prev_close: Cents) -> (Cents, Cents) {
    let margin = prev_close * 3 / 100;
    let mut lo = (prev_close - margin).max(limits.down_limit + 1);
    let mut hi = (prev_close + margin).min(limits.up_limit - 1);
    if let Some(a) = hit_plan.and_then(|h| h.approach.as_ref()) {
        let dir = hit_plan.unwrap().hits[0].direction;
        let thr = approach_thresholds(limits, dir, a.subinterval_seconds.len(), DEFAULT_LIMIT_BP);
        match dir {
            HitDirection::Up => hi = hi.min(thr[0] - 1),
            HitDirection::Down => lo = lo.max(thr[0] + 1),
        }
    }
    (lo.min(hi), hi.max(lo))
}

fn trade_volume(rng: &mut SplitMix64) -> Shares {
    100 * (1 + rng.next_below(100) as Shares)
}

fn auction_volume(rng: &mut SplitMix64) -> Shares {
    100 * (10 + rng.next_below(500) as Shares)
}

struct RowWriter<'a, W: Write> {
    out: &'a mut W,
    row_buf: &'a mut String,
    stock_id: &'a str,
    date_str: String,
    levels: usize,
    limits: LimitPrices,
    rows: u64,
    last_trade: Option<Cents>,
}

impl<'a, W: Write> RowWriter<'a, W> {
    fn emit(&mut self, tick: &TickRecord) -> std::io::Result<()> {
        self.row_buf.clear();
        crate::market_data::write_tick_row(
            self.row_buf,
            self.stock_id,
            &self.date_str,
            tick,
            self.levels,
        );
        self.row_buf.push('\n');
        self.rows += 1;
        if tick.trade_price > 0 {
            self.last_trade = Some(tick.trade_price);
        }
        self.out.write_all(self.row_buf.as_bytes())
    }

    /// Book one tick either side of `center`, clamped to the limit band;
    /// levels pushed past a limit are absent.
    fn normal_book(&self, center: Cents, rng: &mut SplitMix64) -> LobSnapshot {
        let mut lob = LobSnapshot {
            asks: Vec::with_capacity(self.levels),
            bids: Vec::with_capacity(self.levels),
        };
        for j in 1..=self.levels as Cents {
            let ask = center + j;
            lob.asks.push(if ask <= self.limits.up_limit {
                BookLevel { price: ask, volume: book_volume(rng) }
            } else {
                BookLevel::default()
            });
        }
        for j in 1..=self.levels as Cents {
            let bid = center - j;
            lob.bids.push(if bid >= self.limits.down_limit && bid > 0 {
                BookLevel { price: bid, volume: book_volume(rng) }
            } else {
                BookLevel::default()
            });
        }
        lob
    }

    /// Locked book at a limit: the pressured side stacks from the limit
    /// price inward, the other side is empty.
    fn limit_book(&self, direction: HitDirection, rng: &mut SplitMix64) -> LobSnapshot {
        let mut lob = LobSnapshot {
            asks: vec![BookLevel::default(); self.levels],
            bids: vec![BookLevel::default(); self.levels],
        };
        match direction {
            HitDirection::Up => {
                for j in 0..self.levels as Cents {
                    let bid = self.limits.up_limit - j;
                    if bid >= self.limits.down_limit && bid > 0 {
                        lob.bids[j as usize] =
                            BookLevel { price: bid, volume: 100 * book_volume(rng) };
                    }
                }
            }
            HitDirection::Down => {
                for j in 0..self.levels as Cents {
                    let ask = self.limits.down_limit + j;
                    if ask <= self.limits.up_limit {
                        lob.asks[j as usize] =
                            BookLevel { price: ask, volume: 100 * book_volume(rng) };
                    }
                }
            }
        }
        lob
    }

    fn trade_row(&mut self, ts: u32, price: Cents, volume: Shares, rng: &mut SplitMix64) -> std::io::Result<()> {
        let lob = self.normal_book(price, rng);
        self.emit(&TickRecord { timestamp: ts, trade_price: price, trade_volume: volume, lob })
    }

    fn quote_row(&mut self, ts: u32, center: Cents, rng: &mut SplitMix64) -> std::io::Result<()> {
        let lob = self.normal_book(center, rng);
        self.emit(&TickRecord { timestamp: ts, trade_price: 0, trade_volume: 0, lob })
    }

    fn limit_row(
        &mut self,
        ts: u32,
        direction: HitDirection,
        with_trade: bool,
        rng: &mut SplitMix64,
    ) -> std::io::Result<()> {
        let price = match direction {
            HitDirection::Up => self.limits.up_limit,
            HitDirection::Down => self.limits.down_limit,
        };
        let volume = if with_trade { trade_volume(rng) } else { 0 };
        let lob = self.limit_book(direction, rng);
        self.emit(&TickRecord {
            timestamp: ts,
            trade_price: if with_trade { price } else { 0 },
            trade_volume: volume,
            lob,
        })
    }

    /// Scripted trade k. The row carries the quotes standing before trade
    /// k+1 (records are read as "the book after this event"); the final
    /// script row is the hit and carries the locked book.
    fn script_row(
        &mut self,
        ts: u32,
        k: usize,
        plan: &HitPlan,
        direction: HitDirection,
        rng: &mut SplitMix64,
    ) -> std::io::Result<()> {
        let script = plan.trade_script.as_ref().expect("script rows imply a script");
        let trade = script.trades[k];
        let lob = if k + 1 < script.trades.len() {
            let next = script.trades[k + 1];
            let mut lob = LobSnapshot {
                asks: vec![BookLevel::default(); self.levels],
                bids: vec![BookLevel::default(); self.levels],
            };
            if next.ask_before > 0 {
                lob.asks[0] = BookLevel { price: next.ask_before, volume: book_volume(rng) };
            }
            if next.bid_before > 0 {
                lob.bids[0] = BookLevel { price: next.bid_before, volume: book_volume(rng) };
            }
            lob
        } else {
            self.limit_book(direction, rng)
        };
        self.emit(&TickRecord {
            timestamp: ts,
            trade_price: trade.price,
            trade_volume: trade.volume,
            lob,
        })
    }
}

fn book_volume(rng: &mut SplitMix64) -> Shares {
    100 * (1 + rng.next_below(50) as Shares)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::Regime;
    use crate::limit_engine::{HitWindow, NextDayClass};
    use crate::synthgen::scenario::{
        ApproachScript, DateSpec, DayPlanSpec, DirectionPlan, PlanKind, StockSpec,
    };

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("limithit-gen-{}-{}", name, std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn date(s: &str) -> Date {
        Date::parse(s).unwrap()
    }

    fn one_stock_spec(plans: Vec<DayPlanSpec>, dates: Vec<&str>) -> ScenarioSpec {
        ScenarioSpec {
            seed: 7,
            levels: 3,
            tick_seconds: 5,
            no_hit_tick_seconds: Some(60),
            stocks: vec![StockSpec {
                stock_id: "600000".into(),
                shares_outstanding: 1_000_000,
                initial_prev_close: 1000,
            }],
            dates: dates
                .into_iter()
                .map(|d| DateSpec { date: date(d), regime: Regime::Bull })
                .collect(),
            plans,
        }
    }

    fn up_hit_plan(date_s: &str, segments: Vec<PlannedSegment>, relation: OpenRelation) -> DayPlanSpec {
        DayPlanSpec {
            stock_id: "600000".into(),
            date: date(date_s),
            is_ipo_day: false,
            is_ex_dividend_day: false,
            plan: PlanKind::Hit(HitPlan {
                hits: vec![DirectionPlan { direction: HitDirection::Up, segments }],
                next_day_open_relation: relation,
                approach: None,
                trade_script: None,
            }),
        }
    }

    #[test]
    fn manifest_echoes_a_single_planted_segment() {
        // one stock, one day, one up segment at 10:00 for 300 s, closed
        // off-limit
        let spec = one_stock_spec(
            vec![up_hit_plan(
                "2006-01-04",
                vec![PlannedSegment { start: 36000, duration: 300 }],
                OpenRelation::Halt,
            )],
            vec!["2006-01-04"],
        );
        let out = generate(&spec, &tmpdir("echo")).unwrap();
        let m = &out.manifest;
        assert_eq!(m.day_records.len(), 1);
        let rec = &m.day_records[0];
        assert_eq!(rec.m_up, 1);
        assert_eq!(rec.dt_up_s, 300);
        assert_eq!(rec.span_up_s, 300);
        assert_eq!(rec.first_window, HitWindow::Am);
        assert!(!rec.closed_at_limit);
        assert_eq!(rec.next_day_class, NextDayClass::Unavailable);
        assert_eq!(m.sessions.len(), 1);
        assert_eq!(m.sessions[0].next_day_open, None);
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = crate::synthgen::demo::demo_scenario(3, 6, 42);
        let d1 = tmpdir("det1");
        let d2 = tmpdir("det2");
        generate(&spec, &d1).unwrap();
        generate(&spec, &d2).unwrap();
        for f in ["ticks.csv", "sidecar.csv", "manifest.json"] {
            let a = std::fs::read(d1.join(f)).unwrap();
            let b = std::fs::read(d2.join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between identical runs");
        }
    }

    #[test]
    fn infeasible_plans_are_rejected() {
        // segment past the close
        let spec = one_stock_spec(
            vec![up_hit_plan(
                "2006-01-04",
                vec![PlannedSegment { start: 53_900, duration: 500 }],
                OpenRelation::Halt,
            )],
            vec!["2006-01-04"],
        );
        assert!(matches!(generate(&spec, &tmpdir("past")), Err(GenError::Invalid(_))));
        // overlapping segments
        let spec = one_stock_spec(
            vec![up_hit_plan(
                "2006-01-04",
                vec![
                    PlannedSegment { start: 36000, duration: 300 },
                    PlannedSegment { start: 36100, duration: 100 },
                ],
                OpenRelation::Halt,
            )],
            vec!["2006-01-04"],
        );
        assert!(matches!(generate(&spec, &tmpdir("overlap")), Err(GenError::Invalid(_))));
        // hit start inside the lunch halt
        let spec = one_stock_spec(
            vec![up_hit_plan(
                "2006-01-04",
                vec![PlannedSegment { start: 43_000, duration: 100 }],
                OpenRelation::Halt,
            )],
            vec!["2006-01-04"],
        );
        assert!(matches!(generate(&spec, &tmpdir("lunch")), Err(GenError::Invalid(_))));
        // a relation that needs a next day, on the last day
        let spec = one_stock_spec(
            vec![up_hit_plan(
                "2006-01-04",
                vec![PlannedSegment { start: 36000, duration: 300 }],
                OpenRelation::Higher,
            )],
            vec!["2006-01-04"],
        );
        assert!(matches!(generate(&spec, &tmpdir("norel")), Err(GenError::Invalid(_))));
        // plan on a day consumed by the previous day's halt
        let spec = one_stock_spec(
            vec![
                up_hit_plan(
                    "2006-01-04",
                    vec![PlannedSegment { start: 36000, duration: 300 }],
                    OpenRelation::Halt,
                ),
                up_hit_plan(
                    "2006-01-05",
                    vec![PlannedSegment { start: 36000, duration: 300 }],
                    OpenRelation::Halt,
                ),
            ],
            vec!["2006-01-04", "2006-01-05"],
        );
        assert!(matches!(generate(&spec, &tmpdir("halted")), Err(GenError::Invalid(_))));
    }

    #[test]
    fn scenario_json_round_trips() {
        let spec = crate::synthgen::demo::demo_scenario(2, 5, 9);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.stocks.len(), spec.stocks.len());
        assert_eq!(back.dates.len(), spec.dates.len());
        assert_eq!(back.plans.len(), spec.plans.len());
        // a re-serialized spec generates identical bytes
        let d1 = tmpdir("json1");
        let d2 = tmpdir("json2");
        generate(&spec, &d1).unwrap();
        generate(&back, &d2).unwrap();
        assert_eq!(std::fs::read(d1.join("ticks.csv")).unwrap(), std::fs::read(d2.join("ticks.csv")).unwrap());
    }

    #[test]
    fn dual_direction_day_round_trips_at_three_levels() {
        use crate::market_data::{parse_tick_file, SessionWindows};
        let mut spec = one_stock_spec(
            vec![DayPlanSpec {
                stock_id: "600000".into(),
                date: date("2006-01-04"),
                is_ipo_day: false,
                is_ex_dividend_day: false,
                plan: PlanKind::Hit(HitPlan {
                    hits: vec![
                        DirectionPlan {
                            direction: HitDirection::Down,
                            segments: vec![PlannedSegment { start: 35_000, duration: 200 }],
                        },
                        DirectionPlan {
                            direction: HitDirection::Up,
                            segments: vec![PlannedSegment { start: 48_000, duration: 300 }],
                        },
                    ],
                    next_day_open_relation: OpenRelation::Halt,
                    approach: None,
                    trade_script: None,
                }),
            }],
            vec!["2006-01-04"],
        );
        spec.levels = 3;
        let out = generate(&spec, &tmpdir("dual")).unwrap();
        let rec = &out.manifest.day_records[0];
        assert_eq!(rec.direction, HitDirection::Down);
        assert_eq!((rec.m_up, rec.m_down), (1, 1));
        let (sessions, report) = parse_tick_file(
            &out.ticks_path,
            &out.sidecar_path,
            SessionWindows::default(),
        )
        .unwrap();
        assert_eq!(report.row_error_count, 0, "{:?}", report.row_errors);
        assert_eq!(sessions[0].levels, 3);
        let limits = compute_limit_prices(sessions[0].prev_close);
        let got = crate::limit_engine::segment_hits(&sessions[0], &limits, &SessionWindows::default())
            .unwrap()
            .unwrap();
        assert_eq!(got.direction, HitDirection::Down);
        assert_eq!(got.m_up(), 1);
        assert_eq!(got.m_down(), 1);
        assert_eq!(got.total_duration(HitDirection::Down), 200);
        assert_eq!(got.total_duration(HitDirection::Up), 300);
    }

    #[test]
    fn relations_realize_in_the_sidecar() {
        let mk = |rel| {
            one_stock_spec(
                vec![up_hit_plan(
                    "2006-01-04",
                    vec![PlannedSegment { start: 50_000, duration: CLOSE - 50_000 }],
                    rel,
                )],
                vec!["2006-01-04", "2006-01-05"],
            )
        };
        for (rel, expect) in [
            (OpenRelation::Higher, NextDayClass::Continuation),
            (OpenRelation::Lower, NextDayClass::Reversal),
            (OpenRelation::Equal, NextDayClass::Flat),
        ] {
            let out = generate(&mk(rel), &tmpdir("rel")).unwrap();
            let m = &out.manifest;
            assert_eq!(m.day_records[0].next_day_class, expect, "{rel:?}");
            assert!(m.day_records[0].closed_at_limit);
            let hit_session = &m.sessions[0];
            let close = compute_limit_prices(hit_session.prev_close).up_limit;
            let open = hit_session.next_day_open.unwrap();
            match rel {
                OpenRelation::Higher => assert!(open > close),
                OpenRelation::Lower => assert!(open < close),
                OpenRelation::Equal => assert_eq!(open, close),
                OpenRelation::Halt => unreachable!(),
            }
        }
        // halt: the next date is skipped entirely
        let out = generate(&mk(OpenRelation::Halt), &tmpdir("relhalt")).unwrap();
        assert_eq!(out.manifest.sessions.len(), 1);
        assert_eq!(out.manifest.sessions[0].next_day_open, None);
    }

    #[test]
    fn approach_crossings_land_where_planned() {
        let durations: Vec<u32> = (1..=10).collect();
        let mut plan = up_hit_plan(
            "2006-01-04",
            vec![PlannedSegment { start: 36000, duration: 300 }],
            OpenRelation::Halt,
        );
        if let PlanKind::Hit(h) = &mut plan.plan {
            h.approach = Some(ApproachScript { subinterval_seconds: durations.clone() });
        }
        let spec = one_stock_spec(vec![plan], vec!["2006-01-04"]);
        let out = generate(&spec, &tmpdir("approach")).unwrap();
        assert_eq!(out.manifest.velocity.len(), 1);
        let v = &out.manifest.velocity[0];
        assert_eq!(v.class, "up_bull");
        assert_eq!(v.event_count, 1);
        // single event: V_m = total / d_m
        assert!((v.velocities[0] - 55.0).abs() < 1e-9);
        assert!((v.velocities[9] - 5.5).abs() < 1e-9);
    }
}
