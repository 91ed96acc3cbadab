//! Streaming analysis pipeline: sessions are read in batches, reduced in
//! parallel to small per-day artifacts (hit records, session metadata,
//! pre-hit event extracts), and the ticks are dropped immediately, so
//! corpora far larger than memory stream through.
//!
//! Determinism contract: results are keyed and finalized in canonical
//! (stock_id, date) order, so every emitted byte is independent of the
//! worker count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use limithit_core::aggregation::{Regime, RegimeCalendar, SessionMeta};
use limithit_core::limit_engine::{compute_limit_prices_bp, segment_hits, DayHitRecord, HitDirection};
use limithit_core::market_data::{Date, SessionReader, StockDaySession};
use limithit_core::prehit::{
    study_event, velocity_event, Exclusion, HitClass, StudyEvent, VelocityEvent,
};

use crate::config::RunConfig;
use crate::CliError;

/// Bounded work evaluated per parallel batch.
const BATCH_SESSIONS: usize = 64;

/// Runs `f` over `items` on `threads` workers, returning results in input
/// order regardless of scheduling.
pub fn parallel_map<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let work: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let item = work[i].lock().unwrap().take().expect("each slot is taken once");
                let result = f(item);
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot was filled"))
        .collect()
}

/// One processed session.
pub struct SessionResult {
    pub meta: Option<SessionMeta>,
    pub ticks: u64,
    pub stock_id: String,
    pub date: Date,
    pub flagged: bool,
    pub record: Option<DayHitRecord>,
    pub velocity: Vec<(HitClass, VelocityEvent)>,
    pub study: Vec<(HitClass, StudyEvent)>,
    pub exclusions: Vec<(HitClass, Exclusion)>,
    pub error: Option<String>,
}

/// Aggregated pipeline output.
pub struct PipelineOutput {
    pub records: Vec<DayHitRecord>,
    pub metas: Vec<SessionMeta>,
    /// (stock_id, date, ticks) for every parsed session, flagged included.
    pub session_inventory: Vec<(String, Date, u64)>,
    pub velocity_events: BTreeMap<&'static str, Vec<VelocityEvent>>,
    pub study_events: BTreeMap<&'static str, Vec<StudyEvent>>,
    pub exclusions: BTreeMap<(&'static str, &'static str), u64>,
    pub session_errors: Vec<String>,
    pub rows_total: u64,
    pub rows_valid: u64,
    pub row_error_count: u64,
    pub row_errors: Vec<String>,
    pub sessions_missing_metadata: u64,
}

pub fn run_pipeline(cfg: &RunConfig, collect_prehit: bool) -> Result<PipelineOutput, CliError> {
    let calendar = cfg.calendar()?;
    let mut reader = SessionReader::open(cfg.ticks_path()?, cfg.sidecar_path()?, cfg.windows)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let mut results: Vec<SessionResult> = Vec::new();
    loop {
        let mut batch: Vec<StockDaySession> = Vec::with_capacity(BATCH_SESSIONS);
        loop {
            match reader.next_session().map_err(|e| CliError::Data(e.to_string()))? {
                Some(s) => {
                    batch.push(s);
                    if batch.len() >= BATCH_SESSIONS {
                        break;
                    }
                }
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let worker =
            |session: StockDaySession| process_session(session, cfg, &calendar, collect_prehit);
        results.extend(parallel_map(batch, cfg.threads, worker));
    }

    // canonical order for every downstream artifact
    results.sort_by(|a, b| (&a.stock_id, a.date).cmp(&(&b.stock_id, b.date)));

    let mut out = PipelineOutput {
        records: Vec::new(),
        metas: Vec::new(),
        session_inventory: Vec::new(),
        velocity_events: BTreeMap::new(),
        study_events: BTreeMap::new(),
        exclusions: BTreeMap::new(),
        session_errors: Vec::new(),
        rows_total: 0,
        rows_valid: 0,
        row_error_count: 0,
        row_errors: Vec::new(),
        sessions_missing_metadata: 0,
    };
    for r in results {
        out.session_inventory.push((r.stock_id.clone(), r.date, r.ticks));
        if let Some(e) = r.error {
            out.session_errors.push(e);
            continue;
        }
        if let Some(meta) = r.meta {
            out.metas.push(meta);
        }
        if let Some(rec) = r.record {
            out.records.push(rec);
        }
        for (class, ev) in r.velocity {
            out.velocity_events.entry(class.as_str()).or_default().push(ev);
        }
        for (class, ev) in r.study {
            out.study_events.entry(class.as_str()).or_default().push(ev);
        }
        for (class, excl) in r.exclusions {
            *out.exclusions.entry((class.as_str(), excl.as_str())).or_insert(0) += 1;
        }
    }
    let report = reader.into_report();
    out.rows_total = report.rows_total;
    out.rows_valid = report.rows_valid;
    out.row_error_count = report.row_error_count;
    out.row_errors = report.row_errors.iter().map(|e| e.to_string()).collect();
    out.sessions_missing_metadata = report.sessions_missing_metadata.len() as u64;
    Ok(out)
}

fn process_session(
    session: StockDaySession,
    cfg: &RunConfig,
    calendar: &RegimeCalendar,
    collect_prehit: bool,
) -> SessionResult {
    let mut result = SessionResult {
        meta: None,
        ticks: session.ticks.len() as u64,
        stock_id: session.stock_id.clone(),
        date: session.date,
        flagged: session.is_ipo_day || session.is_ex_dividend_day,
        record: None,
        velocity: Vec::new(),
        study: Vec::new(),
        exclusions: Vec::new(),
        error: None,
    };
    if result.flagged {
        return result; // IPO and ex-dividend days are dropped from the sample
    }
    result.meta = Some(SessionMeta {
        stock_id: session.stock_id.clone(),
        date: session.date,
        capitalization: session.capitalization(),
    });
    let limits = compute_limit_prices_bp(session.prev_close, cfg.limit_bp);
    let record = match segment_hits(&session, &limits, &cfg.windows) {
        Ok(r) => r,
        Err(e) => {
            result.error = Some(format!("{} {}: {e}", session.stock_id, session.date));
            result.meta = None;
            return result;
        }
    };
    let Some(record) = record else { return result };
    if collect_prehit {
        let regime = match calendar.regime_for(session.date) {
            Ok(r) => r,
            Err(e) => {
                result.error = Some(format!("{} {}: {e}", session.stock_id, session.date));
                result.meta = None;
                return result;
            }
        };
        collect_prehit_events(&session, &record, &limits, regime, cfg, &mut result);
    }
    result.record = Some(record);
    result
}

fn collect_prehit_events(
    session: &StockDaySession,
    record: &DayHitRecord,
    limits: &limithit_core::limit_engine::LimitPrices,
    regime: Regime,
    cfg: &RunConfig,
    result: &mut SessionResult,
) {
    for direction in [HitDirection::Up, HitDirection::Down] {
        let Some(first_ts) = record.first_hit_time(direction) else { continue };
        let class = HitClass { direction, regime };
        match velocity_event(
            session,
            limits,
            direction,
            first_ts,
            cfg.velocity_subintervals,
            cfg.limit_bp,
        ) {
            Ok(ev) => result.velocity.push((class, ev)),
            Err(excl) => result.exclusions.push((class, excl)),
        }
        let hit_at_open = first_ts <= cfg.windows.open_end;
        match study_event(session, limits, direction, hit_at_open, cfg.event_window) {
            Ok(ev) => result.study.push((class, ev)),
            Err(excl) => result.exclusions.push((class, excl)),
        }
    }
}
