//! Canonical tick-data model, CSV ingestion, and trade-direction inference.
//!
//! One input row is one quote record: an optional trade (price, volume) plus
//! a limit-order-book snapshot with `J ∈ {3, 5}` levels per side. Rows are
//! grouped into [`StockDaySession`]s keyed by `(stock_id, date)`; per-session
//! metadata (previous close, shares outstanding, IPO/ex-dividend flags,
//! next-day open) comes from a sidecar CSV.
//!
//! Prices are integer cents everywhere. The text format carries prices as
//! decimal yuan with exactly two fraction digits, so parsing and
//! re-serialization round-trip byte for byte for canonical input.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Price in integer cents (0.01 CNY).
pub type Cents = i64;
/// Volume in shares.
pub type Shares = i64;

pub const SECONDS_PER_DAY: u32 = 86_400;

/// Trading-session boundaries, in seconds since midnight.
///
/// Defaults: records accepted in [9:15:00, 15:00:00]; hits at or before
/// 9:30:00 belong to the opening call auction, the morning session is
/// (9:30, 11:30], the afternoon session [13:00, 15:00]. The interval
/// (11:30, 13:00) is the lunch halt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionWindows {
    pub session_start: u32,
    pub open_end: u32,
    pub am_end: u32,
    pub pm_start: u32,
    pub close: u32,
}

impl Default for SessionWindows {
    fn default() -> Self {
        SessionWindows {
            session_start: 9 * 3600 + 15 * 60,
            open_end: 9 * 3600 + 30 * 60,
            am_end: 11 * 3600 + 30 * 60,
            pm_start: 13 * 3600,
            close: 15 * 3600,
        }
    }
}

impl SessionWindows {
    pub fn is_valid(&self) -> bool {
        self.session_start < self.open_end
            && self.open_end < self.am_end
            && self.am_end < self.pm_start
            && self.pm_start < self.close
            && self.close < SECONDS_PER_DAY
    }

    /// True when `ts` lies in the lunch halt (exclusive on both ends).
    pub fn in_lunch_halt(&self, ts: u32) -> bool {
        ts > self.am_end && ts < self.pm_start
    }
}

/// Calendar date. Only validity and ordering are needed; no time-zone
/// arithmetic is ever performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Result<Date, DateError> {
        if !(1..=12).contains(&month) {
            return Err(DateError);
        }
        if day == 0 || day > days_in_month(year, month) {
            return Err(DateError);
        }
        Ok(Date { year, month, day })
    }

    /// The following calendar day.
    pub fn next_day(&self) -> Date {
        if self.day < days_in_month(self.year, self.month) {
            Date { day: self.day + 1, ..*self }
        } else if self.month < 12 {
            Date { year: self.year, month: self.month + 1, day: 1 }
        } else {
            Date { year: self.year + 1, month: 1, day: 1 }
        }
    }

    /// Parses `YYYY-MM-DD`.
    pub fn parse(s: &str) -> Result<Date, DateError> {
        let b = s.as_bytes();
        if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
            return Err(DateError);
        }
        let year = parse_digits(&b[0..4]).ok_or(DateError)? as i32;
        let month = parse_digits(&b[5..7]).ok_or(DateError)? as u8;
        let day = parse_digits(&b[8..10]).ok_or(DateError)? as u8;
        Date::new(year, month, day)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl serde::Serialize for Date {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Date {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Date, D::Error> {
        let s = String::deserialize(deserializer)?;
        Date::parse(&s).map_err(|_| serde::de::Error::custom(format!("invalid date `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateError;

impl fmt::Display for DateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid calendar date")
    }
}

impl std::error::Error for DateError {}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
            if leap {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

fn parse_digits(b: &[u8]) -> Option<u64> {
    if b.is_empty() {
        return None;
    }
    let mut v: u64 = 0;
    for &c in b {
        if !c.is_ascii_digit() {
            return None;
        }
        v = v.checked_mul(10)?.checked_add((c - b'0') as u64)?;
    }
    Some(v)
}

/// One price level of the book; `price == 0` encodes an absent level
/// (typical near limit prices, where one book side empties out).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BookLevel {
    pub price: Cents,
    pub volume: Shares,
}

/// Limit-order-book snapshot with `J` levels per side. Ask prices ascend
/// away from the touch, bid prices descend.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LobSnapshot {
    pub asks: Vec<BookLevel>,
    pub bids: Vec<BookLevel>,
}

impl LobSnapshot {
    /// Best ask price, skipping absent levels.
    pub fn best_ask(&self) -> Option<Cents> {
        self.asks.iter().find(|l| l.price > 0).map(|l| l.price)
    }

    /// Best bid price, skipping absent levels.
    pub fn best_bid(&self) -> Option<Cents> {
        self.bids.iter().find(|l| l.price > 0).map(|l| l.price)
    }

    /// Structural validity: non-negative fields, monotone nonzero price
    /// ladders, no volume on absent levels, and no crossed book. A locked
    /// book (`ask == bid`) is legal: that is exactly the state at a limit
    /// price.
    pub fn validate(&self) -> Result<(), LobError> {
        for side in [&self.asks, &self.bids] {
            for l in side.iter() {
                if l.price < 0 || l.volume < 0 {
                    return Err(LobError::NegativeField);
                }
                if l.price == 0 && l.volume != 0 {
                    return Err(LobError::VolumeOnAbsentLevel);
                }
            }
        }
        let mut prev: Option<Cents> = None;
        for l in self.asks.iter().filter(|l| l.price > 0) {
            if let Some(p) = prev {
                if l.price <= p {
                    return Err(LobError::AsksNotAscending);
                }
            }
            prev = Some(l.price);
        }
        prev = None;
        for l in self.bids.iter().filter(|l| l.price > 0) {
            if let Some(p) = prev {
                if l.price >= p {
                    return Err(LobError::BidsNotDescending);
                }
            }
            prev = Some(l.price);
        }
        if let (Some(a), Some(b)) = (self.best_ask(), self.best_bid()) {
            if a < b {
                return Err(LobError::CrossedBook);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobError {
    NegativeField,
    VolumeOnAbsentLevel,
    AsksNotAscending,
    BidsNotDescending,
    CrossedBook,
}

impl fmt::Display for LobError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LobError::NegativeField => "negative price or volume",
            LobError::VolumeOnAbsentLevel => "nonzero volume on absent level",
            LobError::AsksNotAscending => "ask prices not strictly ascending",
            LobError::BidsNotDescending => "bid prices not strictly descending",
            LobError::CrossedBook => "crossed book (best ask below best bid)",
        };
        f.write_str(s)
    }
}

/// One timestamped market observation: an optional trade plus the book.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickRecord {
    /// Seconds since midnight, exchange local.
    pub timestamp: u32,
    /// 0 when the record carries no trade.
    pub trade_price: Cents,
    /// 0 when the record carries no trade.
    pub trade_volume: Shares,
    pub lob: LobSnapshot,
}

impl TickRecord {
    pub fn has_trade(&self) -> bool {
        self.trade_price > 0
    }
}

/// All observations of one stock on one trading day plus daily metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StockDaySession {
    pub stock_id: String,
    pub date: Date,
    /// Previous trading day's close, cents.
    pub prev_close: Cents,
    pub shares_outstanding: Shares,
    pub is_ipo_day: bool,
    pub is_ex_dividend_day: bool,
    /// Next trading day's opening price; absent after a trading halt or at
    /// the end of the sample.
    pub next_day_open: Option<Cents>,
    /// Book depth of the source format (3 before late 2003, 5 after).
    pub levels: usize,
    /// Time-ordered, non-decreasing timestamps.
    pub ticks: Vec<TickRecord>,
}

impl StockDaySession {
    /// Capitalization in cent-shares: shares outstanding times previous
    /// close.
    pub fn capitalization(&self) -> i64 {
        self.shares_outstanding * self.prev_close
    }

    /// Last traded price of the day, if any trade occurred.
    pub fn last_trade_price(&self) -> Option<Cents> {
        self.ticks.iter().rev().find(|t| t.has_trade()).map(|t| t.trade_price)
    }
}

/// Aggressor side of a trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TradeDirection {
    BuyerInitiated,
    SellerInitiated,
    Unknown,
}

/// Infers the aggressor side of a trade: quote rule against the snapshot
/// immediately preceding the trade first, then the tick test against the
/// previous trade price.
///
/// Quote rule: at or above the standing best ask is buyer-initiated, at or
/// below the standing best bid is seller-initiated (checked in that order,
/// so a locked book resolves to the buyer). Tick test: up-tick buyer,
/// down-tick seller, zero-tick unknown. With no usable quotes and no
/// previous trade the side is unknown.
pub fn classify_trade_direction(
    tick: &TickRecord,
    prev_lob: Option<&LobSnapshot>,
    prev_trade_price: Option<Cents>,
) -> TradeDirection {
    debug_assert!(tick.has_trade());
    let p = tick.trade_price;
    if let Some(lob) = prev_lob {
        if let Some(ask) = lob.best_ask() {
            if p >= ask {
                return TradeDirection::BuyerInitiated;
            }
        }
        if let Some(bid) = lob.best_bid() {
            if p <= bid {
                return TradeDirection::SellerInitiated;
            }
        }
    }
    match prev_trade_price {
        Some(prev) if p > prev => TradeDirection::BuyerInitiated,
        Some(prev) if p < prev => TradeDirection::SellerInitiated,
        _ => TradeDirection::Unknown,
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// What went wrong with a single input row. The row is dropped, counted and
/// reported; the surrounding session keeps its other rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the source file.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Fatal ingestion failures: unreadable files, bad headers, rows that break
/// the (stock, date)-grouped ordering contract.
#[derive(Debug)]
pub enum ParseError {
    Io(std::io::Error),
    BadHeader(String),
    BadSidecar(String),
    UnsortedInput { line: usize, stock_id: String, date: Date },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Io(e) => write!(f, "i/o error: {e}"),
            ParseError::BadHeader(m) => write!(f, "bad tick header: {m}"),
            ParseError::BadSidecar(m) => write!(f, "bad sidecar: {m}"),
            ParseError::UnsortedInput { line, stock_id, date } => write!(
                f,
                "line {line}: rows for {stock_id} {date} reappear after the group was closed; \
                 input must be grouped by (stock_id, date)"
            ),
        }
    }
}

impl std::error::Error for ParseError {}

impl From<std::io::Error> for ParseError {
    fn from(e: std::io::Error) -> Self {
        ParseError::Io(e)
    }
}

/// Running ingestion tallies. Row errors are capped in storage but always
/// counted.
#[derive(Debug, Default, Clone)]
pub struct ParseReport {
    pub rows_total: u64,
    pub rows_valid: u64,
    pub row_error_count: u64,
    pub row_errors: Vec<RowError>,
    pub sessions_emitted: u64,
    /// Sessions dropped for missing sidecar metadata, as (stock_id, date).
    pub sessions_missing_metadata: Vec<(String, Date)>,
}

const MAX_STORED_ROW_ERRORS: usize = 1000;

impl ParseReport {
    fn push_row_error(&mut self, line: usize, message: String) {
        self.row_error_count += 1;
        if self.row_errors.len() < MAX_STORED_ROW_ERRORS {
            self.row_errors.push(RowError { line, message });
        }
    }
}

/// Per-stock-day metadata from the sidecar CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionMetadata {
    pub prev_close: Cents,
    pub shares_outstanding: Shares,
    pub is_ipo_day: bool,
    pub is_ex_dividend_day: bool,
    pub next_day_open: Option<Cents>,
}

/// Sidecar table keyed by (stock_id, date).
pub type SidecarTable = std::collections::HashMap<(String, Date), SessionMetadata>;

pub const SIDECAR_HEADER: &str =
    "stock_id,date,prev_close,shares_outstanding,is_ipo_day,is_ex_dividend_day,next_day_open";

/// Reads the whole sidecar file. Malformed sidecar rows are fatal: every
/// downstream number depends on this metadata.
pub fn read_sidecar(path: &Path) -> Result<SidecarTable, ParseError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != SIDECAR_HEADER {
        return Err(ParseError::BadSidecar(format!(
            "expected header `{SIDECAR_HEADER}`"
        )));
    }
    let mut table = SidecarTable::new();
    let mut lineno = 1usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let row = line.trim_end_matches(['\n', '\r']);
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 7 {
            return Err(ParseError::BadSidecar(format!(
                "line {lineno}: expected 7 fields, got {}",
                fields.len()
            )));
        }
        let stock_id = fields[0].to_string();
        let date = Date::parse(fields[1])
            .map_err(|_| ParseError::BadSidecar(format!("line {lineno}: bad date")))?;
        let prev_close = parse_price_cents(fields[2])
            .ok_or_else(|| ParseError::BadSidecar(format!("line {lineno}: bad prev_close")))?;
        if prev_close <= 0 {
            return Err(ParseError::BadSidecar(format!(
                "line {lineno}: prev_close must be positive"
            )));
        }
        let shares = parse_digits(fields[3].as_bytes())
            .ok_or_else(|| ParseError::BadSidecar(format!("line {lineno}: bad shares")))?
            as Shares;
        let is_ipo = parse_flag(fields[4])
            .ok_or_else(|| ParseError::BadSidecar(format!("line {lineno}: bad ipo flag")))?;
        let is_exdiv = parse_flag(fields[5])
            .ok_or_else(|| ParseError::BadSidecar(format!("line {lineno}: bad ex-div flag")))?;
        let next_open = if fields[6].is_empty() {
            None
        } else {
            Some(parse_price_cents(fields[6]).ok_or_else(|| {
                ParseError::BadSidecar(format!("line {lineno}: bad next_day_open"))
            })?)
        };
        table.insert(
            (stock_id, date),
            SessionMetadata {
                prev_close,
                shares_outstanding: shares,
                is_ipo_day: is_ipo,
                is_ex_dividend_day: is_exdiv,
                next_day_open: next_open,
            },
        );
    }
    Ok(table)
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

/// Parses a decimal-yuan price with exactly two fraction digits to cents.
pub fn parse_price_cents(s: &str) -> Option<Cents> {
    let b = s.as_bytes();
    let dot = b.iter().position(|&c| c == b'.')?;
    if b.len() != dot + 3 {
        return None;
    }
    let whole = parse_digits(&b[..dot])?;
    let frac = parse_digits(&b[dot + 1..])?;
    let cents = whole.checked_mul(100)?.checked_add(frac)?;
    i64::try_from(cents).ok()
}

/// Formats cents as decimal yuan with exactly two fraction digits.
pub fn format_price_cents(c: Cents) -> String {
    debug_assert!(c >= 0);
    format!("{}.{:02}", c / 100, c % 100)
}

fn parse_time_seconds(s: &str) -> Option<u32> {
    let b = s.as_bytes();
    if b.len() != 8 || b[2] != b':' || b[5] != b':' {
        return None;
    }
    let h = parse_digits(&b[0..2])? as u32;
    let m = parse_digits(&b[3..5])? as u32;
    let sec = parse_digits(&b[6..8])? as u32;
    if h > 23 || m > 59 || sec > 59 {
        return None;
    }
    Some(h * 3600 + m * 60 + sec)
}

pub fn format_time_seconds(ts: u32) -> String {
    format!("{:02}:{:02}:{:02}", ts / 3600, (ts / 60) % 60, ts % 60)
}

/// Builds the canonical tick-file header for a book depth of `levels`.
pub fn tick_header(levels: usize) -> String {
    let mut h = String::from("stock_id,date,time,trade_price,trade_volume");
    for j in 1..=levels {
        h.push_str(&format!(",ask_price_{j},ask_volume_{j}"));
    }
    for j in 1..=levels {
        h.push_str(&format!(",bid_price_{j},bid_volume_{j}"));
    }
    h
}

fn parse_tick_header(line: &str) -> Result<usize, ParseError> {
    for levels in [3usize, 5] {
        if line == tick_header(levels) {
            return Ok(levels);
        }
    }
    Err(ParseError::BadHeader(
        "header must list stock_id,date,time,trade_price,trade_volume then J ask and J bid \
         (price, volume) pairs with J in {3, 5}"
            .to_string(),
    ))
}

/// Appends one tick as a canonical CSV row (no trailing newline) to `out`.
/// `date_str` is the preformatted `YYYY-MM-DD` date column.
pub fn write_tick_row(out: &mut String, stock_id: &str, date_str: &str, tick: &TickRecord, levels: usize) {
    use fmt::Write;
    out.push_str(stock_id);
    out.push(',');
    out.push_str(date_str);
    let _ = write!(
        out,
        ",{},{}.{:02},{}",
        format_time_seconds(tick.timestamp),
        tick.trade_price / 100,
        tick.trade_price % 100,
        tick.trade_volume
    );
    for side in [&tick.lob.asks, &tick.lob.bids] {
        for j in 0..levels {
            let l = side.get(j).copied().unwrap_or_default();
            let _ = write!(out, ",{}.{:02},{}", l.price / 100, l.price % 100, l.volume);
        }
    }
}

/// Serializes one tick as a canonical CSV row (no trailing newline).
pub fn format_tick_row(stock_id: &str, date: Date, tick: &TickRecord, levels: usize) -> String {
    let mut row = String::new();
    write_tick_row(&mut row, stock_id, &date.to_string(), tick, levels);
    row
}

/// Serializes a whole session in canonical form, header included.
pub fn serialize_session(session: &StockDaySession) -> String {
    let mut out = tick_header(session.levels);
    out.push('\n');
    for t in &session.ticks {
        out.push_str(&format_tick_row(&session.stock_id, session.date, t, session.levels));
        out.push('\n');
    }
    out
}

struct ParsedRow {
    stock_id: String,
    date: Date,
    tick: TickRecord,
}

fn parse_tick_row(
    row: &str,
    levels: usize,
    windows: &SessionWindows,
) -> Result<ParsedRow, String> {
    let mut fields = row.split(',');
    let mut next = |name: &str| fields.next().ok_or_else(|| format!("missing field {name}"));
    let stock_id = next("stock_id")?;
    if stock_id.len() != 6 || !stock_id.bytes().all(|c| c.is_ascii_digit()) {
        return Err("stock_id must be 6 digits".to_string());
    }
    let date = Date::parse(next("date")?).map_err(|_| "bad date".to_string())?;
    let timestamp =
        parse_time_seconds(next("time")?).ok_or_else(|| "bad time".to_string())?;
    if timestamp < windows.session_start || timestamp > windows.close {
        return Err(format!(
            "timestamp outside trading session [{}, {}]",
            format_time_seconds(windows.session_start),
            format_time_seconds(windows.close)
        ));
    }
    let trade_price =
        parse_price_cents(next("trade_price")?).ok_or_else(|| "bad trade_price".to_string())?;
    let trade_volume = parse_digits(next("trade_volume")?.as_bytes())
        .ok_or_else(|| "bad trade_volume".to_string())? as Shares;
    if (trade_price > 0) != (trade_volume > 0) {
        return Err("trade price and volume must be both present or both zero".to_string());
    }
    let mut lob = LobSnapshot {
        asks: Vec::with_capacity(levels),
        bids: Vec::with_capacity(levels),
    };
    for j in 0..2 * levels {
        let price = parse_price_cents(next("book price")?)
            .ok_or_else(|| format!("bad book price in field {}", 6 + 2 * j))?;
        let volume = parse_digits(next("book volume")?.as_bytes())
            .ok_or_else(|| format!("bad book volume in field {}", 7 + 2 * j))?
            as Shares;
        let level = BookLevel { price, volume };
        if j < levels {
            lob.asks.push(level);
        } else {
            lob.bids.push(level);
        }
    }
    if fields.next().is_some() {
        return Err(format!("expected {} fields", 5 + 4 * levels));
    }
    lob.validate().map_err(|e| e.to_string())?;
    Ok(ParsedRow {
        stock_id: stock_id.to_string(),
        date,
        tick: TickRecord { timestamp, trade_price, trade_volume, lob },
    })
}

/// Streaming session reader over a tick CSV plus its sidecar.
///
/// Rows must arrive grouped by `(stock_id, date)` (the canonical order is
/// sorted by stock, date, time); ticks inside one group are sorted by
/// timestamp in memory with a stable sort. Sessions are yielded one at a
/// time so arbitrarily large corpora parse in bounded memory.
pub struct SessionReader {
    reader: BufReader<File>,
    windows: SessionWindows,
    levels: usize,
    sidecar: SidecarTable,
    report: ParseReport,
    lineno: usize,
    current: Option<(String, Date, Vec<TickRecord>)>,
    seen_groups: std::collections::HashSet<(String, Date)>,
    pending: Option<ParsedRow>,
    line_buf: String,
    done: bool,
}

impl SessionReader {
    pub fn open(
        tick_path: &Path,
        sidecar_path: &Path,
        windows: SessionWindows,
    ) -> Result<SessionReader, ParseError> {
        let sidecar = read_sidecar(sidecar_path)?;
        let file = File::open(tick_path)?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let levels = parse_tick_header(header.trim_end())?;
        Ok(SessionReader {
            reader,
            windows,
            levels,
            sidecar,
            report: ParseReport::default(),
            lineno: 1,
            current: None,
            seen_groups: std::collections::HashSet::new(),
            pending: None,
            line_buf: String::with_capacity(256),
            done: false,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn report(&self) -> &ParseReport {
        &self.report
    }

    pub fn into_report(self) -> ParseReport {
        self.report
    }

    /// Yields the next complete session, or `None` at end of input.
    pub fn next_session(&mut self) -> Result<Option<StockDaySession>, ParseError> {
        loop {
            let row = match self.pending.take() {
                Some(r) => Some(r),
                None => self.read_row()?,
            };
            match row {
                None => {
                    // input exhausted; flush the open group
                    return match self.current.take() {
                        Some(group) => Ok(self.finish_group(group)),
                        None => Ok(None),
                    };
                }
                Some(parsed) => {
                    let key_matches = self
                        .current
                        .as_ref()
                        .map(|(s, d, _)| *s == parsed.stock_id && *d == parsed.date)
                        .unwrap_or(false);
                    if key_matches {
                        self.current.as_mut().unwrap().2.push(parsed.tick);
                        continue;
                    }
                    let key = (parsed.stock_id.clone(), parsed.date);
                    if self.seen_groups.contains(&key) {
                        return Err(ParseError::UnsortedInput {
                            line: self.lineno,
                            stock_id: parsed.stock_id,
                            date: parsed.date,
                        });
                    }
                    self.seen_groups.insert(key);
                    let finished = self.current.take();
                    self.current = Some((parsed.stock_id.clone(), parsed.date, vec![]));
                    match finished {
                        Some(group) => {
                            self.pending = Some(ParsedRow {
                                stock_id: parsed.stock_id,
                                date: parsed.date,
                                tick: parsed.tick,
                            });
                            if let Some(session) = self.finish_group(group) {
                                return Ok(Some(session));
                            }
                            // metadata was missing; keep scanning
                            let p = self.pending.take().unwrap();
                            self.current.as_mut().unwrap().2.push(p.tick);
                        }
                        None => {
                            self.current.as_mut().unwrap().2.push(parsed.tick);
                        }
                    }
                }
            }
        }
    }

    fn read_row(&mut self) -> Result<Option<ParsedRow>, ParseError> {
        if self.done {
            return Ok(None);
        }
        loop {
            self.line_buf.clear();
            if self.reader.read_line(&mut self.line_buf)? == 0 {
                self.done = true;
                return Ok(None);
            }
            self.lineno += 1;
            let row = self.line_buf.trim_end_matches(['\n', '\r']);
            if row.is_empty() {
                continue;
            }
            self.report.rows_total += 1;
            match parse_tick_row(row, self.levels, &self.windows) {
                Ok(parsed) => {
                    self.report.rows_valid += 1;
                    return Ok(Some(parsed));
                }
                Err(msg) => {
                    self.report.push_row_error(self.lineno, msg);
                }
            }
        }
    }

    fn finish_group(
        &mut self,
        (stock_id, date, mut ticks): (String, Date, Vec<TickRecord>),
    ) -> Option<StockDaySession> {
        ticks.sort_by_key(|t| t.timestamp); // stable: equal timestamps keep file order
        let meta = match self.sidecar.get(&(stock_id.clone(), date)) {
            Some(m) => m.clone(),
            None => {
                self.report.sessions_missing_metadata.push((stock_id, date));
                return None;
            }
        };
        self.report.sessions_emitted += 1;
        Some(StockDaySession {
            stock_id,
            date,
            prev_close: meta.prev_close,
            shares_outstanding: meta.shares_outstanding,
            is_ipo_day: meta.is_ipo_day,
            is_ex_dividend_day: meta.is_ex_dividend_day,
            next_day_open: meta.next_day_open,
            levels: self.levels,
            ticks,
        })
    }
}

/// Convenience wrapper: parses everything into memory. Intended for tests
/// and small corpora; the streaming [`SessionReader`] is the production
/// path.
pub fn parse_tick_file(
    tick_path: &Path,
    sidecar_path: &Path,
    windows: SessionWindows,
) -> Result<(Vec<StockDaySession>, ParseReport), ParseError> {
    let mut reader = SessionReader::open(tick_path, sidecar_path, windows)?;
    let mut sessions = Vec::new();
    while let Some(s) = reader.next_session()? {
        sessions.push(s);
    }
    Ok((sessions, reader.into_report()))
}
