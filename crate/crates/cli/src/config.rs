//! Run configuration: a flat key=value file with `--set` overrides.
//!
//! Every analytic parameter is pinned here with its default, and the
//! effective configuration is hashed into each report header so outputs
//! are traceable to their settings. Execution knobs (`threads`,
//! `out_dir`) stay out of the hash: they must not change any emitted
//! byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use limithit_core::aggregation::RegimeCalendar;
use limithit_core::market_data::{format_time_seconds, Date, SessionWindows};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ticks: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: usize,
    /// Tick size in cents; informational (all prices are integer cents).
    pub tick_size_cents: i64,
    /// Daily limit band in basis points.
    pub limit_bp: i64,
    pub windows: SessionWindows,
    pub portfolios: usize,
    pub bin_minutes: u32,
    pub event_window: usize,
    pub velocity_subintervals: usize,
    /// Histogram bin width for `fit`; absent means range/50.
    pub fit_bin_width: Option<f64>,
    pub calendar_start: Date,
    pub calendar_end: Date,
    /// Inclusive bull windows; everything else in coverage is bear.
    pub bull_windows: Vec<(Date, Date)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let calendar = RegimeCalendar::cn_a_share_default();
        RunConfig {
            ticks: None,
            sidecar: None,
            out_dir: PathBuf::from("out"),
            threads: 1,
            tick_size_cents: 1,
            limit_bp: 1000,
            windows: SessionWindows::default(),
            portfolios: 6,
            bin_minutes: 5,
            event_window: 100,
            velocity_subintervals: 10,
            fit_bin_width: None,
            calendar_start: Date::parse("1990-01-01").unwrap(),
            calendar_end: Date::parse("2099-12-31").unwrap(),
            bull_windows: calendar.bull_windows().to_vec(),
        }
    }
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {path:?}: {e}")))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!("config line {}: expected key=value", lineno + 1))
                })?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |m: String| CliError::Config(m);
        let parse_time = |v: &str| {
            parse_hms(v).ok_or_else(|| bad(format!("`{key}`: expected HH:MM:SS, got `{value}`")))
        };
        match key {
            "ticks" => self.ticks = Some(PathBuf::from(value)),
            "sidecar" => self.sidecar = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "threads" => self.threads = parse_num(value)?,
            "tick_size_cents" => self.tick_size_cents = parse_num(value)?,
            "limit_bp" => self.limit_bp = parse_num(value)?,
            "session_start" => self.windows.session_start = parse_time(value)?,
            "open_end" => self.windows.open_end = parse_time(value)?,
            "am_end" => self.windows.am_end = parse_time(value)?,
            "pm_start" => self.windows.pm_start = parse_time(value)?,
            "close" => self.windows.close = parse_time(value)?,
            "portfolios" => self.portfolios = parse_num(value)?,
            "bin_minutes" => self.bin_minutes = parse_num(value)?,
            "event_window" => self.event_window = parse_num(value)?,
            "velocity_subintervals" => self.velocity_subintervals = parse_num(value)?,
            "fit_bin_width" => {
                self.fit_bin_width = if value == "auto" {
                    None
                } else {
                    let w: f64 = value
                        .parse()
                        .map_err(|_| bad(format!("`fit_bin_width`: bad number `{value}`")))?;
                    Some(w)
                }
            }
            "calendar_start" => {
                self.calendar_start = Date::parse(value)
                    .map_err(|_| bad(format!("`calendar_start`: bad date `{value}`")))?
            }
            "calendar_end" => {
                self.calendar_end = Date::parse(value)
                    .map_err(|_| bad(format!("`calendar_end`: bad date `{value}`")))?
            }
            "bull_windows" => {
                let mut windows = Vec::new();
                for span in value.split(';').filter(|s| !s.is_empty()) {
                    let (a, b) = span
                        .split_once("..")
                        .ok_or_else(|| bad(format!("`bull_windows`: expected start..end in `{span}`")))?;
                    let start = Date::parse(a)
                        .map_err(|_| bad(format!("`bull_windows`: bad date `{a}`")))?;
                    let end = Date::parse(b)
                        .map_err(|_| bad(format!("`bull_windows`: bad date `{b}`")))?;
                    windows.push((start, end));
                }
                self.bull_windows = windows;
            }
            _ => return Err(bad(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        if !self.windows.is_valid() {
            return Err(CliError::Config(
                "session windows must be ordered: session_start < open_end < am_end < pm_start < close"
                    .into(),
            ));
        }
        if !(1..10_000).contains(&self.limit_bp) {
            return Err(CliError::Config("limit_bp must be in (0, 10000)".into()));
        }
        if self.threads == 0 || self.threads > 512 {
            return Err(CliError::Config("threads must be in 1..=512".into()));
        }
        if self.portfolios == 0 || self.event_window == 0 || self.velocity_subintervals == 0 {
            return Err(CliError::Config(
                "portfolios, event_window and velocity_subintervals must be positive".into(),
            ));
        }
        if let Some(w) = self.fit_bin_width {
            if !(w > 0.0) {
                return Err(CliError::Config("fit_bin_width must be positive or `auto`".into()));
            }
        }
        Ok(())
    }

    pub fn calendar(&self) -> Result<RegimeCalendar, CliError> {
        RegimeCalendar::new(self.calendar_start, self.calendar_end, self.bull_windows.clone())
            .map_err(|e| CliError::Config(format!("bad regime calendar: {e}")))
    }

    pub fn ticks_path(&self) -> Result<&Path, CliError> {
        self.ticks
            .as_deref()
            .ok_or_else(|| CliError::Config("`ticks` input path is not set".into()))
    }

    pub fn sidecar_path(&self) -> Result<&Path, CliError> {
        self.sidecar
            .as_deref()
            .ok_or_else(|| CliError::Config("`sidecar` input path is not set".into()))
    }

    /// Canonical key=value rendering of every analytic parameter, in fixed
    /// order. Execution knobs are listed separately and never hashed.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        let _ = writeln!(s, "ticks={}", path(&self.ticks));
        let _ = writeln!(s, "sidecar={}", path(&self.sidecar));
        let _ = writeln!(s, "tick_size_cents={}", self.tick_size_cents);
        let _ = writeln!(s, "limit_bp={}", self.limit_bp);
        let _ = writeln!(s, "session_start={}", format_time_seconds(self.windows.session_start));
        let _ = writeln!(s, "open_end={}", format_time_seconds(self.windows.open_end));
        let _ = writeln!(s, "am_end={}", format_time_seconds(self.windows.am_end));
        let _ = writeln!(s, "pm_start={}", format_time_seconds(self.windows.pm_start));
        let _ = writeln!(s, "close={}", format_time_seconds(self.windows.close));
        let _ = writeln!(s, "portfolios={}", self.portfolios);
        let _ = writeln!(s, "bin_minutes={}", self.bin_minutes);
        let _ = writeln!(s, "event_window={}", self.event_window);
        let _ = writeln!(s, "velocity_subintervals={}", self.velocity_subintervals);
        let _ = writeln!(
            s,
            "fit_bin_width={}",
            self.fit_bin_width.map(|w| w.to_string()).unwrap_or_else(|| "auto".into())
        );
        let _ = writeln!(s, "calendar_start={}", self.calendar_start);
        let _ = writeln!(s, "calendar_end={}", self.calendar_end);
        let windows: Vec<String> =
            self.bull_windows.iter().map(|(a, b)| format!("{a}..{b}")).collect();
        let _ = writeln!(s, "bull_windows={}", windows.join(";"));
        s
    }

    /// FNV-1a hash of the canonical analytic configuration.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("bad numeric value `{v}`")))
}

fn parse_hms(v: &str) -> Option<u32> {
    let b = v.as_bytes();
    if b.len() != 8 || b[2] != b':' || b[5] != b':' {
        return None;
    }
    let num = |s: &[u8]| -> Option<u32> {
        if s.iter().all(|c| c.is_ascii_digit()) {
            Some((s[0] - b'0') as u32 * 10 + (s[1] - b'0') as u32)
        } else {
            None
        }
    };
    let (h, m, sec) = (num(&b[0..2])?, num(&b[3..5])?, num(&b[6..8])?);
    if h > 23 || m > 59 || sec > 59 {
        return None;
    }
    Some(h * 3600 + m * 60 + sec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_canonical() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.limit_bp, 1000);
        assert_eq!(cfg.bin_minutes, 5);
        assert_eq!(cfg.event_window, 100);
        assert!(cfg.canonical().contains("open_end=09:30:00"));
        assert!(cfg.canonical().contains("bull_windows=2000-01-04..2001-06-13;"));
        // the hash must not move when only execution knobs change
        let mut moved = cfg.clone();
        moved.threads = 8;
        moved.out_dir = PathBuf::from("elsewhere");
        assert_eq!(cfg.hash(), moved.hash());
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = RunConfig::load(
            None,
            &[
                ("limit_bp".into(), "500".into()),
                ("bin_minutes".into(), "10".into()),
                ("bull_windows".into(), "2001-01-01..2001-12-31".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.limit_bp, 500);
        assert_eq!(cfg.bin_minutes, 10);
        assert_eq!(cfg.bull_windows.len(), 1);
        assert!(RunConfig::load(None, &[("threads".into(), "0".into())]).is_err());
        assert!(RunConfig::load(None, &[("nope".into(), "1".into())]).is_err());
        assert!(RunConfig::load(None, &[("open_end".into(), "9:30:00".into())]).is_err());
    }
}
