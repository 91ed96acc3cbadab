//! Subcommand implementations. Each command re-runs the streaming pipeline
//! over the configured inputs and emits plot-ready CSV/JSON; nothing is
//! persisted between commands.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;

use limithit_core::aggregation::{
    build_portfolio_map, intraday_pattern, per_stock_stats, summarize_pooled, tabulate_counters,
    HitCounters, RegimeScope, Scope,
};
use limithit_core::distfit::{estimate_pdf, fit_mle, fit_ols, DistFitError, TruncNormalFit};
use limithit_core::limit_engine::{DayHitRecord, HitDirection};
use limithit_core::market_data::format_time_seconds;
use limithit_core::prehit::{event_study, velocity_profile, HitClass};
use limithit_core::synthgen;

use crate::config::RunConfig;
use crate::pipeline::{run_pipeline, PipelineOutput};
use crate::reports::{opt_f64, ReportWriter};
use crate::CliError;

fn scope_label(scope: Scope) -> String {
    match scope.portfolio {
        None => "all".to_string(),
        Some(j) => format!("p{j}"),
    }
}

fn all_scopes(portfolios: usize) -> Vec<Scope> {
    let mut scopes = Vec::new();
    for regime in RegimeScope::ALL {
        scopes.push(Scope { regime, portfolio: None });
        for j in 1..=portfolios as u8 {
            scopes.push(Scope { regime, portfolio: Some(j) });
        }
    }
    scopes
}

fn warn_session_errors(out: &PipelineOutput) {
    if !out.session_errors.is_empty() {
        eprintln!(
            "warning: {} session(s) skipped with errors; run `validate` for details",
            out.session_errors.len()
        );
    }
}

/// `validate`: ingest everything, report counts and defects, emit
/// `validate.json`. Exits nonzero only on fatal format errors, which
/// surface as `CliError::Data` before this function returns.
pub fn cmd_validate(cfg: &RunConfig) -> Result<(), CliError> {
    print!("{}", cfg.canonical());
    println!("threads={}", cfg.threads);
    println!("out_dir={}", cfg.out_dir.display());
    let out = run_pipeline(cfg, false)?;
    let writer = ReportWriter::new(cfg)?;
    println!("rows_total={}", out.rows_total);
    println!("rows_valid={}", out.rows_valid);
    println!("row_errors={}", out.row_error_count);
    for e in out.row_errors.iter().take(20) {
        println!("  row error: {e}");
    }
    println!("sessions={}", out.session_inventory.len());
    println!("sessions_missing_metadata={}", out.sessions_missing_metadata);
    println!("session_errors={}", out.session_errors.len());
    for e in out.session_errors.iter().take(20) {
        println!("  session error: {e}");
    }
    println!("hit_days={}", out.records.len());
    let doc = json!({
        "rows_total": out.rows_total,
        "rows_valid": out.rows_valid,
        "row_errors": out.row_error_count,
        "row_error_messages": out.row_errors,
        "sessions_missing_metadata": out.sessions_missing_metadata,
        "session_errors": out.session_errors,
        "hit_days": out.records.len(),
        "sessions": out.session_inventory.iter().map(|(stock_id, date, ticks)| json!({
            "stock_id": stock_id,
            "date": date.to_string(),
            "ticks": ticks,
        })).collect::<Vec<_>>(),
    });
    let path = writer.json("validate.json", &doc)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn hit_csv_row(r: &DayHitRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.stock_id,
        r.date,
        r.direction.as_str(),
        r.m_up(),
        r.m_down(),
        r.total_duration(HitDirection::Up),
        r.total_duration(HitDirection::Down),
        r.span(HitDirection::Up),
        r.span(HitDirection::Down),
        r.first_hit_window.as_str(),
        r.closed_at_limit as u8,
        r.close_direction.map(|d| d.as_str()).unwrap_or(""),
        r.next_day_class.as_str()
    )
}

pub const HIT_CSV_COLUMNS: &str = "stock_id,date,direction,m_up,m_down,dt_up_s,dt_down_s,\
span_up_s,span_down_s,first_window,closed_at_limit,close_direction,next_day_class";

/// `hits`: per-day hit records.
pub fn cmd_hits(cfg: &RunConfig) -> Result<(), CliError> {
    let out = run_pipeline(cfg, false)?;
    warn_session_errors(&out);
    let writer = ReportWriter::new(cfg)?;
    let path = writer.csv("hits.csv", HIT_CSV_COLUMNS, out.records.iter().map(hit_csv_row))?;
    eprintln!("wrote {} ({} hit days)", path.display(), out.records.len());
    Ok(())
}

/// `summary`: counter table, pooled statistics table, per-stock statistics.
pub fn cmd_summary(cfg: &RunConfig) -> Result<(), CliError> {
    let out = run_pipeline(cfg, false)?;
    warn_session_errors(&out);
    let writer = ReportWriter::new(cfg)?;
    let calendar = cfg.calendar()?;
    let portfolios = build_portfolio_map(&out.records, &out.metas, cfg.portfolios)
        .map_err(|e| CliError::Data(e.to_string()))?;

    // counters, one column group per scope
    let mut per_scope: Vec<(Scope, HitCounters)> = Vec::new();
    for scope in all_scopes(cfg.portfolios) {
        let counters =
            tabulate_counters(&out.records, &out.metas, &calendar, &portfolios, scope)
                .map_err(|e| CliError::Data(e.to_string()))?;
        per_scope.push((scope, counters));
    }
    let mut columns = String::from("panel,counter");
    for (scope, _) in per_scope.iter().take(1 + cfg.portfolios) {
        let label = scope_label(*scope);
        columns.push_str(&format!(",{label}_up,{label}_down"));
    }
    let counter_rows = |regime: RegimeScope| -> Vec<String> {
        let group: Vec<&(Scope, HitCounters)> =
            per_scope.iter().filter(|(s, _)| s.regime == regime).collect();
        let panel = regime.as_str();
        let mut rows = Vec::new();
        let mut push_row = |name: &str, value: &dyn Fn(&HitCounters, HitDirection) -> String| {
            let mut row = format!("{panel},{name}");
            for (_, c) in &group {
                row.push_str(&format!(
                    ",{},{}",
                    value(c, HitDirection::Up),
                    value(c, HitDirection::Down)
                ));
            }
            rows.push(row);
        };
        push_row("n", &|c, d| c.direction(d).n.to_string());
        push_row("mean_n", &|c, d| opt_f64(c.mean_n(d)));
        push_row("n_con", &|c, d| c.direction(d).n_con.to_string());
        push_row("n_rev", &|c, d| c.direction(d).n_rev.to_string());
        push_row("n_open", &|c, d| c.direction(d).n_open.to_string());
        push_row("n_am", &|c, d| c.direction(d).n_am.to_string());
        push_row("n_pm", &|c, d| c.direction(d).n_pm.to_string());
        push_row("n_close", &|c, d| c.direction(d).n_close.to_string());
        push_row("n_close_con", &|c, d| c.direction(d).n_close_con.to_string());
        push_row("n_close_rev", &|c, d| c.direction(d).n_close_rev.to_string());
        rows
    };
    let rows: Vec<String> = RegimeScope::ALL.iter().flat_map(|r| counter_rows(*r)).collect();
    writer.csv("table1.csv", &columns, rows)?;
    let columns = columns.replacen("panel,counter", "panel,statistic", 1);

    // pooled max/mean/median table
    let cells = summarize_pooled(&out.records, &calendar, &portfolios, cfg.portfolios)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let mut rows = Vec::new();
    let stats = [
        ("max_m", 0usize, 0usize),
        ("mean_m", 0, 1),
        ("med_m", 0, 2),
        ("max_dt_s", 1, 0),
        ("mean_dt_s", 1, 1),
        ("med_dt_s", 1, 2),
        ("max_span_stock_s", 2, 0),
        ("mean_span_stock_s", 2, 1),
        ("med_span_stock_s", 2, 2),
        ("max_span_day_s", 3, 0),
        ("mean_span_day_s", 3, 1),
        ("med_span_day_s", 3, 2),
    ];
    for regime in RegimeScope::ALL {
        for (name, field, which) in stats {
            let mut row = format!("{},{name}", regime.as_str());
            for scope in all_scopes(cfg.portfolios).into_iter().filter(|s| s.regime == regime) {
                for direction in [HitDirection::Up, HitDirection::Down] {
                    let cell = cells
                        .iter()
                        .find(|c| c.scope == scope && c.direction == direction)
                        .expect("every scope is summarized");
                    let s = match field {
                        0 => &cell.m,
                        1 => &cell.duration,
                        2 => &cell.span_per_stock,
                        _ => &cell.span_per_day,
                    };
                    let v = s.as_ref().map(|s| match which {
                        0 => s.max,
                        1 => s.mean,
                        _ => s.median,
                    });
                    row.push(',');
                    row.push_str(&opt_f64(v));
                }
            }
            rows.push(row);
        }
    }
    writer.csv("table2.csv", &columns, rows)?;

    // per-stock statistics
    let stats = per_stock_stats(&out.records, &out.metas);
    let rows = stats.iter().map(|s| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.stock_id,
            s.t_days,
            s.k_days,
            s.k_up,
            s.k_down,
            s.hit_prob,
            s.hit_prob_up,
            s.hit_prob_down,
            opt_f64(s.mean_m_up),
            opt_f64(s.mean_m_down),
            opt_f64(s.mean_duration_up),
            opt_f64(s.mean_duration_down),
            opt_f64(s.mean_span_up),
            opt_f64(s.mean_span_down)
        )
    });
    writer.csv(
        "per_stock.csv",
        "stock_id,t_days,k_days,k_up,k_down,hit_prob,hit_prob_up,hit_prob_down,mean_m_up,\
         mean_m_down,mean_dt_up_s,mean_dt_down_s,mean_span_up_s,mean_span_down_s",
        rows,
    )?;
    eprintln!("wrote table1.csv, table2.csv, per_stock.csv in {}", cfg.out_dir.display());
    Ok(())
}

/// `intraday`: first-hit occurrence counts per intraday bin.
pub fn cmd_intraday(cfg: &RunConfig) -> Result<(), CliError> {
    let out = run_pipeline(cfg, false)?;
    warn_session_errors(&out);
    let writer = ReportWriter::new(cfg)?;
    let calendar = cfg.calendar()?;
    let pattern = intraday_pattern(&out.records, &calendar, cfg.bin_minutes, &cfg.windows)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let rows = pattern.bins.iter().map(|b| {
        format!(
            "{},{},{},{},{},{},{}",
            format_time_seconds(b.start),
            b.c_up,
            b.c_down,
            b.c_up_bull,
            b.c_up_bear,
            b.c_down_bull,
            b.c_down_bear
        )
    });
    let path =
        writer.csv("intraday.csv", "bin_start,c_up,c_down,c_up_bull,c_up_bear,c_down_bull,c_down_bear", rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Value series selected by `fit --target`.
fn fit_series(target: &str, out: &PipelineOutput) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let records = &out.records;
    let series: Vec<(String, Vec<f64>)> = match target {
        "hit_prob" => {
            let stats = per_stock_stats(records, &out.metas);
            vec![
                ("any".into(), stats.iter().map(|s| s.hit_prob).collect()),
                ("up".into(), stats.iter().map(|s| s.hit_prob_up).collect()),
                ("down".into(), stats.iter().map(|s| s.hit_prob_down).collect()),
            ]
        }
        "daily_hits" => vec![
            (
                "up".into(),
                records.iter().filter(|r| r.m_up() > 0).map(|r| r.m_up() as f64).collect(),
            ),
            (
                "down".into(),
                records.iter().filter(|r| r.m_down() > 0).map(|r| r.m_down() as f64).collect(),
            ),
        ],
        "duration" => {
            let segs = |dir| {
                records
                    .iter()
                    .flat_map(move |r: &DayHitRecord| r.segments(dir))
                    .map(|s| s.duration as f64)
                    .collect::<Vec<f64>>()
            };
            vec![("up".into(), segs(HitDirection::Up)), ("down".into(), segs(HitDirection::Down))]
        }
        "span" => {
            let spans = |dir| {
                records
                    .iter()
                    .filter(move |r: &&DayHitRecord| !r.segments(dir).is_empty())
                    .map(|r| r.span(dir) as f64)
                    .collect::<Vec<f64>>()
            };
            vec![("up".into(), spans(HitDirection::Up)), ("down".into(), spans(HitDirection::Down))]
        }
        "per_stock_means" => {
            let stats = per_stock_stats(records, &out.metas);
            let pick = |f: &dyn Fn(&limithit_core::aggregation::StockHitStats) -> Option<f64>| {
                stats.iter().filter_map(f).collect::<Vec<f64>>()
            };
            vec![
                ("m_up".into(), pick(&|s| s.mean_m_up)),
                ("m_down".into(), pick(&|s| s.mean_m_down)),
                ("dt_up".into(), pick(&|s| s.mean_duration_up)),
                ("dt_down".into(), pick(&|s| s.mean_duration_down)),
                ("span_up".into(), pick(&|s| s.mean_span_up)),
                ("span_down".into(), pick(&|s| s.mean_span_down)),
            ]
        }
        _ => {
            return Err(CliError::Usage(format!(
                "unknown fit target `{target}`; expected hit_prob, daily_hits, duration, span \
                 or per_stock_means"
            )))
        }
    };
    Ok(series)
}

fn fit_to_json(fit: Result<TruncNormalFit, DistFitError>) -> (serde_json::Value, bool) {
    match fit {
        Ok(f) => (serde_json::to_value(f).expect("fit serializes"), false),
        Err(e) => {
            let hard = matches!(e, DistFitError::NonConvergence { .. });
            (json!({ "error": e.to_string() }), hard)
        }
    }
}

/// `fit`: empirical histogram plus truncated-normal fits by OLS and MLE
/// for the chosen value series.
pub fn cmd_fit(cfg: &RunConfig, target: &str) -> Result<(), CliError> {
    let out = run_pipeline(cfg, false)?;
    warn_session_errors(&out);
    let writer = ReportWriter::new(cfg)?;
    let mut numerical_failure = false;
    for (name, values) in fit_series(target, &out)? {
        // the truncated model lives on (0, inf); zeros stay out of the
        // histogram and the fits
        let positive: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
        let base = format!("{target}_{name}");
        if positive.is_empty() {
            writer.json(
                &format!("fit_{base}.json"),
                &json!({
                    "target": target, "series": name, "n": 0,
                    "error": "no positive values in scope",
                }),
            )?;
            continue;
        }
        let max = positive.iter().cloned().fold(f64::MIN, f64::max);
        let bin_width = cfg.fit_bin_width.unwrap_or(max / 50.0);
        let hist = estimate_pdf(&positive, bin_width)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        writer.csv(
            &format!("hist_{base}.csv"),
            "bin_center,density",
            hist.bins.iter().map(|b| format!("{},{}", b.center, b.density)),
        )?;
        let (ols, ols_hard) = fit_to_json(fit_ols(&hist.points()));
        let (mle, mle_hard) = fit_to_json(fit_mle(&positive));
        numerical_failure |= ols_hard || mle_hard;
        writer.json(
            &format!("fit_{base}.json"),
            &json!({
                "target": target,
                "series": name,
                "n": positive.len(),
                "bin_width": bin_width,
                "ols": ols,
                "mle": mle,
            }),
        )?;
    }
    if numerical_failure {
        return Err(CliError::Numerical("a fit failed to converge; see fit output".into()));
    }
    eprintln!("wrote fit outputs for target `{target}` in {}", cfg.out_dir.display());
    Ok(())
}

/// `prehit`: velocity profiles and event-study series per class, plus the
/// exclusion report.
pub fn cmd_prehit(cfg: &RunConfig) -> Result<(), CliError> {
    let out = run_pipeline(cfg, true)?;
    warn_session_errors(&out);
    let writer = ReportWriter::new(cfg)?;
    let mut summary = BTreeMap::new();
    for class in HitClass::ALL {
        let name = class.as_str();
        let velocity_events = out.velocity_events.get(name).map(Vec::as_slice).unwrap_or(&[]);
        if let Some(profile) = velocity_profile(class, velocity_events, cfg.velocity_subintervals) {
            writer.csv(
                &format!("velocity_{name}.csv"),
                "m,v_m",
                profile.velocities.iter().enumerate().map(|(m, v)| format!("{m},{v}")),
            )?;
        }
        let study_events = out.study_events.get(name).map(Vec::as_slice).unwrap_or(&[]);
        // distribution of the log size of the trade that prints at the
        // limit, one sample per event
        if !study_events.is_empty() {
            let log_sizes: Vec<f64> = study_events
                .iter()
                .map(|ev| (ev.sizes[cfg.event_window] as f64).ln())
                .collect();
            let max = log_sizes.iter().cloned().fold(f64::MIN, f64::max);
            if max > 0.0 {
                let width = cfg.fit_bin_width.unwrap_or(max / 50.0);
                let hist = estimate_pdf(&log_sizes, width)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                writer.csv(
                    &format!("hist_hit_trade_size_{name}.csv"),
                    "bin_center,density",
                    hist.bins.iter().map(|b| format!("{},{}", b.center, b.density)),
                )?;
            }
        }
        if let Some(series) = event_study(class, study_events, cfg.event_window) {
            writer.csv(
                &format!("events_{name}.csv"),
                "k,s_plus,s_minus,r,v,spread,n_plus,n_minus,n_spread",
                (1..=series.window).map(|k| {
                    let i = k - 1;
                    format!(
                        "{k},{},{},{},{},{},{},{},{}",
                        opt_f64(series.s_plus[i]),
                        opt_f64(series.s_minus[i]),
                        series.ret[i],
                        series.vol[i],
                        opt_f64(series.spread[i]),
                        series.n_plus[i],
                        series.n_minus[i],
                        series.n_spread[i]
                    )
                }),
            )?;
        }
        let mut excl = BTreeMap::new();
        for ((c, reason), count) in &out.exclusions {
            if *c == name {
                excl.insert(reason.to_string(), *count);
            }
        }
        summary.insert(
            name.to_string(),
            json!({
                "velocity_events": velocity_events.len(),
                "study_events": study_events.len(),
                "excluded": excl,
            }),
        );
    }
    let path = writer.json("prehit_exclusions.json", &summary)?;
    eprintln!("wrote prehit outputs in {}", cfg.out_dir.display());
    let _ = path;
    Ok(())
}

/// `synth`: generate a corpus from a scenario file, or from the bundled
/// demo builder.
pub fn cmd_synth(
    cfg: &RunConfig,
    scenario_path: Option<&Path>,
    demo: Option<(usize, usize, u64)>,
) -> Result<(), CliError> {
    let spec = match (scenario_path, demo) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {path:?}: {e}")))?;
            serde_json::from_str::<synthgen::ScenarioSpec>(&text)
                .map_err(|e| CliError::Data(format!("bad scenario: {e}")))?
        }
        (None, Some((stocks, days, seed))) => {
            let spec = synthgen::demo::demo_scenario(stocks, days, seed);
            let path = cfg.out_dir.join("scenario.json");
            std::fs::create_dir_all(&cfg.out_dir)
                .map_err(|e| CliError::Data(format!("cannot create {:?}: {e}", cfg.out_dir)))?;
            std::fs::write(&path, serde_json::to_string_pretty(&spec).expect("spec serializes"))
                .map_err(|e| CliError::Data(format!("cannot write {path:?}: {e}")))?;
            spec
        }
        _ => {
            return Err(CliError::Usage(
                "synth needs a scenario file or --demo (not both)".into(),
            ))
        }
    };
    let corpus = synthgen::generate(&spec, &cfg.out_dir)
        .map_err(|e| CliError::Data(e.to_string()))?;
    println!("ticks: {}", corpus.ticks_path.display());
    println!("sidecar: {}", corpus.sidecar_path.display());
    println!("manifest: {}", corpus.manifest_path.display());
    println!(
        "sessions: {}  hit_days: {}",
        corpus.manifest.sessions.len(),
        corpus.manifest.day_records.len()
    );
    Ok(())
}
