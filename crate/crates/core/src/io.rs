//! Series ingestion and report emission.
//!
//! Input is a two-column `week,count` CSV with a header. Outputs are the
//! backtest tables (CSV and JSON), per-time-point fitted paths, run
//! metadata, and optional SVG plots of the fitted paths.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestReport, ReportFlavor};
use crate::count_model::{CountSeries, Week};
use crate::diagnostics::{sorted_quantile, ChainSummary};
use crate::forecast::ForecastSummary;
use crate::simulate::Simulation;
use crate::engine::DrawStore;
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const BACKTEST_COLUMNS: [&str; 12] = [
    "dataset", "model", "LPS", "RMSE", "Corr", "q01", "q05", "q10", "q90", "q95", "q99", "n",
];

pub fn parse_csv(path: &Path) -> Result<CountSeries> {
    parse_csv_reader(fs::File::open(path)?)
}

/// Parse `week,count` rows. Row numbers in errors count the header as row 1.
pub fn parse_csv_reader<R: Read>(reader: R) -> Result<CountSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::DataRow {
                row: 1,
                message: "empty file; expected a `week,count` header".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().map(|f| f.to_ascii_lowercase()).collect();
    if names != ["week", "count"] {
        return Err(Error::DataRow {
            row: 1,
            message: format!("expected header `week,count`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut labels: Vec<Week> = Vec::new();
    let mut counts = Vec::new();
    let mut missing = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i + 2;
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::DataRow {
                row,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let week: Week = record[0].parse().map_err(|e: Error| Error::DataRow {
            row,
            message: e.to_string(),
        })?;
        let raw = &record[1];
        let count: u64 = raw.parse().map_err(|_| Error::DataRow {
            row,
            message: format!("count `{raw}` is not a non-negative integer"),
        })?;
        if let Some(&prev) = labels.last() {
            let gap = prev.weeks_until(week);
            if gap < 1 {
                return Err(Error::DataRow {
                    row,
                    message: format!("week {week} does not follow {prev}"),
                });
            }
            missing.extend((1..gap).map(|k| prev.offset(k).to_string()));
        }
        labels.push(week);
        counts.push(count);
    }
    if !missing.is_empty() {
        return Err(Error::MissingWeeks(missing));
    }
    CountSeries::new(labels, counts)
}

pub fn write_series_csv(series: &CountSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["week", "count"])?;
    for (week, count) in series.labels().iter().zip(series.counts()) {
        w.write_record([week.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Create `dir` if needed and check that files can be written there.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".dzip-write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

pub fn write_backtest_csv(report: &BacktestReport, flavor: ReportFlavor, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BACKTEST_COLUMNS)?;
    for row in report.rows(flavor) {
        let mut fields = vec![
            row.dataset.clone(),
            row.model.as_str().to_string(),
            fmt_num(row.lps),
            fmt_num(row.rmse),
            row.corr.map(fmt_num).unwrap_or_default(),
        ];
        fields.extend(row.coverage.iter().map(|&c| fmt_num(c)));
        fields.push(row.n.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Posterior summaries at one time point of the augmented path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRow {
    pub week: Week,
    /// Position in the augmented path: 0 is `z_0`, `T + 1` the forecast week.
    pub t: usize,
    pub count: Option<u64>,
    pub z_mean: f64,
    pub z_q05: f64,
    pub z_q95: f64,
    pub lambda_mean: f64,
    pub lambda_q05: f64,
    pub lambda_q95: f64,
    pub h_mean: Option<f64>,
    pub h_q05: Option<f64>,
    pub h_q95: Option<f64>,
    pub p_active: Option<f64>,
}

fn mean_and_band(values: &mut [f64]) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    (mean, sorted_quantile(values, 0.05), sorted_quantile(values, 0.95))
}

/// Summaries of the stored paths; empty if the chain kept no paths.
pub fn fitted_paths(store: &DrawStore, series: &CountSeries) -> Vec<FittedRow> {
    if store.z_paths.is_empty() {
        return Vec::new();
    }
    let n_sites = store.z_paths[0].len();
    let first = series.labels()[0];
    let mut rows = Vec::with_capacity(n_sites);
    for t in 0..n_sites {
        let mut z: Vec<f64> = store.z_paths.iter().map(|p| p[t]).collect();
        let mut lambda: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let (z_mean, z_q05, z_q95) = mean_and_band(&mut z);
        let (lambda_mean, lambda_q05, lambda_q95) = mean_and_band(&mut lambda);
        let h = (t >= 1 && !store.h_paths.is_empty()).then(|| {
            let mut h: Vec<f64> = store.h_paths.iter().map(|p| p[t - 1]).collect();
            mean_and_band(&mut h)
        });
        let obs = (1..=series.len()).contains(&t).then(|| t - 1);
        rows.push(FittedRow {
            week: first.offset(t as i64 - 1),
            t,
            count: obs.map(|i| series.counts()[i]),
            z_mean,
            z_q05,
            z_q95,
            lambda_mean,
            lambda_q05,
            lambda_q95,
            h_mean: h.map(|v| v.0),
            h_q05: h.map(|v| v.1),
            h_q95: h.map(|v| v.2),
            p_active: obs.map(|i| store.active_probability[i]),
        });
    }
    rows
}

pub fn write_fitted_csv(rows: &[FittedRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "week", "t", "count", "z_mean", "z_q05", "z_q95", "lambda_mean", "lambda_q05", "lambda_q95", "h_mean",
        "h_q05", "h_q95", "p_active",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.week.to_string(),
            r.t.to_string(),
            r.count.map(|c| c.to_string()).unwrap_or_default(),
            fmt_num(r.z_mean),
            fmt_num(r.z_q05),
            fmt_num(r.z_q95),
            fmt_num(r.lambda_mean),
            fmt_num(r.lambda_q05),
            fmt_num(r.lambda_q95),
            opt(r.h_mean),
            opt(r.h_q05),
            opt(r.h_q95),
            opt(r.p_active),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to re-run a command, plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub command: String,
    /// The resolved run configuration, as understood by the caller.
    pub run: serde_json::Value,
    pub started_unix: u64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

pub const METADATA_FILE: &str = "metadata.json";

/// Artifacts of one run; absent parts produce no files.
#[derive(Debug, Default)]
pub struct Outputs<'a> {
    pub backtest: Option<&'a BacktestReport>,
    pub fitted: Option<&'a [FittedRow]>,
    pub svg: bool,
    pub summary: Option<&'a ChainSummary>,
    pub forecast: Option<&'a ForecastSummary>,
    /// Simulated series (`series.csv`) and its latent truth (`truth.json`).
    pub simulation: Option<&'a Simulation>,
}

/// Write the requested artifacts and then the metadata file. Returns the
/// paths written, metadata last.
pub fn emit_report(dir: &Path, outputs: &Outputs<'_>, metadata: &mut RunMetadata) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(report) = outputs.backtest {
        for (flavor, name) in [
            (ReportFlavor::Conditional, "backtest_conditional.csv"),
            (ReportFlavor::Full, "backtest_full.csv"),
        ] {
            let path = dir.join(name);
            write_backtest_csv(report, flavor, &path)?;
            written.push(path);
        }
        let path = dir.join("backtest.json");
        write_json(report, &path)?;
        written.push(path);
    }
    if let Some(rows) = outputs.fitted {
        let path = dir.join("fitted_paths.csv");
        write_fitted_csv(rows, &path)?;
        written.push(path);
        if outputs.svg {
            let path = dir.join("fitted_paths.svg");
            fs::write(&path, fitted_svg(rows))?;
            written.push(path);
        }
    }
    if let Some(summary) = outputs.summary {
        let path = dir.join("summary.json");
        write_json(summary, &path)?;
        written.push(path);
    }
    if let Some(forecast) = outputs.forecast {
        let path = dir.join("forecast.json");
        write_json(forecast, &path)?;
        written.push(path);
    }
    if let Some(sim) = outputs.simulation {
        let path = dir.join("series.csv");
        write_series_csv(&sim.series, &path)?;
        written.push(path);
        let path = dir.join("truth.json");
        write_json(&sim.truth, &path)?;
        written.push(path);
    }
    metadata.outputs = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let path = dir.join(METADATA_FILE);
    write_json(metadata, &path)?;
    written.push(path);
    Ok(written)
}

const SVG_WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN: f64 = 50.0;

struct Panel<'a> {
    title: &'a str,
    band: Vec<(f64, f64, f64)>,
    line: Vec<(f64, f64)>,
    points: Vec<(f64, f64)>,
}

fn panel_svg(out: &mut String, panel: &Panel<'_>, top: f64, x_max: f64) {
    let ys = panel
        .band
        .iter()
        .flat_map(|&(_, lo, hi)| [lo, hi])
        .chain(panel.line.iter().map(|p| p.1))
        .chain(panel.points.iter().map(|p| p.1))
        .filter(|v| v.is_finite());
    let (mut y_min, mut y_max) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(y_min.is_finite() && y_max.is_finite()) {
        return;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let plot_w = SVG_WIDTH - 2.0 * MARGIN;
    let plot_h = PANEL_HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + plot_w * x / x_max.max(1.0);
    let sy = |y: f64| top + MARGIN + plot_h * (1.0 - (y - y_min) / (y_max - y_min));

    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##,
        top + MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-size="14" font-family="sans-serif">{}</text>"#,
        top + MARGIN - 10.0,
        panel.title
    );
    for (v, anchor_y) in [(y_max, sy(y_max)), (y_min, sy(y_min))] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{anchor_y:.1}" font-size="10" text-anchor="end" font-family="sans-serif">{v:.2}</text>"#,
            MARGIN - 4.0
        );
    }
    if !panel.band.is_empty() {
        let mut d = String::new();
        for (i, &(x, _, hi)) in panel.band.iter().enumerate() {
            let _ = write!(d, "{}{:.1},{:.1} ", if i == 0 { "M" } else { "L" }, sx(x), sy(hi));
        }
        for &(x, lo, _) in panel.band.iter().rev() {
            let _ = write!(d, "L{:.1},{:.1} ", sx(x), sy(lo));
        }
        let _ = writeln!(out, r##"<path d="{d}Z" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##);
    }
    if !panel.line.is_empty() {
        let pts: Vec<String> = panel.line.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
    }
    for &(x, y) in &panel.points {
        let _ = writeln!(out, r##"<circle cx="{:.1}" cy="{:.1}" r="1.6" fill="#333"/>"##, sx(x), sy(y));
    }
}

/// Self-contained SVG: intensity with 90% band and counts, plus the
/// log-variance path when present.
pub fn fitted_svg(rows: &[FittedRow]) -> String {
    let x_max = rows.last().map(|r| r.t as f64).unwrap_or(1.0);
    let mut panels = vec![Panel {
        title: "Intensity: posterior mean, 90% band, observed counts",
        band: rows.iter().map(|r| (r.t as f64, r.lambda_q05, r.lambda_q95)).collect(),
        line: rows.iter().map(|r| (r.t as f64, r.lambda_mean)).collect(),
        points: rows.iter().filter_map(|r| r.count.map(|c| (r.t as f64, c as f64))).collect(),
    }];
    if rows.iter().any(|r| r.h_mean.is_some()) {
        panels.push(Panel {
            title: "Log-volatility h: posterior mean and 90% band",
            band: rows
                .iter()
                .filter_map(|r| Some((r.t as f64, r.h_q05?, r.h_q95?)))
                .collect(),
            line: rows.iter().filter_map(|r| Some((r.t as f64, r.h_mean?))).collect(),
            points: Vec::new(),
        });
    }
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{height}" viewBox="0 0 {SVG_WIDTH} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        panel_svg(&mut out, panel, i as f64 * PANEL_HEIGHT, x_max);
    }
    out.push_str("</svg>\n");
    out
}
