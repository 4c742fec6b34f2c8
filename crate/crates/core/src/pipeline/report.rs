//! Evaluation rows and their rendering as text or CSV tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::score::{score_approx_stoi, score_elc};
use super::PipelineError;
use crate::signal::TimeSignal;

/// An aligned clean/noisy test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TestItem {
    pub noise_type: String,
    pub snr_db: f64,
    pub clean: TimeSignal,
    pub noisy: TimeSignal,
}

/// Mean scores of one system for one noise type and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub noise_type: String,
    pub snr_db: f64,
    pub system: String,
    pub elc_unprocessed: f64,
    pub elc_enhanced: f64,
    pub stoi_unprocessed: f64,
    pub stoi_enhanced: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(TableFormat::Text),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!("unknown table format {other:?}")),
        }
    }
}

/// Group key ordering SNRs numerically.
fn key(noise: &str, snr: f64) -> (String, i64) {
    (noise.to_string(), (snr * 1000.0).round() as i64)
}

/// Enhances every item and averages the scores per (noise type, SNR).
pub fn evaluate_system<F>(system: &str, items: &[TestItem], mut enhance: F) -> Result<Vec<EvalRow>, PipelineError>
where
    F: FnMut(&TimeSignal) -> Result<TimeSignal, PipelineError>,
{
    let mut groups: BTreeMap<(String, i64), (f64, [f64; 4], usize)> = BTreeMap::new();
    for item in items {
        let enhanced = enhance(&item.noisy)?;
        let scores = [
            score_elc(&item.clean, &item.noisy)?,
            score_elc(&item.clean, &enhanced)?,
            score_approx_stoi(&item.clean, &item.noisy)?,
            score_approx_stoi(&item.clean, &enhanced)?,
        ];
        let entry = groups
            .entry(key(&item.noise_type, item.snr_db))
            .or_insert((item.snr_db, [0.0; 4], 0));
        for (acc, s) in entry.1.iter_mut().zip(scores) {
            *acc += s;
        }
        entry.2 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|((noise, _), (snr, sums, n))| {
            let n = n as f64;
            EvalRow {
                noise_type: noise,
                snr_db: snr,
                system: system.to_string(),
                elc_unprocessed: sums[0] / n,
                elc_enhanced: sums[1] / n,
                stoi_unprocessed: sums[2] / n,
                stoi_enhanced: sums[3] / n,
            }
        })
        .collect())
}

struct Table {
    systems: Vec<String>,
    /// (noise, snr) -> (snr, unprocessed, per-system enhanced)
    rows: BTreeMap<(String, i64), (f64, f64, BTreeMap<String, f64>)>,
}

fn build(rows: &[EvalRow], pick: fn(&EvalRow) -> (f64, f64)) -> Table {
    let systems: BTreeSet<String> = rows.iter().map(|r| r.system.clone()).collect();
    let mut out: BTreeMap<(String, i64), (f64, f64, BTreeMap<String, f64>)> = BTreeMap::new();
    // rows are visited in system order so the unprocessed column is stable
    let mut ordered: Vec<&EvalRow> = rows.iter().collect();
    ordered.sort_by(|a, b| a.system.cmp(&b.system));
    for r in ordered {
        let (unprocessed, enhanced) = pick(r);
        let entry = out
            .entry(key(&r.noise_type, r.snr_db))
            .or_insert((r.snr_db, unprocessed, BTreeMap::new()));
        entry.2.insert(r.system.clone(), enhanced);
    }
    Table {
        systems: systems.into_iter().collect(),
        rows: out,
    }
}

fn cell(v: Option<&f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// ELC and approximate-STOI tables. Columns: noise type, SNR, unprocessed,
/// then one column per system in name order; rows sorted by (noise, SNR).
pub fn report_tables(rows: &[EvalRow], format: TableFormat) -> String {
    let tables: [(&str, Table); 2] = [
        ("ELC", build(rows, |r| (r.elc_unprocessed, r.elc_enhanced))),
        ("STOI", build(rows, |r| (r.stoi_unprocessed, r.stoi_enhanced))),
    ];
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let systems = &tables[0].1.systems;
            let mut header = vec!["metric".to_string(), "noise".into(), "snr_db".into(), "unprocessed".into()];
            header.extend(systems.iter().cloned());
            out.push_str(&header.join(","));
            out.push('\n');
            for (metric, table) in &tables {
                for ((noise, _), (snr, unprocessed, scores)) in &table.rows {
                    let mut line = vec![metric.to_lowercase(), noise.clone(), format!("{snr:.2}"), format!("{unprocessed:.2}")];
                    line.extend(systems.iter().map(|s| cell(scores.get(s))));
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
            }
        }
        TableFormat::Text => {
            for (i, (metric, table)) in tables.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "{metric} results");
                let width = table.systems.iter().map(|s| s.len()).max().unwrap_or(0).max(11);
                let _ = write!(out, "{:<10} {:>7} {:>width$}", "noise", "snr_db", "unprocessed");
                for s in &table.systems {
                    let _ = write!(out, " {s:>width$}");
                }
                out.push('\n');
                for ((noise, _), (snr, unprocessed, scores)) in &table.rows {
                    let _ = write!(out, "{noise:<10} {snr:>7.2} {unprocessed:>width$.2}");
                    for s in &table.systems {
                        let _ = write!(out, " {:>width$}", cell(scores.get(s)));
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}
