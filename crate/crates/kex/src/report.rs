//! Table-shaped CSV reports and full-precision JSON.

use std::path::{Path, PathBuf};

use kex_core::fairness::WelfareScores;
use serde::Serialize;

use crate::config::{OutputFormat, SweepAxis};
use crate::error::KexError;
use crate::experiment::{FairnessPair, RunReport, SweepReport};

/// A CSV table: one header row and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> Result<String, KexError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| KexError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("cells are utf-8"))
    }
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

/// Welfare scores are of order 1e-3, so they keep five decimals.
fn f5(x: f64) -> String {
    format!("{x:.5}")
}

fn opt2(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), f2)
}

fn of_mean_queue(r: &RunReport) -> Option<&FairnessPair> {
    r.summary.fairness_of_mean_queue.as_ref()
}

pub fn summary_table(reports: &[RunReport]) -> Table {
    let mut t = Table::new("summary", &["Alg", "W", "#Matches", "%Match", "WaitRecip", "Wait", "EgalFairness"]);
    for r in reports {
        let s = &r.summary;
        t.rows.push(vec![
            r.label.clone(),
            f2(r.penalty),
            f2(s.matches),
            f2(s.match_pct),
            opt2(s.wait_recipient),
            opt2(s.wait_all),
            opt2(of_mean_queue(r).map(|f| f.fairness.egalitarian)),
        ]);
    }
    t
}

pub fn queues_table(reports: &[RunReport]) -> Table {
    let mut t = Table::new("queues", &["Model", "G1", "G2", "G3", "G4", "G5"]);
    for r in reports {
        let mut row = vec![r.label.clone()];
        row.extend(r.summary.queue_by_band.iter().map(|&q| f2(q)));
        t.rows.push(row);
    }
    t
}

fn fairness_rows(t: &mut Table, label: &str, pair: Option<&FairnessPair>) {
    let mut row = vec![label.to_string()];
    match pair {
        Some(p) => {
            let s: &WelfareScores = &p.welfare;
            row.extend([f5(s.utilitarian), f5(s.nash), f5(s.egalitarian)]);
            let f = &p.fairness;
            row.extend([f2(f.utilitarian), f2(f.nash), f2(f.egalitarian)]);
        }
        None => row.extend(std::iter::repeat_n("-".to_string(), 6)),
    }
    t.rows.push(row);
}

const FAIRNESS_HEADER: [&str; 7] =
    ["Model", "Utilitarian", "Nash", "Egalitarian", "UtilitarianFairness", "NashFairness", "EgalitarianFairness"];

/// Welfare of the mean end-of-run queue.
pub fn fairness_table(reports: &[RunReport]) -> Table {
    let mut t = Table::new("fairness", &FAIRNESS_HEADER);
    for r in reports {
        fairness_rows(&mut t, &r.label, of_mean_queue(r));
    }
    t
}

/// Welfare of each replication's queue, then averaged.
pub fn fairness_mean_of_scores_table(reports: &[RunReport]) -> Table {
    let mut t = Table::new("fairness_mean_of_scores", &FAIRNESS_HEADER);
    for r in reports {
        fairness_rows(&mut t, &r.label, r.summary.fairness_mean_of_scores.as_ref());
    }
    t
}

/// One row per replication, aborted ones included.
pub fn replications_table(report: &RunReport) -> Table {
    let mut t = Table::new(
        "replications",
        &[
            "Replication",
            "Seed",
            "PatientsArrived",
            "AltruistsArrived",
            "#Matches",
            "%Match",
            "WaitRecip",
            "Wait",
            "AltruistsUsed",
            "Altruist%Usage",
            "#Paths",
            "PatientsInPaths",
            "%PathMatches",
            "G1",
            "G2",
            "G3",
            "G4",
            "G5",
            "Utilitarian",
            "Nash",
            "Egalitarian",
            "Error",
        ],
    );
    for r in &report.replications {
        let mut row = vec![r.index.to_string(), r.seed.to_string()];
        match &r.metrics {
            Some(m) => {
                row.extend([
                    m.patients_arrived.to_string(),
                    m.ndads_arrived.to_string(),
                    m.matches.to_string(),
                    f2(m.match_pct),
                    opt2(m.wait_recipient),
                    opt2(m.wait_all),
                    m.ndads_used.to_string(),
                    f2(m.altruist_usage_pct),
                    m.paths.to_string(),
                    m.patients_in_paths.to_string(),
                    f2(m.path_match_pct),
                ]);
                row.extend(m.queue_by_band.iter().map(u32::to_string));
                row.extend([f5(m.welfare.utilitarian), f5(m.welfare.nash), f5(m.welfare.egalitarian)]);
                row.push(String::new());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 19));
                row.push(r.error.clone().unwrap_or_default());
            }
        }
        t.rows.push(row);
    }
    t
}

/// Sum of `v[lo..=hi]`, ignoring indices past the end.
fn bucket(v: &[f64], lo: usize, hi: usize) -> f64 {
    v.iter().enumerate().filter(|(i, _)| (lo..=hi).contains(i)).map(|(_, x)| x).sum()
}

fn path_caps_table(sweep: &SweepReport) -> Table {
    let top = sweep.rows.iter().map(|r| r.report.max_chain).max().unwrap_or(0).max(1);
    let buckets: Vec<(usize, usize)> = (0..top.div_ceil(5)).map(|b| (5 * b + 1, 5 * b + 5)).collect();
    let mut header = vec!["P".to_string(), "#Matches".into(), "%Match".into(), "Altruist%Usage".into()];
    header.extend(buckets.iter().map(|(lo, hi)| format!("#Paths{lo}-{hi}")));
    header.push("%PathMatches".into());
    let mut t = Table { name: "path_caps".into(), header, rows: Vec::new() };
    for row in &sweep.rows {
        let s = &row.report.summary;
        let mut cells =
            vec![row.report.max_chain.to_string(), f2(s.matches), f2(s.match_pct), f2(s.altruist_usage_pct)];
        cells.extend(buckets.iter().map(|&(lo, hi)| f2(bucket(&s.paths_by_length, lo, hi))));
        cells.push(f2(s.path_match_pct));
        t.rows.push(cells);
    }
    t
}

fn cycle_caps_table(sweep: &SweepReport) -> Table {
    let top = sweep.rows.iter().map(|r| r.report.max_cycle).max().unwrap_or(2).max(2);
    let mut header = vec!["C".to_string(), "#Matches".into(), "%Match".into()];
    header.extend((2..=top).map(|k| format!("#Cycles{k}")));
    header.extend(["#Paths".into(), "#PatientsInPaths".into(), "%PathMatches".into()]);
    let mut t = Table { name: "cycle_caps".into(), header, rows: Vec::new() };
    for row in &sweep.rows {
        let s = &row.report.summary;
        let mut cells = vec![row.report.max_cycle.to_string(), f2(s.matches), f2(s.match_pct)];
        cells.extend((2..=top).map(|k| f2(s.cycles_by_length.get(k).copied().unwrap_or(0.0))));
        cells.extend([f2(s.paths), f2(s.patients_in_paths), f2(s.path_match_pct)]);
        t.rows.push(cells);
    }
    t
}

fn altruist_weights_table(sweep: &SweepReport) -> Table {
    let mut t = Table::new("altruist_weights", &["W", "Altruist%Usage", "%Match"]);
    for row in &sweep.rows {
        let s = &row.report.summary;
        t.rows.push(vec![f2(row.value), f2(s.altruist_usage_pct), f2(s.match_pct)]);
    }
    t
}

fn altruist_rate_table(sweep: &SweepReport) -> Table {
    let mut t = Table::new(
        "altruist_rate",
        &["lambda_A", "%Match", "Matches/Altruist", "#Altruists", "#Paths", "Donors/Altruist"],
    );
    for row in &sweep.rows {
        let s = &row.report.summary;
        t.rows.push(vec![
            f2(row.value),
            f2(s.match_pct),
            opt2(row.marginal_matches_per_altruist),
            f2(s.ndads_arrived),
            f2(s.paths),
            opt2(row.donors_per_altruist),
        ]);
    }
    t
}

/// The axis-specific table of a sweep.
pub fn sweep_table(sweep: &SweepReport) -> Table {
    match sweep.axis {
        SweepAxis::Penalty => altruist_weights_table(sweep),
        SweepAxis::CycleCap => cycle_caps_table(sweep),
        SweepAxis::ChainCap => path_caps_table(sweep),
        SweepAxis::AltruistRate => altruist_rate_table(sweep),
    }
}

/// Tables for a set of experiments run side by side.
pub fn experiment_tables(reports: &[RunReport]) -> Vec<Table> {
    let mut tables = vec![
        summary_table(reports),
        queues_table(reports),
        fairness_table(reports),
        fairness_mean_of_scores_table(reports),
    ];
    if let [single] = reports {
        tables.push(replications_table(single));
    }
    tables
}

pub fn sweep_tables(sweep: &SweepReport) -> Vec<Table> {
    let reports: Vec<RunReport> = sweep.rows.iter().map(|r| r.report.clone()).collect();
    let mut tables =
        vec![sweep_table(sweep), summary_table(&reports), queues_table(&reports), fairness_table(&reports)];
    tables[1].name = "sweep_summary".into();
    tables
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, KexError> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn write(path: &Path, text: &str) -> Result<(), KexError> {
    std::fs::write(path, text).map_err(|e| KexError::io(path, e))
}

/// Writes `tables` as `<name>.csv` and/or `value` as `report.json` under
/// `dir`; returns the paths written.
pub fn emit<T: Serialize>(
    dir: &Path,
    format: OutputFormat,
    tables: &[Table],
    value: &T,
) -> Result<Vec<PathBuf>, KexError> {
    std::fs::create_dir_all(dir).map_err(|e| KexError::io(dir, e))?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        for t in tables {
            let path = dir.join(format!("{}.csv", t.name));
            write(&path, &t.to_csv()?)?;
            written.push(path);
        }
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = dir.join("report.json");
        write(&path, &to_json(value)?)?;
        written.push(path);
    }
    Ok(written)
}
