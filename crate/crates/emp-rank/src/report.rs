//! Serializable report records and their table, CSV and JSON renderings.

use std::fmt::Write as _;

use emp_core::pem::CovarianceComparison;
use emp_core::ranking::{EmpRanking, TheoremCheck};
use emp_core::scenario::{ratio_stats, RatioStats, ScenarioReport};
use emp_core::{CriterionKind, Emp, InfoResult, Pattern};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Left-aligned text table.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut out, headers.to_vec());
    line(
        &mut out,
        widths
            .iter()
            .map(|&w| "-".repeat(w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    );
    for row in rows {
        line(&mut out, row.iter().map(String::as_str).collect());
    }
    out
}

pub fn render_csv(headers: &[&str], rows: &[Vec<String>]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn render(format: Format, headers: &[&str], rows: &[Vec<String>], json: &impl Serialize) -> anyhow::Result<String> {
    Ok(match format {
        Format::Table => render_table(headers, rows),
        Format::Csv => render_csv(headers, rows)?,
        Format::Json => serde_json::to_string_pretty(json)? + "\n",
    })
}

fn list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationRow {
    pub index: usize,
    pub label: Option<String>,
    pub emp: String,
    pub excited: Vec<usize>,
    pub measured: Vec<usize>,
    pub direct_modules: Vec<usize>,
    pub mirror: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub manifest: RunManifest,
    pub n: usize,
    pub emps: Vec<EnumerationRow>,
}

impl EnumerationReport {
    pub fn new(manifest: RunManifest, patterns: &[Pattern]) -> Self {
        let emps = patterns
            .iter()
            .enumerate()
            .map(|(index, p)| EnumerationRow {
                index,
                label: p.roman_label().map(str::to_string),
                emp: p.to_string(),
                excited: p.excited(),
                measured: p.measured(),
                direct_modules: p.direct_modules(),
                mirror: p.mirror().canonical_index().unwrap_or(index),
            })
            .collect();
        Self {
            manifest,
            n: patterns.first().map_or(0, Pattern::n),
            emps,
        }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        let headers = ["index", "label", "emp", "direct_modules", "mirror"];
        let rows: Vec<Vec<String>> = self
            .emps
            .iter()
            .map(|r| {
                vec![
                    r.index.to_string(),
                    r.label.clone().unwrap_or_default(),
                    r.emp.clone(),
                    list(&r.direct_modules),
                    r.mirror.to_string(),
                ]
            })
            .collect();
        render(format, &headers, &rows, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub index: usize,
    pub label: Option<String>,
    pub emp: String,
    pub value: f64,
    pub trace: f64,
    pub log_det: f64,
    pub direct_modules: Vec<usize>,
    pub module_traces: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularRow {
    pub index: usize,
    pub emp: String,
    pub rcond: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
}

impl From<&TheoremCheck> for CheckRow {
    fn from(c: &TheoremCheck) -> Self {
        Self {
            name: c.name.to_string(),
            applicable: c.applicable,
            passed: c.passed,
            detail: c.detail.clone(),
        }
    }
}

impl CheckRow {
    pub fn failed(&self) -> bool {
        self.applicable && !self.passed
    }

    fn status(&self) -> &'static str {
        match (self.applicable, self.passed) {
            (false, _) => "n/a",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        }
    }
}

pub fn render_checks(format: Format, checks: &[CheckRow]) -> anyhow::Result<String> {
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), c.status().to_string(), c.detail.clone()])
        .collect();
    render(format, &["check", "status", "detail"], &rows, &checks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub manifest: RunManifest,
    pub criterion: CriterionKind,
    pub ranking: Vec<RankingRow>,
    pub non_informative: Vec<SingularRow>,
    /// Smallest trace of the covariance.
    pub a_optimal: String,
    /// Smallest log-determinant of the covariance.
    pub d_optimal: String,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckRow>,
}

impl RankingReport {
    pub fn new(manifest: RunManifest, r: &EmpRanking) -> Self {
        let pick = |key: fn(&emp_core::ranking::RankedEmp) -> f64| {
            r.entries
                .iter()
                .min_by(|a, b| {
                    key(a)
                        .total_cmp(&key(b))
                        .then(a.canonical_index.cmp(&b.canonical_index))
                })
                .map(|e| e.emp.pattern().to_string())
                .unwrap_or_default()
        };
        Self {
            manifest,
            criterion: r.kind,
            ranking: r
                .entries
                .iter()
                .enumerate()
                .map(|(k, e)| RankingRow {
                    rank: k + 1,
                    index: e.canonical_index,
                    label: e.emp.pattern().roman_label().map(str::to_string),
                    emp: e.emp.pattern().to_string(),
                    value: e.value,
                    trace: e.trace,
                    log_det: e.log_det,
                    direct_modules: e.direct_modules.clone(),
                    module_traces: e.module_traces.clone(),
                })
                .collect(),
            non_informative: r
                .non_informative
                .iter()
                .map(|e| SingularRow {
                    index: e.canonical_index,
                    emp: e.emp.pattern().to_string(),
                    rcond: e.rcond,
                })
                .collect(),
            a_optimal: pick(|e| e.trace),
            d_optimal: pick(|e| e.log_det),
            converged: r.converged,
            checks: Vec::new(),
        }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        let headers = ["rank", "index", "label", "emp", "trace", "log_det", "direct_modules"];
        let rows: Vec<Vec<String>> = self
            .ranking
            .iter()
            .map(|r| {
                vec![
                    r.rank.to_string(),
                    r.index.to_string(),
                    r.label.clone().unwrap_or_default(),
                    r.emp.clone(),
                    format!("{:.6e}", r.trace),
                    format!("{:.6}", r.log_det),
                    list(&r.direct_modules),
                ]
            })
            .collect();
        let mut out = render(format, &headers, &rows, self)?;
        if format == Format::Table {
            let _ = writeln!(out, "\ncriterion: {}", self.criterion);
            let _ = writeln!(out, "A-optimal: {}", self.a_optimal);
            let _ = writeln!(out, "D-optimal: {}", self.d_optimal);
            if !self.non_informative.is_empty() {
                out.push_str("\nnon-informative EMPs:\n");
                let rows: Vec<Vec<String>> = self
                    .non_informative
                    .iter()
                    .map(|s| vec![s.index.to_string(), s.emp.clone(), format!("{:.3e}", s.rcond)])
                    .collect();
                out.push_str(&render_table(&["index", "emp", "rcond"], &rows));
            }
            if !self.converged {
                out.push_str("\nwarning: some impulse responses hit the length cap\n");
            }
            if !self.checks.is_empty() {
                out.push('\n');
                out.push_str(&render_checks(Format::Table, &self.checks)?);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub manifest: RunManifest,
    pub emp: String,
    pub informative: bool,
    pub rcond: f64,
    pub trace: Option<f64>,
    pub log_det: Option<f64>,
    pub criterion: CriterionKind,
    pub value: Option<f64>,
    pub direct_modules: Vec<usize>,
    pub module_traces: Option<Vec<f64>>,
    pub converged: bool,
    pub information: Vec<Vec<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl AnalysisReport {
    pub fn new(manifest: RunManifest, emp: &Emp, info: &InfoResult, criterion: CriterionKind) -> Self {
        let informative = info.is_informative();
        Self {
            manifest,
            emp: emp.to_string(),
            informative,
            rcond: info.rcond,
            trace: info.trace().ok(),
            log_det: info.log_det().ok(),
            criterion,
            value: info.criterion(criterion).ok(),
            direct_modules: emp.direct_modules(),
            module_traces: info.module_traces().ok(),
            converged: info.converged,
            information: matrix_rows(&info.information),
            covariance: info.covariance.as_ref().map(matrix_rows),
        }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        let mut rows = vec![
            vec!["emp".to_string(), self.emp.clone()],
            vec!["informative".to_string(), self.informative.to_string()],
            vec!["rcond".to_string(), format!("{:.3e}", self.rcond)],
            vec!["trace".to_string(), f(self.trace)],
            vec!["log_det".to_string(), f(self.log_det)],
            vec![format!("criterion ({})", self.criterion), f(self.value)],
            vec!["direct_modules".to_string(), list(&self.direct_modules)],
            vec!["converged".to_string(), self.converged.to_string()],
        ];
        if let Some(t) = &self.module_traces {
            for (k, v) in t.iter().enumerate() {
                rows.push(vec![format!("trace P(G{})", k + 1), format!("{v:.6e}")]);
            }
        }
        render(format, &["quantity", "value"], &rows, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub manifest: RunManifest,
    pub report: ScenarioReport,
    pub ratios: Option<RatioStats>,
}

impl MonteCarloReport {
    pub fn new(manifest: RunManifest, report: ScenarioReport) -> Self {
        Self {
            manifest,
            ratios: ratio_stats(&report).ok(),
            report,
        }
    }

    /// One row per EMP in canonical order.
    pub fn rows(&self) -> Vec<Vec<String>> {
        let pct = self.report.percentages();
        let patterns = emp_core::enumerate_minimal(self.report.config.n).unwrap_or_default();
        self.report
            .emps
            .iter()
            .enumerate()
            .map(|(k, e)| {
                vec![
                    e.clone(),
                    patterns.get(k).and_then(Pattern::roman_label).unwrap_or("").to_string(),
                    self.report.counts[k].to_string(),
                    format!("{:.2}", pct[k]),
                ]
            })
            .collect()
    }

    pub const HEADERS: [&'static str; 4] = ["emp", "label", "count", "percent"];

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        let mut out = render(format, &Self::HEADERS, &self.rows(), self)?;
        if format == Format::Table {
            let r = &self.report;
            let _ = writeln!(out, "\ninformative runs: {}", r.informative_runs);
            let _ = writeln!(out, "rejected runs: {}", r.rejected.len());
            let _ = writeln!(out, "non-informative EMP evaluations: {}", r.non_informative_emps);
            let _ = writeln!(out, "runs with truncated impulse responses: {}", r.non_converged_runs);
            if let Some(s) = self.ratios {
                let _ = writeln!(out, "median runner-up/best: {:.4}", s.median_runner_up);
                let _ = writeln!(out, "median worst/best: {:.4}", s.median_worst);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub manifest: RunManifest,
    pub emp: String,
    pub n_samples: usize,
    pub replications: usize,
    pub failed: usize,
    pub theoretical_trace: f64,
    pub empirical_trace: f64,
    pub deviation: f64,
    pub unreliable: bool,
    pub theoretical: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
}

impl ValidationReport {
    pub fn new(manifest: RunManifest, emp: &Emp, c: &CovarianceComparison) -> Self {
        Self {
            manifest,
            emp: emp.to_string(),
            n_samples: c.n_samples,
            replications: c.replications,
            failed: c.failed,
            theoretical_trace: c.theoretical_trace,
            empirical_trace: c.empirical_trace,
            deviation: c.deviation,
            unreliable: c.unreliable,
            theoretical: matrix_rows(&c.theoretical),
            empirical: matrix_rows(&c.empirical),
        }
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        let rows = vec![
            vec!["emp".to_string(), self.emp.clone()],
            vec!["samples".to_string(), self.n_samples.to_string()],
            vec!["replications".to_string(), self.replications.to_string()],
            vec!["failed fits".to_string(), self.failed.to_string()],
            vec![
                "theoretical trace".to_string(),
                format!("{:.6e}", self.theoretical_trace),
            ],
            vec!["empirical trace".to_string(), format!("{:.6e}", self.empirical_trace)],
            vec!["relative deviation".to_string(), format!("{:.4}", self.deviation)],
            vec!["unreliable".to_string(), self.unreliable.to_string()],
        ];
        render(format, &["quantity", "value"], &rows, self)
    }
}
