//! Text, CSV and JSON rendering of reports.
//!
//! Text output rounds every number to 6 significant digits; CSV and JSON
//! keep full `f64` precision (shortest round-trip representation). Every
//! document ends with a provenance block.
//!
//! CSV layout: each table is a block introduced by a `# <title>` line and a
//! header row, blocks are separated by blank lines, and provenance entries
//! follow as `# key: value` lines.

use serde::Serialize;
use serde_json::{json, Value};

use crate::efficiency::{DominanceEntry, PreReport, Reproduction, PUBLISHED_RANKING};
use crate::estimators::EstimatorKind;
use crate::moments::{DesignFactor, MomentSet};
use crate::montecarlo::SimulationReport;
use crate::reconcile::{Action, ReconciliationReport};
use crate::theory::{Diagnostics, MseBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

/// `x` rounded to 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return full(x);
    }
    // exponent after rounding, so 999999.7 moves to 1.00000e6
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn full(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => sig6(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => "-".to_string(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => full(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(title: &str, header: &[&str]) -> Self {
        Table {
            title: title.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn text(&self, out: &mut String) {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        out.push_str(&self.title);
        out.push('\n');
        let line = |out: &mut String, items: &[String]| {
            let mut s = String::new();
            for (i, (item, w)) in items.iter().zip(&widths).enumerate() {
                if i == 0 {
                    s.push_str(&format!("{item:<w$}"));
                } else {
                    s.push_str(&format!("  {item:>w$}"));
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(out, &self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(out, &rule);
        for row in &cells {
            line(out, row);
        }
    }

    fn csv(&self, out: &mut String) {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        out.push_str(&format!("# {}\n", self.title));
        out.push_str(&String::from_utf8(bytes).expect("utf-8 cells"));
    }
}

/// Where every number in a report came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub input: String,
    pub policy: Option<String>,
    pub formula: String,
    pub seed: Option<u64>,
}

impl Provenance {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("command", self.command.clone()),
            ("input", self.input.clone()),
            ("policy", self.policy.clone().unwrap_or_else(|| "n/a".into())),
            ("formula", self.formula.clone()),
            ("seed", self.seed.map_or_else(|| "n/a".into(), |s| s.to_string())),
        ]
    }
}

/// A report ready to be written in any [`Format`].
#[derive(Debug, Clone)]
pub struct Document {
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub data: Value,
    pub provenance: Provenance,
}

impl Document {
    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Text => {
                for t in &self.tables {
                    t.text(&mut out);
                    out.push('\n');
                }
                for n in &self.notes {
                    out.push_str(&format!("note: {n}\n"));
                }
                if !self.notes.is_empty() {
                    out.push('\n');
                }
                out.push_str("provenance\n");
                for (k, v) in self.provenance.pairs() {
                    out.push_str(&format!("  {k:<8} {v}\n"));
                }
            }
            Format::Csv => {
                for t in &self.tables {
                    t.csv(&mut out);
                    out.push('\n');
                }
                for n in &self.notes {
                    out.push_str(&format!("# note: {n}\n"));
                }
                for (k, v) in self.provenance.pairs() {
                    out.push_str(&format!("# {k}: {v}\n"));
                }
            }
            Format::Json => {
                let doc = json!({
                    "report": self.data,
                    "notes": self.notes,
                    "provenance": self.provenance,
                });
                out.push_str(&serde_json::to_string_pretty(&doc).expect("reports serialize"));
                out.push('\n');
            }
        }
        out
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub const FORMULA_IMPLEMENTED: &str =
    "implemented first-order formulas (printed variants appear only as labelled diagnostics)";

fn moments_table(m: &MomentSet) -> Table {
    let mut t = Table::new("relative moments", &["moment", "value"]);
    for (name, v) in ["V200", "V020", "V002", "V110", "V101", "V011"].iter().zip(m.entries()) {
        t.push(vec![(*name).into(), v.into()]);
    }
    t.push(vec!["Ybar".into(), m.mean_y.into()]);
    t.push(vec!["Xbar".into(), m.mean_x.into()]);
    t.push(vec!["Zbar".into(), m.mean_z.into()]);
    t.push(vec!["B1".into(), m.b1.into()]);
    t.push(vec!["B2".into(), m.b2.into()]);
    t.push(vec!["t7 residual MSE".into(), m.regression_residual.into()]);
    t
}

fn reconciliation_table(rec: &ReconciliationReport) -> Table {
    let mut t = Table::new(
        &format!("reconciliation ({}, tolerance {})", rec.policy, rec.tolerance),
        &["stratum", "field", "action", "old", "new", "discrepancy"],
    );
    for e in &rec.entries {
        t.push(vec![
            e.stratum.into(),
            e.field.clone().into(),
            action_name(e.action).into(),
            e.old.into(),
            e.new.into(),
            e.discrepancy.into(),
        ]);
    }
    t
}

fn action_name(a: Action) -> &'static str {
    match a {
        Action::Adjusted => "adjusted",
        Action::Repaired => "repaired",
        Action::Derived => "derived",
        Action::Imputed => "imputed",
        Action::Flagged => "flagged",
    }
}

fn reconciliation_notes(rec: &ReconciliationReport) -> Vec<String> {
    rec.entries
        .iter()
        .filter(|e| e.action.is_repair() || e.action == Action::Flagged)
        .map(|e| {
            format!(
                "stratum {} {}: {} ({} -> {})",
                e.stratum,
                e.field,
                action_name(e.action),
                e.old.map_or("missing".into(), sig6),
                e.new.map_or("missing".into(), sig6)
            )
        })
        .collect()
}

pub fn moments_document(
    m: &MomentSet,
    factors: &[DesignFactor],
    rec: &ReconciliationReport,
    provenance: Provenance,
) -> Document {
    let mut design = Table::new("design factors", &["stratum", "W_h", "f_h", "W_h^2 f_h"]);
    for (h, f) in factors.iter().enumerate() {
        design.push(vec![(h + 1).into(), f.weight.into(), f.fpc.into(), f.moment_weight().into()]);
    }
    Document {
        tables: vec![moments_table(m), design, reconciliation_table(rec)],
        notes: reconciliation_notes(rec),
        data: json!({
            "moments": to_value(m),
            "design_factors": to_value(&factors),
            "reconciliation": to_value(rec),
        }),
        provenance,
    }
}

pub fn mse_document(
    rows: &[MseBreakdown],
    optimum: Option<(f64, f64)>,
    diag: &Diagnostics,
    rec: &ReconciliationReport,
    provenance: Provenance,
) -> Document {
    let mut t = Table::new("first-order MSE", &["estimator", "m1", "m2", "MSE", "P1", "P2", "P3", "bias"]);
    for r in rows {
        let terms = r.tp;
        t.push(vec![
            r.estimator.name().into(),
            terms.map(|p| p.m1).into(),
            terms.map(|p| p.m2).into(),
            r.mse.into(),
            terms.map(|p| p.p1).into(),
            terms.map(|p| p.p2).into(),
            terms.map(|p| p.p3).into(),
            terms.map(|p| p.bias).into(),
        ]);
    }

    let mut d = Table::new(
        &format!("implemented vs printed at (m1, m2) = ({}, {})", sig6(diag.m1), sig6(diag.m2)),
        &["quantity", "implemented", "printed"],
    );
    d.push(vec!["P2".into(), diag.p2_implemented.into(), diag.p2_printed.into()]);
    d.push(vec!["P3".into(), diag.p3_implemented.into(), diag.p3_printed.into()]);
    d.push(vec!["MSE(tp)".into(), diag.mse_tp_implemented.into(), diag.mse_tp_printed.into()]);
    d.push(vec![
        "m1*".into(),
        diag.optimum_solved.map(|o| o.0).into(),
        diag.optimum_printed.map(|o| o.0).into(),
    ]);
    d.push(vec![
        "m2*".into(),
        diag.optimum_solved.map(|o| o.1).into(),
        diag.optimum_printed.map(|o| o.1).into(),
    ]);
    d.push(vec![
        "MSE(tp) at m*".into(),
        optimum
            .and_then(|o| rows.iter().find(|r| r.tp.is_some_and(|p| (p.m1, p.m2) == o)))
            .map(|r| r.mse)
            .into(),
        diag.mse_at_printed_optimum.into(),
    ]);
    d.push(vec!["bias(tp)".into(), diag.bias_expansion.into(), diag.bias_printed.into()]);
    d.push(vec!["MSE(t7)".into(), diag.t7_combined.into(), diag.t7_stratumwise.into()]);

    let mut notes = Vec::new();
    match optimum {
        Some((a, b)) => notes.push(format!("optimum (m1*, m2*) = ({}, {})", sig6(a), sig6(b))),
        None => notes.push("optimum (m1*, m2*) is undefined for this moment set".into()),
    }
    notes.push(
        "the t7 row uses the stratum-wise form; 'implemented' in the diagnostics table is the combined form, tp at m = (0, 0)"
            .into(),
    );
    notes.push("bias(tp): 'implemented' is the second-order expansion; the tp rows carry the printed form".into());
    for r in rows.iter().filter(|r| r.is_negative()) {
        notes.push(format!("{}: negative first-order MSE; the approximation is invalid here", r.estimator));
    }
    notes.extend(reconciliation_notes(rec));
    Document {
        tables: vec![t, d],
        notes,
        data: json!({
            "rows": to_value(&rows),
            "optimum": optimum,
            "diagnostics": to_value(diag),
            "reconciliation": to_value(rec),
        }),
        provenance,
    }
}

fn pre_table_of(report: &PreReport) -> Table {
    let mut t = Table::new("percent relative efficiency", &["estimator", "MSE", "PRE", "rank", "MSE - MSE(tp)"]);
    for r in &report.rows {
        t.push(vec![
            r.estimator.name().into(),
            r.mse.into(),
            r.pre.into(),
            r.rank.into(),
            r.delta_vs_tp.into(),
        ]);
    }
    t
}

pub fn pre_document(
    report: &PreReport,
    dominance: &[DominanceEntry],
    rec: &ReconciliationReport,
    provenance: Provenance,
) -> Document {
    let mut notes = vec![format!(
        "tp evaluated at (m1, m2) = ({}, {})",
        sig6(report.tp_m.0),
        sig6(report.tp_m.1)
    )];
    notes.push(format!("ranking: {}", ranking_line(&report.ranking())));
    for e in dominance.iter().filter(|e| !e.satisfied) {
        notes.push(format!("{} has smaller first-order MSE than tp", e.estimator));
    }
    notes.extend(report.warnings.iter().cloned());
    notes.extend(reconciliation_notes(rec));
    Document {
        tables: vec![pre_table_of(report)],
        notes,
        data: json!({
            "pre": to_value(report),
            "dominance": to_value(&dominance),
            "reconciliation": to_value(rec),
        }),
        provenance,
    }
}

fn ranking_line(r: &[EstimatorKind]) -> String {
    r.iter().map(|k| k.name()).collect::<Vec<_>>().join(" > ")
}

pub fn simulation_document(report: &SimulationReport, provenance: Provenance) -> Document {
    let mut t = Table::new(
        &format!("Monte Carlo, R = {}", report.replications),
        &["estimator", "mean", "bias", "MSE", "first-order MSE", "relative gap", "printed bias", "non-finite"],
    );
    for r in &report.rows {
        t.push(vec![
            r.label.clone().into(),
            r.empirical_mean.into(),
            r.empirical_bias.into(),
            r.empirical_mse.into(),
            r.theoretical_mse.into(),
            r.relative_gap.into(),
            r.theoretical_bias.into(),
            r.non_finite.into(),
        ]);
    }
    let mut ranked: Vec<_> = report.rows.iter().collect();
    ranked.sort_by(|a, b| a.empirical_mse.total_cmp(&b.empirical_mse));
    let notes = vec![
        format!("population fingerprint {}", report.population_fingerprint),
        format!("N_h = {:?}, n_h = {:?}", report.population_sizes, report.sample_sizes),
        format!("population mean of y = {}", sig6(report.population_mean_y)),
        format!(
            "optimal (m1, m2) = ({}, {})",
            sig6(report.optimal_m.0),
            sig6(report.optimal_m.1)
        ),
        format!(
            "empirical ranking: {}",
            ranked.iter().map(|r| r.label.as_str()).collect::<Vec<_>>().join(" > ")
        ),
        format!("generator: {}", report.generator),
    ];
    Document {
        tables: vec![t, moments_table(&report.moments)],
        notes,
        data: to_value(report),
        provenance,
    }
}

pub fn reproduction_document(rep: &Reproduction, provenance: Provenance) -> Document {
    let policies: Vec<String> = rep.columns.iter().map(|c| c.policy.to_string()).collect();
    let mut header: Vec<String> = vec!["estimator".into(), "published PRE".into(), "published rank".into()];
    for p in &policies {
        header.push(format!("PRE [{p}]"));
        header.push(format!("delta [{p}]"));
        header.push(format!("rank [{p}]"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("published vs computed PRE", &header_refs);
    for row in &rep.rows {
        let mut cells: Vec<Cell> = vec![
            row.estimator.name().into(),
            row.published_pre.into(),
            row.published_rank.into(),
        ];
        for c in 0..rep.columns.len() {
            cells.push(row.computed_pre[c].into());
            cells.push(row.delta(c).into());
            let rank = row.computed_rank[c];
            cells.push(if rank == row.published_rank {
                Cell::Int(rank as i64)
            } else {
                Cell::Text(format!("{rank} *"))
            });
        }
        t.push(cells);
    }

    let mut tables = vec![t];
    let mut notes = vec![format!("published ranking: {}", ranking_line(&PUBLISHED_RANKING))];
    for (c, col) in rep.columns.iter().enumerate() {
        let mismatches = rep.rank_mismatches(c);
        notes.push(format!("computed ranking [{}]: {}", col.policy, ranking_line(&rep.ranking(c))));
        notes.push(format!(
            "[{}] tp first and t4 last: {}",
            col.policy,
            if rep.extremes_match(c) { "yes" } else { "NO" }
        ));
        notes.push(if mismatches.is_empty() {
            format!("[{}] every rank matches the published table", col.policy)
        } else {
            format!(
                "[{}] rank mismatches (marked *): {}",
                col.policy,
                mismatches.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
            )
        });
        notes.push(format!(
            "[{}] tp at (m1, m2) = ({}, {})",
            col.policy,
            sig6(col.report.tp_m.0),
            sig6(col.report.tp_m.1)
        ));
        notes.extend(col.report.warnings.iter().map(|w| format!("[{}] {w}", col.policy)));
        let mut log = reconciliation_table(&col.reconciliation);
        log.title = format!("repair log [{}], tolerance {}", col.policy, col.reconciliation.tolerance);
        tables.push(log);
    }
    Document {
        tables,
        notes,
        data: to_value(rep),
        provenance,
    }
}
