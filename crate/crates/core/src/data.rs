//! Population summaries, sample designs and microdata.
//!
//! A [`PopulationSummary`] holds the known per-stratum population quantities
//! for the study variable `y` and the two auxiliaries `x` and `z`. It can be
//! read from a summary document, computed from [`Microdata`] with
//! [`summarize`], or taken from the embedded dataset in [`crate::kk2009`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three variable pairs carrying a covariance and a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    #[serde(rename = "yx")]
    Yx,
    #[serde(rename = "yz")]
    Yz,
    #[serde(rename = "xz")]
    Xz,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::Yx, Pair::Yz, Pair::Xz];

    pub fn covariance_field(self) -> &'static str {
        match self {
            Pair::Yx => "S_yxh",
            Pair::Yz => "S_yzh",
            Pair::Xz => "S_xzh",
        }
    }

    pub fn correlation_field(self) -> &'static str {
        match self {
            Pair::Yx => "rho_yxh",
            Pair::Yz => "rho_yzh",
            Pair::Xz => "rho_xzh",
        }
    }

    /// The two pairs that share a variable with `self`.
    pub fn others(self) -> (Pair, Pair) {
        match self {
            Pair::Yx => (Pair::Yz, Pair::Xz),
            Pair::Yz => (Pair::Yx, Pair::Xz),
            Pair::Xz => (Pair::Yx, Pair::Yz),
        }
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pair::Yx => "yx",
            Pair::Yz => "yz",
            Pair::Xz => "xz",
        })
    }
}

/// Known population quantities of a single stratum.
///
/// SDs and covariances use divisor `N_h - 1`. Covariances and correlations
/// are optional on input; [`crate::reconcile::reconcile_covariances`] fills
/// in whichever side is missing and resolves conflicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSummary {
    pub h: usize,
    #[serde(rename = "N_h")]
    pub size: usize,
    #[serde(rename = "Ybar_h")]
    pub mean_y: f64,
    #[serde(rename = "Xbar_h")]
    pub mean_x: f64,
    #[serde(rename = "Zbar_h")]
    pub mean_z: f64,
    #[serde(rename = "S_yh")]
    pub sd_y: f64,
    #[serde(rename = "S_xh")]
    pub sd_x: f64,
    #[serde(rename = "S_zh")]
    pub sd_z: f64,
    #[serde(rename = "S_yxh", default, skip_serializing_if = "Option::is_none")]
    pub cov_yx: Option<f64>,
    #[serde(rename = "S_yzh", default, skip_serializing_if = "Option::is_none")]
    pub cov_yz: Option<f64>,
    #[serde(rename = "S_xzh", default, skip_serializing_if = "Option::is_none")]
    pub cov_xz: Option<f64>,
    #[serde(rename = "rho_yxh", default, skip_serializing_if = "Option::is_none")]
    pub rho_yx: Option<f64>,
    #[serde(rename = "rho_yzh", default, skip_serializing_if = "Option::is_none")]
    pub rho_yz: Option<f64>,
    #[serde(rename = "rho_xzh", default, skip_serializing_if = "Option::is_none")]
    pub rho_xz: Option<f64>,
    /// Kurtosis metadata. Carried through, never used in a computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_z: Option<f64>,
}

impl StratumSummary {
    pub fn covariance(&self, pair: Pair) -> Option<f64> {
        match pair {
            Pair::Yx => self.cov_yx,
            Pair::Yz => self.cov_yz,
            Pair::Xz => self.cov_xz,
        }
    }

    pub fn correlation(&self, pair: Pair) -> Option<f64> {
        match pair {
            Pair::Yx => self.rho_yx,
            Pair::Yz => self.rho_yz,
            Pair::Xz => self.rho_xz,
        }
    }

    pub fn set_covariance(&mut self, pair: Pair, value: f64) {
        match pair {
            Pair::Yx => self.cov_yx = Some(value),
            Pair::Yz => self.cov_yz = Some(value),
            Pair::Xz => self.cov_xz = Some(value),
        }
    }

    pub fn set_correlation(&mut self, pair: Pair, value: f64) {
        match pair {
            Pair::Yx => self.rho_yx = Some(value),
            Pair::Yz => self.rho_yz = Some(value),
            Pair::Xz => self.rho_xz = Some(value),
        }
    }

    /// Product of the two standard deviations involved in `pair`.
    pub fn sd_product(&self, pair: Pair) -> f64 {
        match pair {
            Pair::Yx => self.sd_y * self.sd_x,
            Pair::Yz => self.sd_y * self.sd_z,
            Pair::Xz => self.sd_x * self.sd_z,
        }
    }

    pub fn require_covariance(&self, pair: Pair) -> Result<f64> {
        self.covariance(pair).ok_or(Error::MissingField {
            stratum: self.h,
            field: pair.covariance_field(),
        })
    }

    pub fn require_correlation(&self, pair: Pair) -> Result<f64> {
        self.correlation(pair).ok_or(Error::MissingField {
            stratum: self.h,
            field: pair.correlation_field(),
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidStratum {
            stratum: self.h,
            message,
        };
        if self.size < 2 {
            return Err(bad(format!("N_h = {} (at least 2 required)", self.size)));
        }
        for (name, v) in [("Ybar_h", self.mean_y), ("Xbar_h", self.mean_x), ("Zbar_h", self.mean_z)] {
            if !v.is_finite() {
                return Err(bad(format!("{name} is not finite")));
            }
        }
        for (name, sd) in [("S_yh", self.sd_y), ("S_xh", self.sd_x), ("S_zh", self.sd_z)] {
            if !(sd.is_finite() && sd >= 0.0) {
                return Err(bad(format!("{name} = {sd} (must be finite and >= 0)")));
            }
        }
        for pair in Pair::ALL {
            if let Some(rho) = self.correlation(pair) {
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(bad(format!("{} = {rho} outside [-1, 1]", pair.correlation_field())));
                }
            }
            if let Some(cov) = self.covariance(pair) {
                if !cov.is_finite() {
                    return Err(bad(format!("{} is not finite", pair.covariance_field())));
                }
            }
        }
        Ok(())
    }
}

/// Per-stratum population summaries for the whole population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSummary {
    pub strata: Vec<StratumSummary>,
}

impl PopulationSummary {
    /// Checks the structural invariants: at least one stratum, indices
    /// `1..=L` in order, and every stratum individually valid.
    pub fn new(strata: Vec<StratumSummary>) -> Result<Self> {
        let summary = PopulationSummary { strata };
        summary.validate()?;
        Ok(summary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return Err(Error::Summary("at least one stratum is required".into()));
        }
        for (i, s) in self.strata.iter().enumerate() {
            if s.h != i + 1 {
                return Err(Error::Summary(format!(
                    "stratum indices must be 1..=L in order; position {} has h = {}",
                    i + 1,
                    s.h
                )));
            }
            s.validate()?;
        }
        Ok(())
    }

    pub fn num_strata(&self) -> usize {
        self.strata.len()
    }

    pub fn total_size(&self) -> usize {
        self.strata.iter().map(|s| s.size).sum()
    }

    /// Stratum weights `W_h = N_h / N`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.total_size() as f64;
        self.strata.iter().map(|s| s.size as f64 / n).collect()
    }

    fn weighted(&self, f: impl Fn(&StratumSummary) -> f64) -> f64 {
        self.weights()
            .iter()
            .zip(&self.strata)
            .map(|(w, s)| w * f(s))
            .sum()
    }

    pub fn mean_y(&self) -> f64 {
        self.weighted(|s| s.mean_y)
    }

    pub fn mean_x(&self) -> f64 {
        self.weighted(|s| s.mean_x)
    }

    pub fn mean_z(&self) -> f64 {
        self.weighted(|s| s.mean_z)
    }
}

/// Per-stratum sample sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDesign {
    pub n_h: Vec<usize>,
}

impl SampleDesign {
    pub fn new(n_h: Vec<usize>) -> Self {
        SampleDesign { n_h }
    }

    pub fn total(&self) -> usize {
        self.n_h.iter().sum()
    }

    /// Checks `1 <= n_h <= N_h` for every stratum of `sizes`.
    pub fn check_sizes(&self, sizes: &[usize]) -> Result<()> {
        if self.n_h.len() != sizes.len() {
            return Err(Error::Design(format!(
                "design has {} strata but the population has {}",
                self.n_h.len(),
                sizes.len()
            )));
        }
        for (h, (&n, &big_n)) in self.n_h.iter().zip(sizes).enumerate() {
            if n == 0 {
                return Err(Error::Design(format!("stratum {}: n_h = 0", h + 1)));
            }
            if n > big_n {
                return Err(Error::Design(format!(
                    "stratum {}: n_h = {n} exceeds N_h = {big_n}",
                    h + 1
                )));
            }
        }
        Ok(())
    }

    pub fn check_against(&self, pop: &PopulationSummary) -> Result<()> {
        let sizes: Vec<usize> = pop.strata.iter().map(|s| s.size).collect();
        self.check_sizes(&sizes)
    }
}

/// A summary document: population summary plus an optional sample design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDocument {
    pub strata: Vec<StratumSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_h: Option<Vec<usize>>,
}

impl SummaryDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: SummaryDocument =
            serde_json::from_str(text).map_err(|e| Error::Summary(e.to_string()))?;
        PopulationSummary {
            strata: doc.strata.clone(),
        }
        .validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary documents always serialize")
    }

    pub fn from_parts(pop: &PopulationSummary, design: Option<&SampleDesign>) -> Self {
        SummaryDocument {
            strata: pop.strata.clone(),
            n_h: design.map(|d| d.n_h.clone()),
        }
    }

    pub fn into_parts(self) -> (PopulationSummary, Option<SampleDesign>) {
        (
            PopulationSummary {
                strata: self.strata,
            },
            self.n_h.map(SampleDesign::new),
        )
    }
}

/// One observed unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub y: f64,
    pub x: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroStratum {
    pub label: String,
    pub units: Vec<Unit>,
}

/// Unit-level population records grouped by stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct Microdata {
    pub strata: Vec<MicroStratum>,
}

impl Microdata {
    pub fn sizes(&self) -> Vec<usize> {
        self.strata.iter().map(|s| s.units.len()).collect()
    }

    pub fn num_records(&self) -> usize {
        self.strata.iter().map(|s| s.units.len()).sum()
    }

    /// Renders the records as a `stratum,y,x,z` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stratum,y,x,z\n");
        for s in &self.strata {
            for u in &s.units {
                out.push_str(&format!("{},{},{},{}\n", s.label, u.y, u.x, u.z));
            }
        }
        out
    }
}

const MICRODATA_HEADER: [&str; 4] = ["stratum", "y", "x", "z"];

/// Parses a comma-separated `stratum,y,x,z` table.
///
/// Strata are ordered by first appearance; line numbers in errors are
/// 1-based and count the header.
pub fn parse_microdata(text: &str) -> Result<Microdata> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(MICRODATA_HEADER) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header `stratum,y,x,z`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut strata: Vec<MicroStratum> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let mut values = [0.0; 3];
        for (slot, column) in values.iter_mut().zip(1..4) {
            let cell = &record[column];
            *slot = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::NonNumeric {
                    line,
                    column: MICRODATA_HEADER[column].to_string(),
                    value: cell.to_string(),
                }
            })?;
        }
        let unit = Unit {
            y: values[0],
            x: values[1],
            z: values[2],
        };
        let label = &record[0];
        match strata.iter_mut().find(|s| s.label == label) {
            Some(s) => s.units.push(unit),
            None => strata.push(MicroStratum {
                label: label.to_string(),
                units: vec![unit],
            }),
        }
    }

    if strata.is_empty() {
        return Err(Error::NoRecords);
    }
    if let Some(s) = strata.iter().find(|s| s.units.len() < 2) {
        return Err(Error::TooFewRecords {
            label: s.label.clone(),
            count: s.units.len(),
        });
    }
    Ok(Microdata { strata })
}

/// Means, SDs (divisor `len - 1`) and covariances of a set of units.
pub(crate) struct UnitMoments {
    pub mean: [f64; 3],
    pub sd: [f64; 3],
    /// yx, yz, xz
    pub cov: [f64; 3],
}

pub(crate) fn unit_moments(units: &[Unit]) -> UnitMoments {
    let n = units.len() as f64;
    let mut mean = [0.0; 3];
    for u in units {
        mean[0] += u.y;
        mean[1] += u.x;
        mean[2] += u.z;
    }
    for m in &mut mean {
        *m /= n;
    }
    // sums of squares / cross products: yy, xx, zz, yx, yz, xz
    let mut ss = [0.0; 6];
    for u in units {
        let (dy, dx, dz) = (u.y - mean[0], u.x - mean[1], u.z - mean[2]);
        ss[0] += dy * dy;
        ss[1] += dx * dx;
        ss[2] += dz * dz;
        ss[3] += dy * dx;
        ss[4] += dy * dz;
        ss[5] += dx * dz;
    }
    let d = n - 1.0;
    UnitMoments {
        mean,
        sd: [(ss[0] / d).sqrt(), (ss[1] / d).sqrt(), (ss[2] / d).sqrt()],
        cov: [ss[3] / d, ss[4] / d, ss[5] / d],
    }
}

/// Computes exact finite-population stratum summaries from microdata.
pub fn summarize(micro: &Microdata) -> Result<PopulationSummary> {
    let mut strata = Vec::with_capacity(micro.strata.len());
    for (i, ms) in micro.strata.iter().enumerate() {
        let h = i + 1;
        if ms.units.len() < 2 {
            return Err(Error::TooFewRecords {
                label: ms.label.clone(),
                count: ms.units.len(),
            });
        }
        let m = unit_moments(&ms.units);
        for (sd, variable) in m.sd.iter().zip(['y', 'x', 'z']) {
            if *sd == 0.0 {
                return Err(Error::ZeroVariance { stratum: h, variable });
            }
        }
        let [sy, sx, sz] = m.sd;
        strata.push(StratumSummary {
            h,
            size: ms.units.len(),
            mean_y: m.mean[0],
            mean_x: m.mean[1],
            mean_z: m.mean[2],
            sd_y: sy,
            sd_x: sx,
            sd_z: sz,
            cov_yx: Some(m.cov[0]),
            cov_yz: Some(m.cov[1]),
            cov_xz: Some(m.cov[2]),
            rho_yx: Some((m.cov[0] / (sy * sx)).clamp(-1.0, 1.0)),
            rho_yz: Some((m.cov[1] / (sy * sz)).clamp(-1.0, 1.0)),
            rho_xz: Some((m.cov[2] / (sx * sz)).clamp(-1.0, 1.0)),
            beta2_x: None,
            beta2_y: None,
            beta2_z: None,
        });
    }
    PopulationSummary::new(strata)
}
