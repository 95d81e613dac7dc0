//! Point estimators of the population mean from a stratified sample.

use serde::{Deserialize, Serialize};

use crate::data::{PopulationSummary, SampleDesign, Unit};
use crate::error::{Error, Result};

/// Estimator labels in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "t1")]
    T1,
    #[serde(rename = "t2")]
    T2,
    #[serde(rename = "t3")]
    T3,
    #[serde(rename = "t4")]
    T4,
    #[serde(rename = "t5")]
    T5,
    #[serde(rename = "t6")]
    T6,
    #[serde(rename = "t7")]
    T7,
    #[serde(rename = "tp")]
    Tp,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        EstimatorKind::Mean,
        EstimatorKind::T1,
        EstimatorKind::T2,
        EstimatorKind::T3,
        EstimatorKind::T4,
        EstimatorKind::T5,
        EstimatorKind::T6,
        EstimatorKind::T7,
        EstimatorKind::Tp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mean => "mean",
            EstimatorKind::T1 => "t1",
            EstimatorKind::T2 => "t2",
            EstimatorKind::T3 => "t3",
            EstimatorKind::T4 => "t4",
            EstimatorKind::T5 => "t5",
            EstimatorKind::T6 => "t6",
            EstimatorKind::T7 => "t7",
            EstimatorKind::Tp => "tp",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An estimator, with the exponent parameters for `tp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "lowercase")]
pub enum EstimatorId {
    Mean,
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    Tp { m1: f64, m2: f64 },
}

impl EstimatorId {
    /// The fixed-form estimators `mean, t1..t7`.
    pub const CLASSIC: [EstimatorId; 8] = [
        EstimatorId::Mean,
        EstimatorId::T1,
        EstimatorId::T2,
        EstimatorId::T3,
        EstimatorId::T4,
        EstimatorId::T5,
        EstimatorId::T6,
        EstimatorId::T7,
    ];

    pub fn tp(m1: f64, m2: f64) -> Result<Self> {
        if !(m1.is_finite() && m2.is_finite()) {
            return Err(Error::Config(format!("tp requires finite m1, m2 (got {m1}, {m2})")));
        }
        Ok(EstimatorId::Tp { m1, m2 })
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorId::Mean => EstimatorKind::Mean,
            EstimatorId::T1 => EstimatorKind::T1,
            EstimatorId::T2 => EstimatorKind::T2,
            EstimatorId::T3 => EstimatorKind::T3,
            EstimatorId::T4 => EstimatorKind::T4,
            EstimatorId::T5 => EstimatorKind::T5,
            EstimatorId::T6 => EstimatorKind::T6,
            EstimatorId::T7 => EstimatorKind::T7,
            EstimatorId::Tp { .. } => EstimatorKind::Tp,
        }
    }

    pub fn needs_coefficients(&self) -> bool {
        matches!(self, EstimatorId::T7 | EstimatorId::Tp { .. })
    }

    /// Exponent weights on the x and z exponential factors, for the
    /// estimators of exponential form.
    fn exponents(&self) -> Option<(f64, f64)> {
        match *self {
            EstimatorId::T2 => Some((1.0, 0.0)),
            EstimatorId::T3 => Some((1.0, 1.0)),
            EstimatorId::T4 => Some((-1.0, -1.0)),
            EstimatorId::T5 => Some((1.0, -1.0)),
            EstimatorId::T6 => Some((-1.0, 1.0)),
            EstimatorId::Tp { m1, m2 } => Some((m1, m2)),
            _ => None,
        }
    }

    /// Evaluates the estimator from sample statistics and the known
    /// population means.
    pub fn evaluate(&self, stats: &SampleStats, pop: &PopulationMeans) -> Result<f64> {
        let dx = pop.x - stats.xbar;
        let dz = pop.z - stats.zbar;
        let value = match *self {
            EstimatorId::Mean => stats.ybar,
            EstimatorId::T1 => {
                if stats.xbar == 0.0 {
                    return Err(Error::ZeroDenominator("t1: sample mean of x is zero".into()));
                }
                stats.ybar * (pop.x / stats.xbar)
            }
            EstimatorId::T7 => stats.ybar + stats.b1 * dx + stats.b2 * dz,
            _ => {
                let (m1, m2) = self.exponents().expect("exponential form");
                let sx = pop.x + stats.xbar;
                let sz = pop.z + stats.zbar;
                if sx == 0.0 || (m2 != 0.0 && sz == 0.0) {
                    return Err(Error::ZeroDenominator(format!(
                        "{}: population plus sample mean is zero",
                        self.kind()
                    )));
                }
                let rz = if m2 == 0.0 { 0.0 } else { dz / sz };
                let ratio = stats.ybar * (m1 * (dx / sx)).exp() * (m2 * rz).exp();
                match self {
                    EstimatorId::Tp { .. } => ratio + stats.b1 * dx + stats.b2 * dz,
                    _ => ratio,
                }
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFinite(self.kind().to_string()));
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationMeans {
    pub y: f64,
    pub x: f64,
    pub z: f64,
}

impl PopulationMeans {
    pub fn of(pop: &PopulationSummary) -> Self {
        PopulationMeans {
            y: pop.mean_y(),
            x: pop.mean_x(),
            z: pop.mean_z(),
        }
    }
}

/// Stratified sample means and the sample regression coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub ybar: f64,
    pub xbar: f64,
    pub zbar: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Units drawn from each stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSample {
    pub strata: Vec<Vec<Unit>>,
    pub design: SampleDesign,
}

impl StratifiedSample {
    pub fn new(strata: Vec<Vec<Unit>>, design: SampleDesign) -> Result<Self> {
        if strata.len() != design.n_h.len() {
            return Err(Error::Design(format!(
                "sample has {} strata, design has {}",
                strata.len(),
                design.n_h.len()
            )));
        }
        for (h, (units, &n)) in strata.iter().zip(&design.n_h).enumerate() {
            if units.len() != n {
                return Err(Error::Design(format!(
                    "stratum {}: {} units drawn, design says {n}",
                    h + 1,
                    units.len()
                )));
            }
        }
        Ok(StratifiedSample { strata, design })
    }

    fn conform(&self, pop: &PopulationSummary) -> Result<()> {
        self.design.check_against(pop)?;
        if let Some(h) = self.strata.iter().position(|s| s.is_empty()) {
            return Err(Error::Design(format!("stratum {}: empty sample", h + 1)));
        }
        Ok(())
    }
}

fn mean_of(units: &[Unit]) -> (f64, f64, f64) {
    let n = units.len() as f64;
    let (sy, sx, sz) = units
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, c), u| (a + u.y, b + u.x, c + u.z));
    (sy / n, sx / n, sz / n)
}

/// `(ybar_st, xbar_st, zbar_st)`, each `sum W_h * (stratum sample mean)`.
pub fn stratified_means(sample: &StratifiedSample, pop: &PopulationSummary) -> Result<(f64, f64, f64)> {
    sample.conform(pop)?;
    let weights = pop.weights();
    let mut out = (0.0, 0.0, 0.0);
    for (w, units) in weights.iter().zip(&sample.strata) {
        let (y, x, z) = mean_of(units);
        out.0 += w * y;
        out.1 += w * x;
        out.2 += w * z;
    }
    Ok(out)
}

/// Combined sample regression coefficients
/// `b1 = sum W_h^2 f_h s_yxh / sum W_h^2 f_h s_xh^2` and likewise `b2` with `z`.
///
/// Sample moments use divisor `n_h - 1`. A census design (every `f_h = 0`)
/// falls back to `W_h^2` weights.
pub fn sample_regression_coeffs(sample: &StratifiedSample, pop: &PopulationSummary) -> Result<(f64, f64)> {
    sample.conform(pop)?;
    let weights = pop.weights();
    let mut a: Vec<f64> = weights
        .iter()
        .zip(pop.strata.iter().zip(&sample.strata))
        .map(|(w, (s, units))| w * w * (1.0 / units.len() as f64 - 1.0 / s.size as f64))
        .collect();
    if a.iter().all(|v| *v == 0.0) {
        a = weights.iter().map(|w| w * w).collect();
    }

    let (mut syx, mut sxx, mut syz, mut szz) = (0.0, 0.0, 0.0, 0.0);
    for (h, (units, ah)) in sample.strata.iter().zip(&a).enumerate() {
        if units.len() < 2 {
            return Err(Error::Design(format!(
                "stratum {}: at least 2 sampled units are needed for regression coefficients",
                h + 1
            )));
        }
        let (my, mx, mz) = mean_of(units);
        let d = units.len() as f64 - 1.0;
        let (mut cyx, mut cxx, mut cyz, mut czz) = (0.0, 0.0, 0.0, 0.0);
        for u in units {
            let (dy, dx, dz) = (u.y - my, u.x - mx, u.z - mz);
            cyx += dy * dx;
            cxx += dx * dx;
            cyz += dy * dz;
            czz += dz * dz;
        }
        syx += ah * cyx / d;
        sxx += ah * cxx / d;
        syz += ah * cyz / d;
        szz += ah * czz / d;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroDenominator("b1: no sample variation in x".into()));
    }
    if szz == 0.0 {
        return Err(Error::ZeroDenominator("b2: no sample variation in z".into()));
    }
    Ok((syx / sxx, syz / szz))
}

/// Sample statistics with regression coefficients computed only if `needed`.
pub fn sample_stats(sample: &StratifiedSample, pop: &PopulationSummary, needed: bool) -> Result<SampleStats> {
    let (ybar, xbar, zbar) = stratified_means(sample, pop)?;
    let (b1, b2) = if needed {
        sample_regression_coeffs(sample, pop)?
    } else {
        (0.0, 0.0)
    };
    Ok(SampleStats {
        ybar,
        xbar,
        zbar,
        b1,
        b2,
    })
}

pub fn point_estimate(id: EstimatorId, sample: &StratifiedSample, pop: &PopulationSummary) -> Result<f64> {
    let stats = sample_stats(sample, pop, id.needs_coefficients())?;
    id.evaluate(&stats, &PopulationMeans::of(pop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StratumSummary;

    fn stratum(h: usize, size: usize, mean: f64) -> StratumSummary {
        StratumSummary {
            h,
            size,
            mean_y: mean,
            mean_x: mean,
            mean_z: mean,
            sd_y: 1.0,
            sd_x: 1.0,
            sd_z: 1.0,
            cov_yx: Some(0.0),
            cov_yz: Some(0.0),
            cov_xz: Some(0.0),
            rho_yx: None,
            rho_yz: None,
            rho_xz: None,
            beta2_x: None,
            beta2_y: None,
            beta2_z: None,
        }
    }

    fn unit(y: f64, x: f64, z: f64) -> Unit {
        Unit { y, x, z }
    }

    #[test]
    fn single_stratum_mean() {
        let pop = PopulationSummary::new(vec![stratum(1, 10, 3.0)]).unwrap();
        let s = StratifiedSample::new(vec![vec![unit(2.0, 1.0, 1.0), unit(4.0, 2.0, 3.0)]], SampleDesign::new(vec![2])).unwrap();
        assert_eq!(stratified_means(&s, &pop).unwrap().0, 3.0);
    }

    #[test]
    fn weighted_stratum_means() {
        let pop = PopulationSummary::new(vec![stratum(1, 100, 1.0), stratum(2, 300, 2.0)]).unwrap();
        let s = StratifiedSample::new(
            vec![vec![unit(1.0, 1.0, 1.0)], vec![unit(2.0, 2.0, 2.0)]],
            SampleDesign::new(vec![1, 1]),
        )
        .unwrap();
        assert_eq!(stratified_means(&s, &pop).unwrap().0, 1.75);
    }

    #[test]
    fn exact_linearity_gives_slope() {
        let pop = PopulationSummary::new(vec![stratum(1, 100, 1.0), stratum(2, 50, 2.0)]).unwrap();
        let a = vec![unit(2.0, 1.0, 1.0), unit(6.0, 3.0, 2.0), unit(10.0, 5.0, 4.0)];
        let b = vec![unit(14.0, 7.0, 1.0), unit(2.0, 1.0, 9.0), unit(4.0, 2.0, 3.0)];
        let s = StratifiedSample::new(vec![a, b], SampleDesign::new(vec![3, 3])).unwrap();
        let (b1, _) = sample_regression_coeffs(&s, &pop).unwrap();
        assert!((b1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn uncorrelated_sample_gives_zero_slope() {
        let pop = PopulationSummary::new(vec![stratum(1, 100, 1.0)]).unwrap();
        // x deviations (-1, 0, 1) against y deviations (1, -2, 1)
        let s = StratifiedSample::new(
            vec![vec![unit(1.0, 1.0, 1.0), unit(-2.0, 2.0, 2.0), unit(1.0, 3.0, 4.0)]],
            SampleDesign::new(vec![3]),
        )
        .unwrap();
        let (b1, _) = sample_regression_coeffs(&s, &pop).unwrap();
        assert_eq!(b1, 0.0);
    }

    #[test]
    fn constant_x_is_zero_denominator() {
        let pop = PopulationSummary::new(vec![stratum(1, 100, 1.0)]).unwrap();
        let s = StratifiedSample::new(
            vec![vec![unit(1.0, 1.0, 1.0), unit(2.0, 1.0, 2.0)]],
            SampleDesign::new(vec![2]),
        )
        .unwrap();
        let err = sample_regression_coeffs(&s, &pop).unwrap_err();
        assert!(err.to_string().contains("b1"), "{err}");
    }

    #[test]
    fn t1_arithmetic() {
        let stats = SampleStats { ybar: 10.0, xbar: 5.0, zbar: 1.0, b1: 0.0, b2: 0.0 };
        let pop = PopulationMeans { y: 1.0, x: 10.0, z: 1.0 };
        assert_eq!(EstimatorId::T1.evaluate(&stats, &pop).unwrap(), 20.0);
    }

    #[test]
    fn at_population_means_everything_collapses() {
        let stats = SampleStats { ybar: 7.5, xbar: 3.0, zbar: 2.0, b1: 1.3, b2: -0.4 };
        let pop = PopulationMeans { y: 7.0, x: 3.0, z: 2.0 };
        for id in EstimatorId::CLASSIC.into_iter().chain([EstimatorId::Tp { m1: 0.7, m2: -2.0 }]) {
            assert_eq!(id.evaluate(&stats, &pop).unwrap(), 7.5, "{id:?}");
        }
    }

    #[test]
    fn nesting_at_point_level() {
        let base = SampleStats { ybar: 7.5, xbar: 3.3, zbar: 1.7, b1: 0.0, b2: 0.0 };
        let pop = PopulationMeans { y: 7.0, x: 3.0, z: 2.0 };
        let eval = |id: EstimatorId, s: &SampleStats| id.evaluate(s, &pop).unwrap();
        assert_eq!(eval(EstimatorId::Tp { m1: 0.0, m2: 0.0 }, &base), 7.5);
        assert_eq!(eval(EstimatorId::Tp { m1: 1.0, m2: 1.0 }, &base), eval(EstimatorId::T3, &base));
        assert_eq!(eval(EstimatorId::Tp { m1: -1.0, m2: -1.0 }, &base), eval(EstimatorId::T4, &base));
        assert_eq!(eval(EstimatorId::Tp { m1: 1.0, m2: -1.0 }, &base), eval(EstimatorId::T5, &base));
        assert_eq!(eval(EstimatorId::Tp { m1: -1.0, m2: 1.0 }, &base), eval(EstimatorId::T6, &base));
        let with_b = SampleStats { b1: 0.8, b2: 1.9, ..base };
        assert_eq!(eval(EstimatorId::Tp { m1: 0.0, m2: 0.0 }, &with_b), eval(EstimatorId::T7, &with_b));
    }

    #[test]
    fn guards() {
        let stats = SampleStats { ybar: 1.0, xbar: 0.0, zbar: 1.0, b1: 0.0, b2: 0.0 };
        let pop = PopulationMeans { y: 1.0, x: 0.0, z: 1.0 };
        assert!(EstimatorId::T1.evaluate(&stats, &pop).is_err());
        assert!(EstimatorId::T3.evaluate(&stats, &pop).is_err());
        assert!(EstimatorId::tp(f64::NAN, 1.0).is_err());
        let huge = SampleStats { ybar: 1e300, xbar: 1.0, zbar: 1.0, b1: 0.0, b2: 0.0 };
        let pop = PopulationMeans { y: 1.0, x: 1e10, z: 1.0 };
        assert!(matches!(
            EstimatorId::T1.evaluate(&huge, &pop).unwrap_err(),
            Error::NonFinite(_)
        ));
    }

    #[test]
    fn sample_must_match_design() {
        assert!(StratifiedSample::new(vec![vec![]], SampleDesign::new(vec![1])).is_err());
    }
}
