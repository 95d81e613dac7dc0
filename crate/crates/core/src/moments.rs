//! Design factors and aggregated relative moments of the stratified means.

use serde::{Deserialize, Serialize};

use crate::data::{Pair, PopulationSummary, SampleDesign, StratumSummary};
use crate::error::{Error, Result};

/// Means smaller than this multiple of the largest stratum SD are zero.
pub const ZERO_MEAN_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignFactor {
    /// `W_h = N_h / N`
    pub weight: f64,
    /// `f_h = 1/n_h - 1/N_h`
    pub fpc: f64,
}

impl DesignFactor {
    /// `W_h^2 f_h`, the weight of stratum `h` in every second moment.
    pub fn moment_weight(&self) -> f64 {
        self.weight * self.weight * self.fpc
    }
}

pub fn design_factors(pop: &PopulationSummary, design: &SampleDesign) -> Result<Vec<DesignFactor>> {
    design.check_against(pop)?;
    Ok(pop
        .weights()
        .into_iter()
        .zip(pop.strata.iter().zip(&design.n_h))
        .map(|(weight, (s, &n))| DesignFactor {
            weight,
            fpc: 1.0 / n as f64 - 1.0 / s.size as f64,
        })
        .collect())
}

/// Relative second moments of `(e0, e1, e2)` plus the combined regression
/// coefficients.
///
/// `v110` is `E(e0 e1)` and so on. `b1`/`b2` are `None` only for a census
/// design, where every moment is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub v200: f64,
    pub v020: f64,
    pub v002: f64,
    pub v110: f64,
    pub v101: f64,
    pub v011: f64,
    pub mean_y: f64,
    pub mean_x: f64,
    pub mean_z: f64,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    /// `sum W_h^2 f_h S_yh^2 (1 - rho_yx^2 - rho_yz^2 + 2 rho_yx rho_yz rho_xz)`,
    /// the stratum-wise two-auxiliary regression MSE.
    pub regression_residual: f64,
}

impl MomentSet {
    /// `(B1 * Xbar / Ybar, B2 * Zbar / Ybar)`: the regression coefficients in
    /// relative units. Zero when the coefficients are undefined (census).
    pub fn relative_coefficients(&self) -> (f64, f64) {
        (
            self.b1.unwrap_or(0.0) * self.mean_x / self.mean_y,
            self.b2.unwrap_or(0.0) * self.mean_z / self.mean_y,
        )
    }

    /// The six moments in the order V200, V020, V002, V110, V101, V011.
    pub fn entries(&self) -> [f64; 6] {
        [self.v200, self.v020, self.v002, self.v110, self.v101, self.v011]
    }

    pub fn is_census(&self) -> bool {
        self.entries().iter().all(|v| *v == 0.0)
    }

    /// Same moments with the regression coefficients replaced.
    pub fn with_coefficients(mut self, b1: f64, b2: f64) -> Self {
        self.b1 = Some(b1);
        self.b2 = Some(b2);
        self
    }

    /// Largest violation of the Cauchy-Schwarz bounds (`<= 0` when they hold).
    pub fn cauchy_schwarz_excess(&self) -> f64 {
        let bound = |a: f64, b: f64| (a * b).max(0.0).sqrt();
        [
            self.v110.abs() - bound(self.v200, self.v020),
            self.v101.abs() - bound(self.v200, self.v002),
            self.v011.abs() - bound(self.v020, self.v002),
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_mean(mean: f64, sds: impl Iterator<Item = f64>, variable: char) -> Result<()> {
    let spread = sds.fold(0.0, f64::max);
    if mean == 0.0 || mean.abs() < ZERO_MEAN_GUARD * spread {
        return Err(Error::ZeroMean(variable));
    }
    Ok(())
}

fn correlation_of(s: &StratumSummary, pair: Pair, cov: f64) -> f64 {
    let scale = s.sd_product(pair);
    if scale == 0.0 {
        0.0
    } else {
        cov / scale
    }
}

/// Aggregates the stratum summaries into a [`MomentSet`].
///
/// Consumes covariances, so the summary should be reconciled first: under
/// the default policy its covariances are `rho * S_a * S_b`.
pub fn moment_set(pop: &PopulationSummary, design: &SampleDesign) -> Result<MomentSet> {
    pop.validate()?;
    let factors = design_factors(pop, design)?;
    let (mean_y, mean_x, mean_z) = (pop.mean_y(), pop.mean_x(), pop.mean_z());
    check_mean(mean_y, pop.strata.iter().map(|s| s.sd_y), 'y')?;
    check_mean(mean_x, pop.strata.iter().map(|s| s.sd_x), 'x')?;
    check_mean(mean_z, pop.strata.iter().map(|s| s.sd_z), 'z')?;

    let mut sums = [0.0; 7];
    for (s, factor) in pop.strata.iter().zip(&factors) {
        let a = factor.moment_weight();
        let cov_yx = s.require_covariance(Pair::Yx)?;
        let cov_yz = s.require_covariance(Pair::Yz)?;
        let cov_xz = s.require_covariance(Pair::Xz)?;
        let r_yx = correlation_of(s, Pair::Yx, cov_yx);
        let r_yz = correlation_of(s, Pair::Yz, cov_yz);
        let r_xz = correlation_of(s, Pair::Xz, cov_xz);
        sums[0] += a * s.sd_y * s.sd_y;
        sums[1] += a * s.sd_x * s.sd_x;
        sums[2] += a * s.sd_z * s.sd_z;
        sums[3] += a * cov_yx;
        sums[4] += a * cov_yz;
        sums[5] += a * cov_xz;
        sums[6] += a
            * s.sd_y
            * s.sd_y
            * (1.0 - r_yx * r_yx - r_yz * r_yz + 2.0 * r_yx * r_yz * r_xz);
    }
    let [syy, sxx, szz, syx, syz, sxz, residual] = sums;

    let census = factors.iter().all(|f| f.fpc == 0.0);
    let coefficient = |num: f64, den: f64, name: &str| -> Result<Option<f64>> {
        if census {
            Ok(None)
        } else if den == 0.0 {
            Err(Error::ZeroDenominator(format!("{name}: sum of W_h^2 f_h S^2 is zero")))
        } else {
            Ok(Some(num / den))
        }
    };

    Ok(MomentSet {
        v200: syy / (mean_y * mean_y),
        v020: sxx / (mean_x * mean_x),
        v002: szz / (mean_z * mean_z),
        v110: syx / (mean_y * mean_x),
        v101: syz / (mean_y * mean_z),
        v011: sxz / (mean_x * mean_z),
        mean_y,
        mean_x,
        mean_z,
        b1: coefficient(syx, sxx, "B1")?,
        b2: coefficient(syz, szz, "B2")?,
        regression_residual: residual,
    })
}
