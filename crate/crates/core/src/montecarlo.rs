//! Monte Carlo validation of the first-order theory.
//!
//! A finite population is generated once from a trivariate normal per
//! stratum and then frozen. Replications draw stratified SRSWOR samples
//! from it and record every estimator's error against the realized
//! population mean.
//!
//! Random streams: every generator is `ChaCha8Rng::seed_from_u64(seed)`
//! followed by `set_stream(stream)`. Replication `r` uses the simulation's
//! master seed with stream `r`; population generation uses the config seed
//! with stream [`POPULATION_STREAM`]. ChaCha streams never overlap, so
//! replications are independent by construction and can run in any order.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{summarize, MicroStratum, Microdata, PopulationSummary, SampleDesign, Unit};
use crate::estimators::{sample_regression_coeffs, stratified_means, EstimatorId, EstimatorKind, PopulationMeans, SampleStats, StratifiedSample};
use crate::error::{Error, Result};
use crate::moments::{moment_set, MomentSet, ZERO_MEAN_GUARD};
use crate::theory::{bias_tp, mse_classic, mse_tp, optimal_m};

pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed) + set_stream(index)";

pub const POPULATION_STREAM: u64 = u64::MAX;

/// Largest tolerated fraction of non-finite replications per estimator.
pub const MAX_NON_FINITE_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticStratum {
    pub size: usize,
    pub mean_y: f64,
    pub mean_x: f64,
    pub mean_z: f64,
    pub sd_y: f64,
    pub sd_x: f64,
    pub sd_z: f64,
    pub rho_yx: f64,
    pub rho_yz: f64,
    pub rho_xz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPopulationConfig {
    pub strata: Vec<SyntheticStratum>,
    pub seed: u64,
}

impl SyntheticPopulationConfig {
    /// Three strata of sizes 200/300/500 with correlations (0.9, 0.8, 0.7)
    /// and coefficients of variation 0.2. Every stratum has the same y-on-x
    /// and y-on-z slopes.
    pub fn reference(seed: u64) -> Self {
        let strata = [(200, 1.0), (300, 1.5), (500, 2.0)]
            .into_iter()
            .map(|(size, k)| SyntheticStratum {
                size,
                mean_y: 100.0 * k,
                mean_x: 50.0 * k,
                mean_z: 20.0 * k,
                sd_y: 20.0 * k,
                sd_x: 10.0 * k,
                sd_z: 4.0 * k,
                rho_yx: 0.9,
                rho_yz: 0.8,
                rho_xz: 0.7,
            })
            .collect();
        SyntheticPopulationConfig { strata, seed }
    }

    /// Sample sizes 20/30/50, matching [`Self::reference`].
    pub fn reference_design() -> SampleDesign {
        SampleDesign::new(vec![20, 30, 50])
    }
}

/// Lower-triangular factor of the `(y, x, z)` correlation matrix.
fn correlation_factor(s: &SyntheticStratum, h: usize) -> Result<[[f64; 3]; 3]> {
    const TOL: f64 = 1e-12;
    let not_psd = || Error::NotPositiveSemiDefinite {
        stratum: h,
        yx: s.rho_yx,
        yz: s.rho_yz,
        xz: s.rho_xz,
    };
    for r in [s.rho_yx, s.rho_yz, s.rho_xz] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(not_psd());
        }
    }
    let l22 = (1.0 - s.rho_yx * s.rho_yx).max(0.0).sqrt();
    let l32 = if l22 > TOL {
        (s.rho_xz - s.rho_yz * s.rho_yx) / l22
    } else if (s.rho_xz - s.rho_yz * s.rho_yx).abs() <= TOL {
        0.0
    } else {
        return Err(not_psd());
    };
    let rest = 1.0 - s.rho_yz * s.rho_yz - l32 * l32;
    if rest < -TOL {
        return Err(not_psd());
    }
    Ok([
        [1.0, 0.0, 0.0],
        [s.rho_yx, l22, 0.0],
        [s.rho_yz, l32, rest.max(0.0).sqrt()],
    ])
}

fn validate_config(cfg: &SyntheticPopulationConfig) -> Result<()> {
    if cfg.strata.is_empty() {
        return Err(Error::Config("at least one stratum is required".into()));
    }
    for (i, s) in cfg.strata.iter().enumerate() {
        if s.size < 2 {
            return Err(Error::Config(format!("stratum {}: size must be at least 2", i + 1)));
        }
        if !(s.mean_y > 0.0 && s.mean_x > 0.0 && s.mean_z > 0.0) {
            return Err(Error::Config(format!("stratum {}: target means must be positive", i + 1)));
        }
        if !(s.sd_y >= 0.0 && s.sd_x >= 0.0 && s.sd_z >= 0.0) {
            return Err(Error::Config(format!("stratum {}: target SDs must be non-negative", i + 1)));
        }
    }
    Ok(())
}

/// Generates a finite population and its exact realized summary.
pub fn generate_population(cfg: &SyntheticPopulationConfig) -> Result<(Microdata, PopulationSummary)> {
    validate_config(cfg)?;
    let factors = cfg
        .strata
        .iter()
        .enumerate()
        .map(|(i, s)| correlation_factor(s, i + 1))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(POPULATION_STREAM);
    let mut strata = Vec::with_capacity(cfg.strata.len());
    for (i, (s, l)) in cfg.strata.iter().zip(&factors).enumerate() {
        let units = (0..s.size)
            .map(|_| {
                let g: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let c = |row: &[f64; 3]| row[0] * g[0] + row[1] * g[1] + row[2] * g[2];
                Unit {
                    y: s.mean_y + s.sd_y * c(&l[0]),
                    x: s.mean_x + s.sd_x * c(&l[1]),
                    z: s.mean_z + s.sd_z * c(&l[2]),
                }
            })
            .collect();
        strata.push(MicroStratum {
            label: (i + 1).to_string(),
            units,
        });
    }
    let micro = Microdata { strata };
    let summary = summarize(&micro)?;
    for s in &summary.strata {
        for (mean, sd, v) in [
            (s.mean_y, s.sd_y, 'y'),
            (s.mean_x, s.sd_x, 'x'),
            (s.mean_z, s.sd_z, 'z'),
        ] {
            if mean.abs() <= ZERO_MEAN_GUARD * sd {
                return Err(Error::ZeroMean(v));
            }
        }
    }
    Ok((micro, summary))
}

/// Random stream for replication `index`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Draws a stratified simple random sample without replacement.
pub fn draw_sample<R: Rng + ?Sized>(pop: &Microdata, design: &SampleDesign, rng: &mut R) -> Result<StratifiedSample> {
    design.check_sizes(&pop.sizes())?;
    let strata = pop
        .strata
        .iter()
        .zip(&design.n_h)
        .map(|(s, &n)| {
            index::sample(rng, s.units.len(), n)
                .into_iter()
                .map(|i| s.units[i])
                .collect()
        })
        .collect();
    StratifiedSample::new(strata, design.clone())
}

/// Hex SHA-256 prefix over the population values.
pub fn fingerprint(pop: &Microdata) -> String {
    let mut hasher = Sha256::new();
    for s in &pop.strata {
        hasher.update((s.units.len() as u64).to_le_bytes());
        for u in &s.units {
            for v in [u.y, u.x, u.z] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(&hasher.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub replications: usize,
    pub master_seed: u64,
    /// Extra `tp` row at fixed `(m1, m2)`.
    pub fixed_m: Option<(f64, f64)>,
    pub parallel: bool,
}

impl SimulationSettings {
    pub fn new(replications: usize, master_seed: u64) -> Self {
        SimulationSettings {
            replications,
            master_seed,
            fixed_m: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub label: String,
    pub estimator: EstimatorKind,
    pub m: Option<(f64, f64)>,
    pub empirical_mean: f64,
    pub empirical_bias: f64,
    pub empirical_mse: f64,
    pub theoretical_mse: f64,
    /// First-order bias, `tp` rows only.
    pub theoretical_bias: Option<f64>,
    /// `(empirical - theoretical) / theoretical`.
    pub relative_gap: f64,
    pub non_finite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub replications: usize,
    pub master_seed: u64,
    pub generator: String,
    pub population_fingerprint: String,
    pub population_sizes: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub population_mean_y: f64,
    pub optimal_m: (f64, f64),
    pub moments: MomentSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SyntheticPopulationConfig>,
    pub rows: Vec<SimulationRow>,
}

impl SimulationReport {
    pub fn row(&self, label: &str) -> Option<&SimulationRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

struct Target {
    label: String,
    id: EstimatorId,
    theoretical_mse: f64,
    theoretical_bias: Option<f64>,
}

fn targets(m: &MomentSet, fixed: Option<(f64, f64)>) -> Result<(Vec<Target>, (f64, f64))> {
    let mut out = Vec::new();
    for id in EstimatorId::CLASSIC {
        out.push(Target {
            label: id.kind().to_string(),
            id,
            theoretical_mse: mse_classic(id, m)?,
            theoretical_bias: None,
        });
    }
    let opt = optimal_m(m)?;
    let mut tp_row = |label: String, (m1, m2): (f64, f64)| -> Result<()> {
        out.push(Target {
            label,
            id: EstimatorId::tp(m1, m2)?,
            theoretical_mse: mse_tp(m, m1, m2).mse,
            theoretical_bias: Some(bias_tp(m, m1, m2)),
        });
        Ok(())
    };
    tp_row("tp(opt)".into(), opt)?;
    if let Some(fixed) = fixed {
        tp_row(format!("tp({},{})", fixed.0, fixed.1), fixed)?;
    }
    Ok((out, opt))
}

/// Estimates of every target on one sample; NaN where an estimate failed.
fn replicate(
    r: usize,
    pop: &Microdata,
    summary: &PopulationSummary,
    design: &SampleDesign,
    means: &PopulationMeans,
    targets: &[Target],
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = replication_rng(seed, r as u64);
    let sample = draw_sample(pop, design, &mut rng)?;
    let (ybar, xbar, zbar) = stratified_means(&sample, summary)?;
    let coefficients = sample_regression_coeffs(&sample, summary).ok();
    let (b1, b2) = coefficients.unwrap_or((f64::NAN, f64::NAN));
    let stats = SampleStats { ybar, xbar, zbar, b1, b2 };
    Ok(targets
        .iter()
        .map(|t| {
            if t.id.needs_coefficients() && coefficients.is_none() {
                return f64::NAN;
            }
            t.id.evaluate(&stats, means).unwrap_or(f64::NAN)
        })
        .collect())
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Runs the replications and compares empirical with first-order MSEs.
///
/// Serial and parallel runs give bit-identical reports: estimates are
/// collected in replication order and summed serially.
pub fn run_simulation(
    pop: &Microdata,
    summary: &PopulationSummary,
    design: &SampleDesign,
    settings: &SimulationSettings,
) -> Result<SimulationReport> {
    if settings.replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    design.check_sizes(&pop.sizes())?;
    let moments = moment_set(summary, design)?;
    let (targets, optimal) = targets(&moments, settings.fixed_m)?;
    let means = PopulationMeans::of(summary);
    let seed = settings.master_seed;

    let run = |r| replicate(r, pop, summary, design, &means, &targets, seed);
    let estimates: Vec<Vec<f64>> = if settings.parallel {
        (0..settings.replications).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..settings.replications).map(run).collect::<Result<_>>()?
    };

    let limit = (MAX_NON_FINITE_FRACTION * settings.replications as f64).floor() as usize;
    let mut rows = Vec::with_capacity(targets.len());
    for (k, t) in targets.iter().enumerate() {
        let finite = || estimates.iter().map(move |e| e[k]).filter(|v| v.is_finite());
        let count = finite().count();
        let non_finite = settings.replications - count;
        if non_finite > limit {
            return Err(Error::TooManyNonFinite {
                failed: non_finite,
                total: settings.replications,
            });
        }
        let n = count as f64;
        let mean = compensated_sum(finite()) / n;
        let mse = compensated_sum(finite().map(|v| (v - means.y) * (v - means.y))) / n;
        rows.push(SimulationRow {
            label: t.label.clone(),
            estimator: t.id.kind(),
            m: match t.id {
                EstimatorId::Tp { m1, m2 } => Some((m1, m2)),
                _ => None,
            },
            empirical_mean: mean,
            empirical_bias: mean - means.y,
            empirical_mse: mse,
            theoretical_mse: t.theoretical_mse,
            theoretical_bias: t.theoretical_bias,
            relative_gap: (mse - t.theoretical_mse) / t.theoretical_mse,
            non_finite,
        });
    }

    Ok(SimulationReport {
        replications: settings.replications,
        master_seed: seed,
        generator: GENERATOR.to_string(),
        population_fingerprint: fingerprint(pop),
        population_sizes: pop.sizes(),
        sample_sizes: design.n_h.clone(),
        population_mean_y: means.y,
        optimal_m: optimal,
        moments,
        config: None,
        rows,
    })
}
