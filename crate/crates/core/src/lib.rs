//! Population-mean estimation in stratified random sampling with two
//! auxiliary variables.
//!
//! The crate covers the stratified mean, seven ratio / exponential /
//! regression estimators (`t1`..`t7`) and the exponential-cum-regression
//! estimator `tp` with tuning exponents `(m1, m2)`:
//!
//! * [`data`], [`reconcile`], [`kk2009`]: inputs, reconciliation of
//!   redundant covariance information, and the embedded school dataset;
//! * [`moments`]: design factors and relative second moments;
//! * [`estimators`]: point estimates from a drawn sample;
//! * [`theory`]: first-order MSE, bias and the optimal `(m1, m2)`;
//! * [`efficiency`]: percent relative efficiency tables;
//! * [`montecarlo`]: synthetic populations and repeated SRSWOR sampling;
//! * [`cli`] and [`render`]: the `stratmean` command line.

pub mod cli;
pub mod data;
pub mod efficiency;
pub mod error;
pub mod estimators;
pub mod kk2009;
pub mod moments;
pub mod montecarlo;
pub mod reconcile;
pub mod render;
pub mod theory;

pub use data::{parse_microdata, summarize, Microdata, Pair, PopulationSummary, SampleDesign, StratumSummary, SummaryDocument, Unit};
pub use efficiency::{dominance_report, pre_table, reproduce_kk2009, PreReport};
pub use error::{Error, ErrorKind, Result};
pub use estimators::{point_estimate, EstimatorId, EstimatorKind, StratifiedSample};
pub use kk2009::embedded_kk2009;
pub use moments::{design_factors, moment_set, MomentSet};
pub use montecarlo::{draw_sample, generate_population, run_simulation, SimulationReport, SimulationSettings, SyntheticPopulationConfig};
pub use reconcile::{reconcile_covariances, CovariancePolicy, ReconciliationReport};
pub use theory::{bias_tp, min_mse_tp, mse_classic, mse_tp, optimal_m, variance_mean, MseBreakdown};
