//! Percent relative efficiencies and dominance of `tp` over the other estimators.

use serde::{Deserialize, Serialize};

use crate::data::PopulationSummary;
use crate::estimators::{EstimatorId, EstimatorKind};
use crate::error::Result;
use crate::kk2009;
use crate::moments::{moment_set, MomentSet};
use crate::reconcile::{reconcile_covariances, CovariancePolicy, ReconciliationReport};
use crate::theory::{is_minimum, min_mse_tp, mse_classic, variance_mean};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreRow {
    pub estimator: EstimatorKind,
    pub mse: f64,
    /// `100 * V(ybar_st) / MSE`; `None` when the MSE is zero.
    pub pre: Option<f64>,
    /// 1 = smallest MSE.
    pub rank: usize,
    /// `MSE - minMSE(tp)`.
    pub delta_vs_tp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreReport {
    pub rows: Vec<PreRow>,
    /// Optimal `(m1, m2)` used for the `tp` row.
    pub tp_m: (f64, f64),
    pub policy: Option<CovariancePolicy>,
    pub warnings: Vec<String>,
}

impl PreReport {
    pub fn row(&self, kind: EstimatorKind) -> &PreRow {
        self.rows
            .iter()
            .find(|r| r.estimator == kind)
            .expect("every estimator has a row")
    }

    /// Estimators from best to worst.
    pub fn ranking(&self) -> Vec<EstimatorKind> {
        let mut rows: Vec<&PreRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.rank);
        rows.into_iter().map(|r| r.estimator).collect()
    }

    pub fn with_policy(mut self, policy: CovariancePolicy) -> Self {
        self.policy = Some(policy);
        self
    }
}

type Mses = Vec<(EstimatorKind, f64)>;

fn all_mses(m: &MomentSet) -> Result<(Mses, (f64, f64))> {
    let mut out = Vec::with_capacity(9);
    for id in EstimatorId::CLASSIC {
        out.push((id.kind(), mse_classic(id, m)?));
    }
    // a census leaves nothing to estimate and no optimum to solve for
    let best = if m.is_census() {
        crate::theory::mse_tp(m, 0.0, 0.0)
    } else {
        min_mse_tp(m)?
    };
    let terms = best.tp.expect("tp terms");
    out.push((EstimatorKind::Tp, best.mse));
    Ok((out, (terms.m1, terms.m2)))
}

/// PRE of every estimator against the stratified mean, `tp` at its optimum.
pub fn pre_table(m: &MomentSet) -> Result<PreReport> {
    let (mses, tp_m) = all_mses(m)?;
    let base = variance_mean(m);
    let tp_mse = mses.last().expect("tp row").1;

    let mut order: Vec<usize> = (0..mses.len()).collect();
    // stable sort keeps enumeration order on ties
    order.sort_by(|&a, &b| mses[a].1.total_cmp(&mses[b].1));
    let mut ranks = vec![0; mses.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank + 1;
    }

    let rows = mses
        .iter()
        .zip(ranks)
        .map(|(&(estimator, mse), rank)| PreRow {
            estimator,
            mse,
            pre: if mse == 0.0 {
                None
            } else if estimator == EstimatorKind::Mean {
                Some(100.0)
            } else {
                Some(100.0 * (base / mse))
            },
            rank,
            delta_vs_tp: mse - tp_mse,
        })
        .collect::<Vec<PreRow>>();

    let mut warnings = Vec::new();
    if !m.is_census() && !is_minimum(m) {
        warnings.push(
            "auxiliary moment matrix is indefinite: the tp row is a saddle point, not a minimum".to_string(),
        );
    }
    for row in rows.iter().filter(|r| r.mse < 0.0) {
        warnings.push(format!(
            "{}: negative first-order MSE ({:.5e}); the approximation is invalid here",
            row.estimator, row.mse
        ));
    }
    Ok(PreReport {
        rows,
        tp_m,
        policy: None,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceEntry {
    pub estimator: EstimatorKind,
    /// `MSE(estimator) - minMSE(tp)`.
    pub difference: f64,
    pub satisfied: bool,
}

/// `MSE(t_i) - minMSE(tp)` for the stratified mean and `t1..t7`.
///
/// Differences are computed from the MSE formulas themselves. A negative
/// entry is reported as unsatisfied.
pub fn dominance_report(m: &MomentSet) -> Result<Vec<DominanceEntry>> {
    let (mses, _) = all_mses(m)?;
    let tp = mses.last().expect("tp row").1;
    Ok(mses[..mses.len() - 1]
        .iter()
        .map(|&(estimator, mse)| DominanceEntry {
            estimator,
            difference: mse - tp,
            satisfied: mse - tp >= 0.0,
        })
        .collect())
}

/// Ranking of the published efficiency table, best first.
pub const PUBLISHED_RANKING: [EstimatorKind; 9] = [
    EstimatorKind::Tp,
    EstimatorKind::T7,
    EstimatorKind::T3,
    EstimatorKind::T1,
    EstimatorKind::T2,
    EstimatorKind::T5,
    EstimatorKind::Mean,
    EstimatorKind::T6,
    EstimatorKind::T4,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyColumn {
    pub policy: CovariancePolicy,
    pub moments: MomentSet,
    pub report: PreReport,
    pub reconciliation: ReconciliationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionRow {
    pub estimator: EstimatorKind,
    pub published_pre: f64,
    pub published_rank: usize,
    /// One per column, in column order.
    pub computed_pre: Vec<Option<f64>>,
    pub computed_rank: Vec<usize>,
}

impl ReproductionRow {
    pub fn delta(&self, column: usize) -> Option<f64> {
        self.computed_pre[column].map(|p| p - self.published_pre)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub columns: Vec<PolicyColumn>,
    pub rows: Vec<ReproductionRow>,
}

impl Reproduction {
    /// Computed ranking of a column, best first.
    pub fn ranking(&self, column: usize) -> Vec<EstimatorKind> {
        self.columns[column].report.ranking()
    }

    /// Estimators whose computed rank differs from the published one.
    pub fn rank_mismatches(&self, column: usize) -> Vec<EstimatorKind> {
        self.rows
            .iter()
            .filter(|r| r.computed_rank[column] != r.published_rank)
            .map(|r| r.estimator)
            .collect()
    }

    /// `tp` first and `t4` last, as in the published table.
    pub fn extremes_match(&self, column: usize) -> bool {
        let ranking = self.ranking(column);
        ranking.first() == Some(&EstimatorKind::Tp) && ranking.last() == Some(&EstimatorKind::T4)
    }
}

/// Reproduces the published efficiency table from a summary under each of
/// the given policies. The first policy is the headline column.
pub fn reproduce(
    pop: &PopulationSummary,
    design: &crate::data::SampleDesign,
    policies: &[CovariancePolicy],
) -> Result<Reproduction> {
    let mut columns = Vec::with_capacity(policies.len());
    for &policy in policies {
        let (reconciled, reconciliation) = reconcile_covariances(pop, policy)?;
        let moments = moment_set(&reconciled, design)?;
        let report = pre_table(&moments)?.with_policy(policy);
        columns.push(PolicyColumn {
            policy,
            moments,
            report,
            reconciliation,
        });
    }
    let rows = EstimatorKind::ALL
        .iter()
        .zip(kk2009::PUBLISHED_PRE)
        .map(|(&estimator, published_pre)| ReproductionRow {
            estimator,
            published_pre,
            published_rank: PUBLISHED_RANKING
                .iter()
                .position(|k| *k == estimator)
                .expect("ranked")
                + 1,
            computed_pre: columns.iter().map(|c| c.report.row(estimator).pre).collect(),
            computed_rank: columns.iter().map(|c| c.report.row(estimator).rank).collect(),
        })
        .collect();
    Ok(Reproduction { columns, rows })
}

/// The embedded dataset under prefer-correlation (headline) and prefer-covariance.
pub fn reproduce_kk2009() -> Result<Reproduction> {
    let (pop, design) = kk2009::embedded_kk2009();
    reproduce(
        &pop,
        &design,
        &[CovariancePolicy::PreferCorrelation, CovariancePolicy::PreferCovariance],
    )
}
