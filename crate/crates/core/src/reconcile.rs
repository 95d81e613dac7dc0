//! Reconciliation of redundant covariance / correlation inputs.
//!
//! Summaries may carry both `S_abh` and `rho_abh` for a pair, or only one of
//! them. After reconciliation every pair has a covariance, and every pair
//! whose correlation is admissible also has a correlation; every change is
//! logged in the [`ReconciliationReport`].

use serde::{Deserialize, Serialize};

use crate::data::{Pair, PopulationSummary, StratumSummary};
use crate::error::{Error, Result};

/// Largest covariance/correlation disagreement, in correlation units
/// `|S_ab - rho_ab*S_a*S_b| / (S_a*S_b)`, treated as rounding.
pub const RECONCILE_TOLERANCE: f64 = 0.01;

/// Disagreements at or below this are exact agreement.
const EXACT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CovariancePolicy {
    /// Correlations win; covariances are rebuilt as `rho*S_a*S_b`.
    #[default]
    PreferCorrelation,
    /// Covariances win; correlations are rebuilt as `S_ab/(S_a*S_b)`.
    PreferCovariance,
    /// Any disagreement beyond tolerance is an error.
    Strict,
}

impl CovariancePolicy {
    pub fn name(self) -> &'static str {
        match self {
            CovariancePolicy::PreferCorrelation => "prefer-correlation",
            CovariancePolicy::PreferCovariance => "prefer-covariance",
            CovariancePolicy::Strict => "strict",
        }
    }
}

impl std::fmt::Display for CovariancePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    /// Disagreement within tolerance; value aligned to the preferred side.
    Adjusted,
    /// Disagreement beyond tolerance; value replaced by the preferred side.
    Repaired,
    /// Missing value filled in from its counterpart.
    Derived,
    /// Counterpart implies an impossible correlation; replaced by the centre
    /// of the interval admitted by the other two correlations.
    Imputed,
    /// Disagreement or impossible correlation kept as-is under prefer-covariance.
    Flagged,
}

impl Action {
    pub fn is_repair(self) -> bool {
        matches!(self, Action::Repaired | Action::Imputed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationEntry {
    pub stratum: usize,
    pub pair: Pair,
    pub field: String,
    pub action: Action,
    pub old: Option<f64>,
    pub new: Option<f64>,
    /// Disagreement in correlation units, when both sides were available.
    pub discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub policy: CovariancePolicy,
    pub tolerance: f64,
    pub entries: Vec<ReconciliationEntry>,
}

impl ReconciliationReport {
    pub fn repairs(&self) -> impl Iterator<Item = &ReconciliationEntry> {
        self.entries.iter().filter(|e| e.action.is_repair())
    }

    pub fn flagged(&self) -> impl Iterator<Item = &ReconciliationEntry> {
        self.entries.iter().filter(|e| e.action == Action::Flagged)
    }

    pub fn find(&self, stratum: usize, pair: Pair) -> Option<&ReconciliationEntry> {
        self.entries
            .iter()
            .find(|e| e.stratum == stratum && e.pair == pair)
    }
}

/// Interval of `rho` values keeping a 3x3 correlation matrix PSD, given the
/// other two correlations.
pub fn admissible_interval(r1: f64, r2: f64) -> (f64, f64) {
    let centre = r1 * r2;
    let half = ((1.0 - r1 * r1) * (1.0 - r2 * r2)).max(0.0).sqrt();
    (centre - half, centre + half)
}

fn determinant(yx: f64, yz: f64, xz: f64) -> f64 {
    1.0 - yx * yx - yz * yz - xz * xz + 2.0 * yx * yz * xz
}

pub fn reconcile_covariances(
    summary: &PopulationSummary,
    policy: CovariancePolicy,
) -> Result<(PopulationSummary, ReconciliationReport)> {
    summary.validate()?;
    let mut out = summary.clone();
    let mut entries = Vec::new();
    for stratum in &mut out.strata {
        reconcile_stratum(stratum, policy, &mut entries)?;
    }
    Ok((
        out,
        ReconciliationReport {
            policy,
            tolerance: RECONCILE_TOLERANCE,
            entries,
        },
    ))
}

fn reconcile_stratum(
    s: &mut StratumSummary,
    policy: CovariancePolicy,
    log: &mut Vec<ReconciliationEntry>,
) -> Result<()> {
    let h = s.h;
    let mut supplied = [false; 3];
    let mut covariance_only = Vec::new();

    for (i, pair) in Pair::ALL.into_iter().enumerate() {
        let scale = s.sd_product(pair);
        match (s.covariance(pair), s.correlation(pair)) {
            (None, None) => {
                return Err(Error::MissingField {
                    stratum: h,
                    field: pair.covariance_field(),
                })
            }
            (_, _) if scale == 0.0 => {
                // a zero SD leaves the correlation undefined and forces a zero covariance
                if s.covariance(pair) != Some(0.0) {
                    log.push(entry(h, pair, pair.covariance_field(), Action::Derived, s.covariance(pair), Some(0.0), None));
                    s.set_covariance(pair, 0.0);
                }
                supplied[i] = s.correlation(pair).is_some();
            }
            (None, Some(rho)) => {
                supplied[i] = true;
                let cov = rho * scale;
                s.set_covariance(pair, cov);
                log.push(entry(h, pair, pair.covariance_field(), Action::Derived, None, Some(cov), None));
            }
            (Some(cov), Some(rho)) => {
                supplied[i] = true;
                let implied = rho * scale;
                let discrepancy = (cov - implied).abs() / scale;
                if discrepancy <= EXACT {
                    continue;
                }
                let within = discrepancy <= RECONCILE_TOLERANCE;
                match policy {
                    CovariancePolicy::Strict if !within => {
                        return Err(Error::InconsistentCovariance {
                            stratum: h,
                            field: pair.covariance_field(),
                            covariance: cov,
                            implied,
                            discrepancy,
                        })
                    }
                    CovariancePolicy::PreferCorrelation | CovariancePolicy::Strict => {
                        s.set_covariance(pair, implied);
                        let action = if within { Action::Adjusted } else { Action::Repaired };
                        log.push(entry(h, pair, pair.covariance_field(), action, Some(cov), Some(implied), Some(discrepancy)));
                    }
                    CovariancePolicy::PreferCovariance => {
                        let derived = cov / scale;
                        let action = if within { Action::Adjusted } else { Action::Flagged };
                        if (-1.0..=1.0).contains(&derived) {
                            s.set_correlation(pair, derived);
                            log.push(entry(h, pair, pair.correlation_field(), action, Some(rho), Some(derived), Some(discrepancy)));
                        } else {
                            clear_correlation(s, pair);
                            log.push(entry(h, pair, pair.correlation_field(), Action::Flagged, Some(rho), None, Some(discrepancy)));
                        }
                    }
                }
            }
            (Some(_), None) => covariance_only.push(pair),
        }
    }

    for &pair in &covariance_only {
        let cov = s.covariance(pair).expect("covariance present");
        let scale = s.sd_product(pair);
        let derived = cov / scale;
        let (a, b) = pair.others();
        let others_supplied = Pair::ALL
            .iter()
            .zip(supplied)
            .filter(|(p, _)| **p == a || **p == b)
            .all(|(_, sup)| sup);
        let interval = match (s.correlation(a), s.correlation(b)) {
            (Some(ra), Some(rb)) if covariance_only.len() == 1 => Some(admissible_interval(ra, rb)),
            _ => None,
        };
        let feasible = match interval {
            Some((lo, hi)) => derived >= lo - EXACT && derived <= hi + EXACT,
            None => (-1.0..=1.0).contains(&derived),
        };
        if feasible {
            s.set_correlation(pair, derived);
            log.push(entry(h, pair, pair.correlation_field(), Action::Derived, None, Some(derived), None));
            continue;
        }
        match policy {
            CovariancePolicy::PreferCorrelation if others_supplied && interval.is_some() => {
                let (lo, hi) = interval.unwrap();
                let centre = 0.5 * (lo + hi);
                let repaired = centre * scale;
                s.set_correlation(pair, centre);
                s.set_covariance(pair, repaired);
                log.push(entry(h, pair, pair.covariance_field(), Action::Imputed, Some(cov), Some(repaired), None));
            }
            CovariancePolicy::PreferCovariance => {
                if (-1.0..=1.0).contains(&derived) {
                    s.set_correlation(pair, derived);
                    log.push(entry(h, pair, pair.correlation_field(), Action::Flagged, None, Some(derived), None));
                } else {
                    log.push(entry(h, pair, pair.correlation_field(), Action::Flagged, None, None, None));
                }
            }
            _ => {
                return Err(match interval {
                    Some((lo, hi)) => Error::InadmissibleCorrelation {
                        stratum: h,
                        field: pair.covariance_field(),
                        correlation: derived,
                        lo,
                        hi,
                    },
                    None => not_psd(s, pair, derived),
                })
            }
        }
    }

    if let (Some(yx), Some(yz), Some(xz)) = (s.rho_yx, s.rho_yz, s.rho_xz) {
        if determinant(yx, yz, xz) < -EXACT {
            if policy == CovariancePolicy::PreferCovariance {
                log.push(entry(h, Pair::Xz, "correlation matrix", Action::Flagged, None, None, None));
            } else {
                return Err(Error::NotPositiveSemiDefinite { stratum: h, yx, yz, xz });
            }
        }
    }
    Ok(())
}

fn clear_correlation(s: &mut StratumSummary, pair: Pair) {
    match pair {
        Pair::Yx => s.rho_yx = None,
        Pair::Yz => s.rho_yz = None,
        Pair::Xz => s.rho_xz = None,
    }
}

fn not_psd(s: &StratumSummary, pair: Pair, derived: f64) -> Error {
    let get = |p: Pair| if p == pair { derived } else { s.correlation(p).unwrap_or(f64::NAN) };
    Error::NotPositiveSemiDefinite {
        stratum: s.h,
        yx: get(Pair::Yx),
        yz: get(Pair::Yz),
        xz: get(Pair::Xz),
    }
}

fn entry(
    stratum: usize,
    pair: Pair,
    field: &str,
    action: Action,
    old: Option<f64>,
    new: Option<f64>,
    discrepancy: Option<f64>,
) -> ReconciliationEntry {
    ReconciliationEntry {
        stratum,
        pair,
        field: field.to_string(),
        action,
        old,
        new,
        discrepancy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kk2009;

    fn table() -> PopulationSummary {
        kk2009::embedded_kk2009().0
    }

    #[test]
    fn stratum_one_yx_is_consistent() {
        // multiplication oracle: 0.936 * 883.835 * 30486.751
        let implied: f64 = 0.936 * 883.835 * 30486.751;
        assert!((implied - 2.522e7).abs() / 2.522e7 < 1e-3);
        assert!((25237153.52 - implied).abs() / implied < 1e-3);

        let (_, report) = reconcile_covariances(&table(), CovariancePolicy::PreferCorrelation).unwrap();
        let e = report.find(1, Pair::Yx).unwrap();
        assert_eq!(e.action, Action::Adjusted);
        assert!(!report.repairs().any(|r| r.stratum == 1));
    }

    #[test]
    fn stratum_four_yx_is_repaired() {
        let (out, report) = reconcile_covariances(&table(), CovariancePolicy::PreferCorrelation).unwrap();
        let e = report.find(4, Pair::Yx).unwrap();
        assert_eq!(e.action, Action::Repaired);
        assert_eq!(e.old, Some(1452885.53));
        let new = e.new.unwrap();
        assert!((new - 1.452e7).abs() / 1.452e7 < 1e-3, "{new}");
        assert_eq!(out.strata[3].cov_yx, Some(new));
    }

    #[test]
    fn stratum_three_xz_is_imputed() {
        let (out, report) = reconcile_covariances(&table(), CovariancePolicy::PreferCorrelation).unwrap();
        let e = report.find(3, Pair::Xz).unwrap();
        assert_eq!(e.action, Action::Imputed);
        assert_eq!(e.old, Some(16490067456.0));
        let s = &out.strata[2];
        let rho = s.rho_xz.unwrap();
        assert!((rho - 0.994 * 0.983).abs() < 1e-12);
        let new = e.new.unwrap();
        assert!(new > 1.6e7 && new < 1.7e7, "{new}");
    }

    #[test]
    fn table_repairs_are_all_logged() {
        let (_, report) = reconcile_covariances(&table(), CovariancePolicy::PreferCorrelation).unwrap();
        let mut repaired: Vec<(usize, Pair)> = report.repairs().map(|e| (e.stratum, e.pair)).collect();
        repaired.sort_by_key(|(h, p)| (*h, *p as u8));
        assert_eq!(
            repaired,
            vec![(3, Pair::Xz), (4, Pair::Yx), (4, Pair::Yz), (5, Pair::Yx), (5, Pair::Xz)]
        );
    }

    #[test]
    fn strict_names_stratum_and_pair() {
        let err = reconcile_covariances(&table(), CovariancePolicy::Strict).unwrap_err();
        match err {
            Error::InadmissibleCorrelation { stratum, field, .. } => {
                assert_eq!(stratum, 3);
                assert_eq!(field, "S_xzh");
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut pop = table();
        pop.strata[2].rho_xz = Some(0.977);
        pop.strata[2].cov_xz = None;
        let err = reconcile_covariances(&pop, CovariancePolicy::Strict).unwrap_err();
        match err {
            Error::InconsistentCovariance { stratum, field, .. } => {
                assert_eq!(stratum, 4);
                assert_eq!(field, "S_yxh");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prefer_covariance_flags_but_succeeds() {
        let (out, report) = reconcile_covariances(&table(), CovariancePolicy::PreferCovariance).unwrap();
        assert_eq!(out.strata[3].cov_yx, Some(1452885.53));
        assert_eq!(out.strata[2].cov_xz, Some(16490067456.0));
        assert!(out.strata[2].rho_xz.is_none());
        assert!(report.flagged().count() >= 3);
    }

    #[test]
    fn idempotent_on_table() {
        for policy in [CovariancePolicy::PreferCorrelation, CovariancePolicy::PreferCovariance] {
            let (once, _) = reconcile_covariances(&table(), policy).unwrap();
            let (twice, _) = reconcile_covariances(&once, policy).unwrap();
            assert_eq!(once, twice, "{policy}");
        }
    }

    #[test]
    fn missing_both_sides_is_an_error() {
        let mut pop = table();
        pop.strata[0].cov_yz = None;
        pop.strata[0].rho_yz = None;
        let err = reconcile_covariances(&pop, CovariancePolicy::PreferCorrelation).unwrap_err();
        assert!(matches!(err, Error::MissingField { stratum: 1, .. }));
    }

    #[test]
    fn supplied_non_psd_correlations_rejected() {
        let mut pop = table();
        pop.strata[0].rho_xz = Some(-0.9);
        pop.strata[0].cov_xz = None;
        let err = reconcile_covariances(&pop, CovariancePolicy::PreferCorrelation).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemiDefinite { stratum: 1, .. }));
    }

    #[test]
    fn interval_contains_centre() {
        let (lo, hi) = admissible_interval(0.9, 0.8);
        assert!(lo < 0.72 && 0.72 < hi);
        assert!(determinant(0.9, 0.8, lo) >= -1e-12);
        assert!(determinant(0.9, 0.8, hi) >= -1e-12);
        assert!(determinant(0.9, 0.8, lo - 0.01) < 0.0);
    }
}
