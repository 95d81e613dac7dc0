//! First-order MSE theory for the stratified estimators.
//!
//! The proposed estimator is handled through its linearised error
//! `Ybar * [e0 - a1 e1 - a2 e2]` with `a1 = m1/2 + B1*Xbar/Ybar` and
//! `a2 = m2/2 + B2*Zbar/Ybar`. Its MSE is then an exact quadratic in
//! `(m1, m2)` with a unique minimiser whenever the auxiliary moment matrix
//! is non-singular.

use serde::{Deserialize, Serialize};

use crate::estimators::{EstimatorId, EstimatorKind};
use crate::error::{Error, Result};
use crate::moments::MomentSet;

/// Relative tolerance on `V020*V002 - V011^2` below which the optimum is
/// not computed.
pub const SINGULARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpTerms {
    pub m1: f64,
    pub m2: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub bias: f64,
}

/// MSE of one estimator, with the decomposition terms for `tp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBreakdown {
    pub estimator: EstimatorKind,
    pub mse: f64,
    pub tp: Option<TpTerms>,
}

impl MseBreakdown {
    /// A negative first-order MSE means the approximation has broken down.
    pub fn is_negative(&self) -> bool {
        self.mse < 0.0
    }
}

/// Exact variance of the stratified mean, `Ybar^2 V200`.
pub fn variance_mean(m: &MomentSet) -> f64 {
    m.mean_y * m.mean_y * m.v200
}

/// First-order MSE of the fixed-form estimators.
///
/// `t7` uses the stratum-wise regression formula
/// `sum W_h^2 f_h S_yh^2 (1 - rho_yx^2 - rho_yz^2 + 2 rho_yx rho_yz rho_xz)`.
pub fn mse_classic(id: EstimatorId, m: &MomentSet) -> Result<f64> {
    let y2 = m.mean_y * m.mean_y;
    let exp_form = |sx: f64, sz: f64| {
        y2 * (m.v200 + m.v020 / 4.0 + m.v002 / 4.0 - sx * m.v110 - sz * m.v101 + sx * sz * m.v011 / 2.0)
    };
    Ok(match id {
        EstimatorId::Mean => variance_mean(m),
        EstimatorId::T1 => y2 * (m.v200 + m.v020 - 2.0 * m.v110),
        EstimatorId::T2 => y2 * (m.v200 + m.v020 / 4.0 - m.v110),
        EstimatorId::T3 => exp_form(1.0, 1.0),
        EstimatorId::T4 => exp_form(-1.0, -1.0),
        EstimatorId::T5 => exp_form(1.0, -1.0),
        EstimatorId::T6 => exp_form(-1.0, 1.0),
        EstimatorId::T7 => m.regression_residual,
        EstimatorId::Tp { .. } => {
            return Err(Error::Config("mse_classic does not cover tp; use mse_tp".into()))
        }
    })
}

/// MSE of the combined regression estimator with the population
/// coefficients, `Var(ybar_st - B1 xbar_st - B2 zbar_st)`. Equal to
/// [`mse_tp`] at `m1 = m2 = 0`.
pub fn mse_regression_combined(m: &MomentSet) -> f64 {
    mse_tp(m, 0.0, 0.0).mse
}

fn quadratic(m: &MomentSet, a1: f64, a2: f64) -> f64 {
    m.mean_y
        * m.mean_y
        * (m.v200 + a1 * a1 * m.v020 + a2 * a2 * m.v002 + 2.0 * a1 * a2 * m.v011
            - 2.0 * a1 * m.v110
            - 2.0 * a2 * m.v101)
}

/// MSE of `tp` at `(m1, m2)` to first order.
///
/// `p1` matches the printed `P1`; `p2` and `p3` carry the `Xbar`, `Zbar`
/// scale factors so that `mse = Ybar^2 (V200 + p1) + p2 - Ybar p3` holds in
/// squared units of `y`.
pub fn mse_tp(m: &MomentSet, m1: f64, m2: f64) -> MseBreakdown {
    let (d1, d2) = m.relative_coefficients();
    let mse = quadratic(m, m1 / 2.0 + d1, m2 / 2.0 + d2);
    let y = m.mean_y;
    let (c1, c2) = (d1 * y, d2 * y); // B1*Xbar, B2*Zbar
    let p1 = m1 * m1 * m.v020 / 4.0 + m2 * m2 * m.v002 / 4.0 + m1 * m2 * m.v011 / 2.0
        - m1 * m.v110
        - m2 * m.v101;
    let p2 = c1 * c1 * m.v020 + c2 * c2 * m.v002 + 2.0 * c1 * c2 * m.v011;
    let p3 = 2.0 * c1 * m.v110 + 2.0 * c2 * m.v101
        - m1 * c1 * m.v020
        - m1 * c2 * m.v011
        - m2 * c1 * m.v011
        - m2 * c2 * m.v002;
    MseBreakdown {
        estimator: EstimatorKind::Tp,
        mse,
        tp: Some(TpTerms {
            m1,
            m2,
            p1,
            p2,
            p3,
            bias: bias_tp(m, m1, m2),
        }),
    }
}

/// Bias of `tp` from the printed second-order expansion of its exponential
/// factors, cross-term coefficient `-m1 m2 / 4` included as printed.
pub fn bias_tp(m: &MomentSet, m1: f64, m2: f64) -> f64 {
    m.mean_y
        * (m1 * m1 / 4.0 * m.v020 + m2 * m2 / 4.0 * m.v002
            - m1 * m2 / 4.0 * m.v011
            - m1 / 2.0 * m.v110
            - m2 / 2.0 * m.v101)
}

/// Bias of the exponential part of `tp` from a direct second-order Taylor
/// expansion of `exp(-m e/(2+e))`, for comparison with [`bias_tp`].
pub fn bias_tp_expansion(m: &MomentSet, m1: f64, m2: f64) -> f64 {
    let c1 = m1 / 4.0 + m1 * m1 / 8.0;
    let c2 = m2 / 4.0 + m2 * m2 / 8.0;
    m.mean_y
        * (c1 * m.v020 + c2 * m.v002 + m1 * m2 / 4.0 * m.v011 - m1 / 2.0 * m.v110 - m2 / 2.0 * m.v101)
}

/// Stationary point of [`mse_tp`] in `(m1, m2)`.
///
/// Solves `a1 V020 + a2 V011 = V110`, `a1 V011 + a2 V002 = V101`, then maps
/// back with `m_i = 2 (a_i - D_i)`.
pub fn optimal_m(m: &MomentSet) -> Result<(f64, f64)> {
    let (a1, a2) = optimal_a(m)?;
    let (d1, d2) = m.relative_coefficients();
    Ok((2.0 * (a1 - d1), 2.0 * (a2 - d2)))
}

fn optimal_a(m: &MomentSet) -> Result<(f64, f64)> {
    let scale = m.v020 * m.v002;
    let det = scale - m.v011 * m.v011;
    // det < 0 (inconsistent inputs) still has a stationary point: a saddle
    if scale.is_nan() || det.is_nan() || scale <= 0.0 || det.abs() <= SINGULARITY_TOLERANCE * scale {
        return Err(Error::Singular {
            determinant: det,
            condition: condition_number(m.v020, m.v011, m.v002),
        });
    }
    let a1 = (m.v110 * m.v002 - m.v101 * m.v011) / det;
    let a2 = (m.v101 * m.v020 - m.v110 * m.v011) / det;
    Ok((a1, a2))
}

/// 2-norm condition number of the symmetric matrix `[[a, b], [b, c]]`.
fn condition_number(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (hi, lo) = ((mean + radius).abs(), (mean - radius).abs());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi.max(lo) / hi.min(lo)
    }
}

/// Whether the stationary point of [`mse_tp`] is a minimum.
pub fn is_minimum(m: &MomentSet) -> bool {
    m.v020 > 0.0 && m.v020 * m.v002 - m.v011 * m.v011 > 0.0
}

/// `tp` at its optimal `(m1, m2)`.
pub fn min_mse_tp(m: &MomentSet) -> Result<MseBreakdown> {
    let (m1, m2) = optimal_m(m)?;
    Ok(mse_tp(m, m1, m2))
}

/// Side-by-side values of the implemented formulas and the formulas as
/// printed for `P2`, `P3`, the `tp` MSE, the optimum and the `t7` MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub m1: f64,
    pub m2: f64,
    pub p2_implemented: f64,
    pub p2_printed: f64,
    pub p3_implemented: f64,
    pub p3_printed: f64,
    pub mse_tp_implemented: f64,
    pub mse_tp_printed: f64,
    pub optimum_solved: Option<(f64, f64)>,
    pub optimum_printed: Option<(f64, f64)>,
    /// MSE of the implemented `tp` at the printed optimum.
    pub mse_at_printed_optimum: Option<f64>,
    pub bias_printed: f64,
    pub bias_expansion: f64,
    pub t7_stratumwise: f64,
    pub t7_combined: f64,
}

/// The printed optimum, evaluated verbatim.
pub fn printed_optimum(m: &MomentSet) -> Option<(f64, f64)> {
    let (b1, b2) = (m.b1?, m.b2?);
    let det = m.v020 * m.v002 - m.v011 * m.v011;
    let den = m.mean_y * det;
    if den == 0.0 {
        return None;
    }
    let n1 = b1 * m.v011 * m.v002 + b2 * m.v011 * m.v011 - b1 * m.v020 * m.v002 - b2 * m.v011 * m.v002;
    let n2 = b1 * m.v011 * m.v020 + b2 * m.v011 * m.v011 - b1 * m.v011 * m.v020 - b2 * m.v002 * m.v020;
    Some((4.0 * n1 / den, 4.0 * n2 / den))
}

pub fn diagnostics(m: &MomentSet, m1: f64, m2: f64) -> Diagnostics {
    let implemented = mse_tp(m, m1, m2);
    let terms = implemented.tp.expect("tp terms");
    let (b1, b2) = (m.b1.unwrap_or(0.0), m.b2.unwrap_or(0.0));
    let p2_printed = b1 * b1 * m.v020 + b2 * b2 * m.v002 + 2.0 * b1 * b2 * m.v011;
    let p3_printed = -2.0 * b1 * m.v110 - 2.0 * b2 * m.v101
        + m1 * b1 * m.v020
        + m1 * b2 * m.v011
        + m2 * b1 * m.v011
        + m2 * b2 * m.v002;
    let y = m.mean_y;
    let optimum_printed = printed_optimum(m);
    Diagnostics {
        m1,
        m2,
        p2_implemented: terms.p2,
        p2_printed,
        p3_implemented: terms.p3,
        p3_printed,
        mse_tp_implemented: implemented.mse,
        mse_tp_printed: y * y * (m.v200 + terms.p1) + p2_printed - y * p3_printed,
        optimum_solved: optimal_m(m).ok(),
        optimum_printed,
        mse_at_printed_optimum: optimum_printed.map(|(a, b)| mse_tp(m, a, b).mse),
        bias_printed: terms.bias,
        bias_expansion: bias_tp_expansion(m, m1, m2),
        t7_stratumwise: m.regression_residual,
        t7_combined: mse_regression_combined(m),
    }
}
