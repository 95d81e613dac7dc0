//! C ABI for `stratmean`.
//!
//! Every fallible function returns a [`StratmeanStatus`]; on failure the
//! message is available from [`stratmean_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned by the library are freed with [`stratmean_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stratmean::efficiency::pre_table;
use stratmean::montecarlo::{generate_population, run_simulation, SimulationReport, SimulationSettings, SyntheticPopulationConfig};
use stratmean::{
    embedded_kk2009, mse_classic, mse_tp, optimal_m, reconcile_covariances, CovariancePolicy, Error, ErrorKind,
    EstimatorId, EstimatorKind, MomentSet, SampleDesign, SummaryDocument,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratmeanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Input = 3,
    Numerical = 4,
    Validation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratmeanPolicy {
    PreferCorrelation = 0,
    PreferCovariance = 1,
    Strict = 2,
}

impl From<StratmeanPolicy> for CovariancePolicy {
    fn from(p: StratmeanPolicy) -> Self {
        match p {
            StratmeanPolicy::PreferCorrelation => CovariancePolicy::PreferCorrelation,
            StratmeanPolicy::PreferCovariance => CovariancePolicy::PreferCovariance,
            StratmeanPolicy::Strict => CovariancePolicy::Strict,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratmeanEstimator {
    Mean = 0,
    T1 = 1,
    T2 = 2,
    T3 = 3,
    T4 = 4,
    T5 = 5,
    T6 = 6,
    T7 = 7,
    Tp = 8,
}

impl From<EstimatorKind> for StratmeanEstimator {
    fn from(k: EstimatorKind) -> Self {
        match k {
            EstimatorKind::Mean => StratmeanEstimator::Mean,
            EstimatorKind::T1 => StratmeanEstimator::T1,
            EstimatorKind::T2 => StratmeanEstimator::T2,
            EstimatorKind::T3 => StratmeanEstimator::T3,
            EstimatorKind::T4 => StratmeanEstimator::T4,
            EstimatorKind::T5 => StratmeanEstimator::T5,
            EstimatorKind::T6 => StratmeanEstimator::T6,
            EstimatorKind::T7 => StratmeanEstimator::T7,
            EstimatorKind::Tp => StratmeanEstimator::Tp,
        }
    }
}

/// Relative second moments of the sampling design.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StratmeanMoments {
    pub v200: f64,
    pub v020: f64,
    pub v002: f64,
    pub v110: f64,
    pub v101: f64,
    pub v011: f64,
    pub mean_y: f64,
    pub mean_x: f64,
    pub mean_z: f64,
    /// 0 in a census, where `b1` and `b2` are undefined and set to NaN.
    pub has_coefficients: i32,
    pub b1: f64,
    pub b2: f64,
    pub regression_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StratmeanPreRow {
    pub estimator: StratmeanEstimator,
    pub mse: f64,
    /// NaN when the MSE is zero.
    pub pre: f64,
    pub rank: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StratmeanSimRow {
    pub estimator: StratmeanEstimator,
    /// Tuning exponents of a `tp` row, NaN otherwise.
    pub m1: f64,
    pub m2: f64,
    pub empirical_mean: f64,
    pub empirical_bias: f64,
    pub empirical_mse: f64,
    pub theoretical_mse: f64,
    pub relative_gap: f64,
    pub non_finite: usize,
}

/// A reconciled population summary with its sample design and moments.
pub struct StratmeanModel {
    moments: MomentSet,
    repairs: usize,
}

/// A finished Monte Carlo run.
pub struct StratmeanSimulation {
    report: SimulationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: StratmeanStatus, message: impl Into<String>) -> StratmeanStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> StratmeanStatus {
    let status = match e.kind() {
        ErrorKind::Input => StratmeanStatus::Input,
        ErrorKind::Numerical => StratmeanStatus::Numerical,
        ErrorKind::Validation => StratmeanStatus::Validation,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> StratmeanStatus) -> StratmeanStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(StratmeanStatus::Panic, "internal panic"),
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn stratmean_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn build_model(
    pop: stratmean::PopulationSummary,
    design: SampleDesign,
    policy: StratmeanPolicy,
) -> Result<StratmeanModel, Error> {
    design.check_against(&pop)?;
    let (pop, report) = reconcile_covariances(&pop, policy.into())?;
    Ok(StratmeanModel {
        moments: stratmean::moment_set(&pop, &design)?,
        repairs: report.repairs().count(),
    })
}

fn emit<T>(value: Result<T, Error>, out: *mut T) -> StratmeanStatus {
    match value {
        Ok(v) => {
            // SAFETY: callers check `out` for null before computing `value`
            unsafe { out.write(v) };
            StratmeanStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Builds a model from a summary JSON document (`{"strata": [...], "n_h": [...]}`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_model_from_json(
    json: *const c_char,
    policy: StratmeanPolicy,
    out: *mut *mut StratmeanModel,
) -> StratmeanStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(StratmeanStatus::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => return fail(StratmeanStatus::InvalidUtf8, "summary is not valid UTF-8"),
        };
        let model = SummaryDocument::parse(text).and_then(|doc| {
            let (pop, design) = doc.into_parts();
            let design = design.ok_or_else(|| Error::Design("summary has no n_h".into()))?;
            build_model(pop, design, policy)
        });
        emit(model.map(|m| Box::into_raw(Box::new(m))), out)
    })
}

/// Builds a model from the embedded school dataset and its published design.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_model_embedded(
    policy: StratmeanPolicy,
    out: *mut *mut StratmeanModel,
) -> StratmeanStatus {
    guard(|| {
        if out.is_null() {
            return fail(StratmeanStatus::NullPointer, "null argument");
        }
        let (pop, design) = embedded_kk2009();
        emit(build_model(pop, design, policy).map(|m| Box::into_raw(Box::new(m))), out)
    })
}

/// # Safety
/// `model` must come from a `stratmean_model_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn stratmean_model_free(model: *mut StratmeanModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of covariance entries repaired or imputed while building the model.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stratmean_model_repairs(model: *const StratmeanModel) -> usize {
    model.as_ref().map_or(0, |m| m.repairs)
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_moments(model: *const StratmeanModel, out: *mut StratmeanMoments) -> StratmeanStatus {
    guard(|| {
        let (Some(model), false) = (model.as_ref(), out.is_null()) else {
            return fail(StratmeanStatus::NullPointer, "null argument");
        };
        let m = &model.moments;
        out.write(StratmeanMoments {
            v200: m.v200,
            v020: m.v020,
            v002: m.v002,
            v110: m.v110,
            v101: m.v101,
            v011: m.v011,
            mean_y: m.mean_y,
            mean_x: m.mean_x,
            mean_z: m.mean_z,
            has_coefficients: i32::from(m.b1.is_some()),
            b1: m.b1.unwrap_or(f64::NAN),
            b2: m.b2.unwrap_or(f64::NAN),
            regression_residual: m.regression_residual,
        });
        StratmeanStatus::Ok
    })
}

/// First-order MSE of one estimator. `m1` and `m2` are used for `tp` only.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_mse(
    model: *const StratmeanModel,
    estimator: StratmeanEstimator,
    m1: f64,
    m2: f64,
    out: *mut f64,
) -> StratmeanStatus {
    guard(|| {
        let (Some(model), false) = (model.as_ref(), out.is_null()) else {
            return fail(StratmeanStatus::NullPointer, "null argument");
        };
        let m = &model.moments;
        let id = match estimator {
            StratmeanEstimator::Mean => Ok(EstimatorId::Mean),
            StratmeanEstimator::T1 => Ok(EstimatorId::T1),
            StratmeanEstimator::T2 => Ok(EstimatorId::T2),
            StratmeanEstimator::T3 => Ok(EstimatorId::T3),
            StratmeanEstimator::T4 => Ok(EstimatorId::T4),
            StratmeanEstimator::T5 => Ok(EstimatorId::T5),
            StratmeanEstimator::T6 => Ok(EstimatorId::T6),
            StratmeanEstimator::T7 => Ok(EstimatorId::T7),
            StratmeanEstimator::Tp => EstimatorId::tp(m1, m2),
        };
        let value = id.and_then(|id| match id {
            EstimatorId::Tp { m1, m2 } => Ok(mse_tp(m, m1, m2).mse),
            other => mse_classic(other, m),
        });
        emit(value, out)
    })
}

/// Optimal `(m1, m2)` of `tp` and the MSE there.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_optimal_m(
    model: *const StratmeanModel,
    m1: *mut f64,
    m2: *mut f64,
    min_mse: *mut f64,
) -> StratmeanStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(StratmeanStatus::NullPointer, "null argument");
        };
        if m1.is_null() || m2.is_null() || min_mse.is_null() {
            return fail(StratmeanStatus::NullPointer, "null argument");
        }
        match optimal_m(&model.moments) {
            Ok((a, b)) => {
                m1.write(a);
                m2.write(b);
                min_mse.write(mse_tp(&model.moments, a, b).mse);
                StratmeanStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Writes the nine PRE rows (mean, t1..t7, tp) into `rows`.
///
/// # Safety
/// `rows` must have room for `capacity` elements; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_pre_table(
    model: *const StratmeanModel,
    rows: *mut StratmeanPreRow,
    capacity: usize,
    written: *mut usize,
) -> StratmeanStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return fail(StratmeanStatus::NullPointer, "null argument");
        };
        if rows.is_null() || written.is_null() {
            return fail(StratmeanStatus::NullPointer, "null argument");
        }
        let report = match pre_table(&model.moments) {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        written.write(report.rows.len());
        if capacity < report.rows.len() {
            return fail(
                StratmeanStatus::BufferTooSmall,
                format!("{} rows needed, capacity {capacity}", report.rows.len()),
            );
        }
        for (i, r) in report.rows.iter().enumerate() {
            rows.add(i).write(StratmeanPreRow {
                estimator: r.estimator.into(),
                mse: r.mse,
                pre: r.pre.unwrap_or(f64::NAN),
                rank: r.rank,
            });
        }
        StratmeanStatus::Ok
    })
}

/// Monte Carlo on the reference three-stratum population generated from
/// `seed`, with `replications` replications seeded from the same value.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_simulate_reference(
    seed: u64,
    replications: usize,
    out: *mut *mut StratmeanSimulation,
) -> StratmeanStatus {
    guard(|| {
        if out.is_null() {
            return fail(StratmeanStatus::NullPointer, "null argument");
        }
        let cfg = SyntheticPopulationConfig::reference(seed);
        let design = SyntheticPopulationConfig::reference_design();
        let report = generate_population(&cfg).and_then(|(micro, summary)| {
            let settings = SimulationSettings::new(replications, seed);
            let mut report = run_simulation(&micro, &summary, &design, &settings)?;
            report.config = Some(cfg.clone());
            Ok(report)
        });
        emit(report.map(|report| Box::into_raw(Box::new(StratmeanSimulation { report }))), out)
    })
}

/// # Safety
/// `sim` must come from [`stratmean_simulate_reference`], or be NULL.
#[no_mangle]
pub unsafe extern "C" fn stratmean_simulation_free(sim: *mut StratmeanSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stratmean_simulation_len(sim: *const StratmeanSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.report.rows.len())
}

/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_simulation_row(
    sim: *const StratmeanSimulation,
    index: usize,
    out: *mut StratmeanSimRow,
) -> StratmeanStatus {
    guard(|| {
        let (Some(sim), false) = (sim.as_ref(), out.is_null()) else {
            return fail(StratmeanStatus::NullPointer, "null argument");
        };
        let Some(r) = sim.report.rows.get(index) else {
            return fail(
                StratmeanStatus::Input,
                format!("row {index} out of range (len {})", sim.report.rows.len()),
            );
        };
        let (m1, m2) = r.m.unwrap_or((f64::NAN, f64::NAN));
        out.write(StratmeanSimRow {
            estimator: r.estimator.into(),
            m1,
            m2,
            empirical_mean: r.empirical_mean,
            empirical_bias: r.empirical_bias,
            empirical_mse: r.empirical_mse,
            theoretical_mse: r.theoretical_mse,
            relative_gap: r.relative_gap,
            non_finite: r.non_finite,
        });
        StratmeanStatus::Ok
    })
}

/// The full simulation report as JSON. Free with [`stratmean_string_free`].
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stratmean_simulation_json(
    sim: *const StratmeanSimulation,
    out: *mut *mut c_char,
) -> StratmeanStatus {
    guard(|| {
        let (Some(sim), false) = (sim.as_ref(), out.is_null()) else {
            return fail(StratmeanStatus::NullPointer, "null argument");
        };
        let text = serde_json::to_string(&sim.report).expect("reports serialize");
        out.write(CString::new(text).expect("JSON has no NUL").into_raw());
        StratmeanStatus::Ok
    })
}

/// # Safety
/// `s` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn stratmean_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
