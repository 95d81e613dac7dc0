//! The embedded six-stratum school dataset and its published efficiency column.
//!
//! `y` is the number of teachers, `x` the number of students and `z` the
//! number of classes. Values are stored exactly as published, including the
//! entries that disagree with their correlations (`S_yx4`, `S_yz4`, `S_xz3`,
//! `S_xz5`) and `Zbar_4`, which repeats `Zbar_1`. No correlation between `x`
//! and `z` is published.

use crate::data::{PopulationSummary, SampleDesign, StratumSummary};

pub const SIZES: [usize; 6] = [127, 117, 103, 170, 205, 201];
pub const SAMPLE_SIZES: [usize; 6] = [31, 21, 29, 38, 22, 39];

const SD_Y: [f64; 6] = [883.835, 644.0, 1033.467, 810.585, 403.654, 711.723];
const MEAN_Y: [f64; 6] = [703.74, 413.0, 573.17, 424.66, 267.03, 393.84];
const SD_X: [f64; 6] = [30486.751, 15180.760, 27549.697, 18218.931, 8997.776, 23094.141];
const MEAN_X: [f64; 6] = [20804.59, 9211.79, 14309.30, 9478.85, 5569.95, 12997.59];
const COV_YX: [f64; 6] = [
    25237153.52,
    9747942.85,
    28294397.04,
    1452885.53,
    3393591.75,
    15864573.97,
];
const RHO_YX: [f64; 6] = [0.936, 0.996, 0.994, 0.983, 0.989, 0.965];
const BETA2_X: [f64; 6] = [4.593, 18.543, 15.446, 10.162, 21.947, 23.114];
const BETA2_Y: [f64; 6] = [2.158, 16.392, 14.979, 12.167, 21.008, 20.254];
const SD_Z: [f64; 6] = [555.5816, 365.4576, 612.9509, 458.0282, 260.8511, 397.0481];
const MEAN_Z: [f64; 6] = [498.28, 318.33, 431.36, 498.28, 227.20, 313.71];
const COV_YZ: [f64; 6] = [480688.2, 230092.8, 623019.3, 36493.4, 101539.0, 277696.1];
const COV_XZ: [f64; 6] = [
    15914648.0,
    5379190.0,
    16490067456.0,
    8041254.0,
    214457.0,
    8857729.0,
];
const RHO_YZ: [f64; 6] = [0.978, 0.976, 0.983, 0.982, 0.964, 0.982];
const BETA2_Z: [f64; 6] = [2.314, 11.190, 10.786, 8.624, 9.720, 14.406];

/// Published percent relative efficiencies, in [`crate::EstimatorKind::ALL`] order.
pub const PUBLISHED_PRE: [f64; 9] = [
    100.0, 1029.46, 370.17, 2045.43, 27.94, 126.41, 77.21, 2360.54, 4656.35,
];

/// The dataset before reconciliation, with its sample design (`N = 923`, `n = 180`).
pub fn embedded_kk2009() -> (PopulationSummary, SampleDesign) {
    let strata = (0..6)
        .map(|i| StratumSummary {
            h: i + 1,
            size: SIZES[i],
            mean_y: MEAN_Y[i],
            mean_x: MEAN_X[i],
            mean_z: MEAN_Z[i],
            sd_y: SD_Y[i],
            sd_x: SD_X[i],
            sd_z: SD_Z[i],
            cov_yx: Some(COV_YX[i]),
            cov_yz: Some(COV_YZ[i]),
            cov_xz: Some(COV_XZ[i]),
            rho_yx: Some(RHO_YX[i]),
            rho_yz: Some(RHO_YZ[i]),
            rho_xz: None,
            beta2_x: Some(BETA2_X[i]),
            beta2_y: Some(BETA2_Y[i]),
            beta2_z: Some(BETA2_Z[i]),
        })
        .collect();
    (
        PopulationSummary { strata },
        SampleDesign::new(SAMPLE_SIZES.to_vec()),
    )
}
