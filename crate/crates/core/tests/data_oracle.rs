mod common;

use common::rel;
use rand::seq::index;
use stratmean::efficiency::pre_table;
use stratmean::estimators::{sample_regression_coeffs, StratifiedSample};
use stratmean::montecarlo::{generate_population, SyntheticPopulationConfig};
use stratmean::{
    embedded_kk2009, moment_set, parse_microdata, reconcile_covariances, summarize, CovariancePolicy, EstimatorKind,
    Pair, SampleDesign, Unit,
};

const FILE: &str = "\
stratum,y,x,z
north,12.5,101.2,7.1
north,14.1,110.9,7.9
north,9.8,95.3,6.2
north,15.6,121.7,8.8
north,11.0,99.4,6.7
south,22.3,180.1,15.2
south,25.9,201.6,16.1
south,19.4,171.0,13.3
south,28.8,230.2,18.9
valley,5.1,44.0,3.9
valley,6.6,52.8,4.4
valley,4.2,40.7,3.1
valley,7.9,61.3,5.6
valley,5.5,47.9,4.0
valley,6.0,50.0,4.8
";

/// Two-pass textbook moments: mean, then sums of squared deviations over N - 1.
fn textbook(values: &[[f64; 3]]) -> ([f64; 3], [[f64; 3]; 3]) {
    let n = values.len() as f64;
    let mut mean = [0.0; 3];
    for v in values {
        for k in 0..3 {
            mean[k] += v[k] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for v in values {
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += (v[a] - mean[a]) * (v[b] - mean[b]) / (n - 1.0);
            }
        }
    }
    (mean, cov)
}

#[test]
fn summary_matches_textbook_recomputation() {
    let micro = parse_microdata(FILE).unwrap();
    assert_eq!(micro.sizes(), vec![5, 4, 6]);
    let summary = summarize(&micro).unwrap();

    let mut groups: Vec<(&str, Vec<[f64; 3]>)> = Vec::new();
    for line in FILE.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let row = [f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap()];
        match groups.iter_mut().find(|g| g.0 == f[0]) {
            Some(g) => g.1.push(row),
            None => groups.push((f[0], vec![row])),
        }
    }
    for ((_, rows), s) in groups.iter().zip(&summary.strata) {
        let (mean, cov) = textbook(rows);
        assert_eq!(s.size, rows.len());
        assert!(rel(s.mean_y, mean[0]) < 1e-12);
        assert!(rel(s.mean_x, mean[1]) < 1e-12);
        assert!(rel(s.mean_z, mean[2]) < 1e-12);
        assert!(rel(s.sd_y, cov[0][0].sqrt()) < 1e-12);
        assert!(rel(s.sd_x, cov[1][1].sqrt()) < 1e-12);
        assert!(rel(s.sd_z, cov[2][2].sqrt()) < 1e-12);
        assert!(rel(s.covariance(Pair::Yx).unwrap(), cov[0][1]) < 1e-12);
        assert!(rel(s.covariance(Pair::Yz).unwrap(), cov[0][2]) < 1e-12);
        assert!(rel(s.covariance(Pair::Xz).unwrap(), cov[1][2]) < 1e-12);
        let r = |a: usize, b: usize| cov[a][b] / (cov[a][a] * cov[b][b]).sqrt();
        assert!(rel(s.correlation(Pair::Yx).unwrap(), r(0, 1)) < 1e-12);
        assert!(rel(s.correlation(Pair::Yz).unwrap(), r(0, 2)) < 1e-12);
        assert!(rel(s.correlation(Pair::Xz).unwrap(), r(1, 2)) < 1e-12);
    }
}

#[test]
fn microdata_errors_name_the_line() {
    let err = parse_microdata("stratum,y,x,z\nA,1,x,3\n").unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains('x'), "{err}");
    let err = parse_microdata("stratum,y,x,z\n").unwrap_err().to_string();
    assert!(err.contains("no records"), "{err}");
}

/// Spreadsheet-style recomputation of the moment set: one column per
/// stratum, sums at the bottom.
#[test]
fn published_table_moments_match_spreadsheet() {
    let (raw, design) = embedded_kk2009();
    let (pop, _) = reconcile_covariances(&raw, CovariancePolicy::PreferCorrelation).unwrap();
    let m = moment_set(&pop, &design).unwrap();

    let n_total: f64 = pop.strata.iter().map(|s| s.size as f64).sum();
    assert_eq!(n_total, 923.0);
    let w: Vec<f64> = pop.strata.iter().map(|s| s.size as f64 / 923.0).collect();
    let f: Vec<f64> = pop
        .strata
        .iter()
        .zip(&design.n_h)
        .map(|(s, &n)| 1.0 / n as f64 - 1.0 / s.size as f64)
        .collect();
    let mut col = [0.0f64; 10];
    for (h, s) in pop.strata.iter().enumerate() {
        let a = w[h] * w[h] * f[h];
        col[0] += w[h] * s.mean_y;
        col[1] += w[h] * s.mean_x;
        col[2] += w[h] * s.mean_z;
        col[3] += a * s.sd_y * s.sd_y;
        col[4] += a * s.sd_x * s.sd_x;
        col[5] += a * s.sd_z * s.sd_z;
        // prefer-correlation: covariance is rho * S * S everywhere a correlation exists
        let ryx = s.rho_yx.unwrap();
        let ryz = s.rho_yz.unwrap();
        col[6] += a * ryx * s.sd_y * s.sd_x;
        col[7] += a * ryz * s.sd_y * s.sd_z;
        col[8] += a * s.cov_xz.unwrap();
        let rxz = s.cov_xz.unwrap() / (s.sd_x * s.sd_z);
        col[9] += a * s.sd_y * s.sd_y * (1.0 - ryx * ryx - ryz * ryz + 2.0 * ryx * ryz * rxz);
    }
    let (y, x, z) = (col[0], col[1], col[2]);
    let check = |got: f64, want: f64| assert!(rel(got, want) < 1e-12, "{got} vs {want}");
    check(m.mean_y, y);
    check(m.mean_x, x);
    check(m.mean_z, z);
    check(m.v200, col[3] / (y * y));
    check(m.v020, col[4] / (x * x));
    check(m.v002, col[5] / (z * z));
    check(m.v110, col[6] / (y * x));
    check(m.v101, col[7] / (y * z));
    check(m.v011, col[8] / (x * z));
    check(m.b1.unwrap(), col[6] / col[4]);
    check(m.b2.unwrap(), col[7] / col[5]);
    check(m.regression_residual, col[9]);

    // stratum 1 factors as exact rationals
    assert!(rel(w[0], 127.0 / 923.0) < 1e-15);
    assert!(rel(f[0], 96.0 / 3937.0) < 1e-15);
    // repaired S_yx4 by direct multiplication
    assert!(rel(pop.strata[3].cov_yx.unwrap(), 0.983 * 810.585 * 18218.931) < 1e-12);
}

/// PRE values of the embedded dataset under prefer-correlation, computed
/// independently (double precision, separate implementation) and rounded
/// to two decimals.
#[test]
fn published_table_pre_values() {
    let (raw, design) = embedded_kk2009();
    let (pop, _) = reconcile_covariances(&raw, CovariancePolicy::PreferCorrelation).unwrap();
    let report = pre_table(&moment_set(&pop, &design).unwrap()).unwrap();
    let expected = [
        (EstimatorKind::Mean, 100.0),
        (EstimatorKind::T1, 1049.26),
        (EstimatorKind::T2, 375.37),
        (EstimatorKind::T3, 1801.57),
        (EstimatorKind::T4, 28.94),
        (EstimatorKind::T5, 138.22),
        (EstimatorKind::T6, 72.30),
        (EstimatorKind::T7, 107.95),
        (EstimatorKind::Tp, 2841.14),
    ];
    for (kind, want) in expected {
        let got = report.row(kind).pre.unwrap();
        assert!((got - want).abs() < 0.006, "{kind}: {got} vs {want}");
    }
    for row in &report.rows {
        if row.estimator != EstimatorKind::Tp {
            assert!(row.delta_vs_tp > 0.0, "{row:?}");
        }
    }
}

/// Flat weighted least squares: stack every centred unit with weight
/// `W_h^2 f_h / (n_h - 1)` and regress y on x through the origin.
fn flat_wls(strata: &[Vec<Unit>], weights: &[f64]) -> f64 {
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (units, w) in strata.iter().zip(weights) {
        let n = units.len() as f64;
        let my = units.iter().map(|u| u.y).sum::<f64>() / n;
        let mx = units.iter().map(|u| u.x).sum::<f64>() / n;
        for u in units {
            rows.push((w / (n - 1.0), u.y - my, u.x - mx));
        }
    }
    // normal equation of min sum w (dy - b dx)^2
    let num: f64 = rows.iter().map(|(w, dy, dx)| w * dy * dx).sum();
    let den: f64 = rows.iter().map(|(w, _, dx)| w * dx * dx).sum();
    num / den
}

#[test]
fn sample_slope_matches_flat_weighted_least_squares() {
    let cfg = SyntheticPopulationConfig::reference(11);
    let (micro, summary) = generate_population(&cfg).unwrap();
    let design = SampleDesign::new(vec![12, 25, 40]);
    let mut rng = common::rng(12);
    for _ in 0..20 {
        let strata: Vec<Vec<Unit>> = micro
            .strata
            .iter()
            .zip(&design.n_h)
            .map(|(s, &n)| index::sample(&mut rng, s.units.len(), n).into_iter().map(|i| s.units[i]).collect())
            .collect();
        let weights: Vec<f64> = summary
            .strata
            .iter()
            .zip(&design.n_h)
            .map(|(s, &n)| {
                let w = s.size as f64 / 1000.0;
                w * w * (1.0 / n as f64 - 1.0 / s.size as f64)
            })
            .collect();
        let want = flat_wls(&strata, &weights);
        let sample = StratifiedSample::new(strata, design.clone()).unwrap();
        let (b1, _) = sample_regression_coeffs(&sample, &summary).unwrap();
        assert!(rel(b1, want) < 1e-12, "{b1} vs {want}");
    }
}
