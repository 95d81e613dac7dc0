mod common;

use common::{classic_oracle, nelder_mead, random_moments, regression_oracle, rel, rng};
use rand::Rng;
use stratmean::estimators::EstimatorId;
use stratmean::theory::{bias_tp, bias_tp_expansion, diagnostics, is_minimum, mse_regression_combined};
use stratmean::{min_mse_tp, mse_classic, mse_tp, optimal_m};

#[test]
fn classic_formulas_match_written_out_oracle() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let m = random_moments(&mut r);
        let oracle = classic_oracle(&m);
        let ids = [
            EstimatorId::Mean,
            EstimatorId::T1,
            EstimatorId::T2,
            EstimatorId::T3,
            EstimatorId::T4,
            EstimatorId::T5,
            EstimatorId::T6,
        ];
        for (id, want) in ids.iter().zip(oracle) {
            let got = mse_classic(*id, &m).unwrap();
            assert!(rel(got, want) < 1e-12, "{id:?}: {got} vs {want}");
        }
    }
}

#[test]
fn tp_nests_the_exponential_and_regression_estimators() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let m = random_moments(&mut r);
        let plain = m.with_coefficients(0.0, 0.0);
        let oracle = classic_oracle(&m);
        for (k, (m1, m2)) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)].into_iter().enumerate() {
            let got = mse_tp(&plain, m1, m2).mse;
            assert!(rel(got, oracle[3 + k]) < 1e-12, "({m1}, {m2}): {got} vs {}", oracle[3 + k]);
        }
        let got = mse_tp(&plain, 1.0, 0.0).mse;
        assert!(rel(got, oracle[2]) < 1e-12);
        let reg = mse_tp(&m, 0.0, 0.0).mse;
        assert!(rel(reg, regression_oracle(&m)) < 1e-12, "{reg}");
        assert!(rel(reg, mse_regression_combined(&m)) < 1e-12);
    }
}

#[test]
fn optimum_matches_numerical_minimiser() {
    let mut r = rng(3);
    for _ in 0..1000 {
        let m = random_moments(&mut r);
        let (m1, m2) = optimal_m(&m).unwrap();
        let best = min_mse_tp(&m).unwrap().mse;
        let ((n1, n2), found) = nelder_mead(|a, b| mse_tp(&m, a, b).mse, (0.0, 0.0), 1.0, 400);
        assert!(found >= best * (1.0 - 1e-12), "minimiser beat the closed form: {found} < {best}");
        assert!(rel(found, best) < 1e-8, "{found} vs {best} at ({n1}, {n2}) / ({m1}, {m2})");
    }
}

#[test]
fn optimum_dominates_random_probes() {
    let mut r = rng(4);
    for _ in 0..100 {
        let m = random_moments(&mut r);
        let best = min_mse_tp(&m).unwrap().mse;
        let (m1, m2) = optimal_m(&m).unwrap();
        let width = 10.0 + m1.abs().max(m2.abs());
        for _ in 0..10_000 {
            let p = mse_tp(&m, r.random_range(-width..width), r.random_range(-width..width)).mse;
            assert!(p >= best * (1.0 - 1e-12), "{p} < {best}");
        }
    }
}

#[test]
fn mse_is_an_exact_quadratic_with_zero_gradient_at_the_optimum() {
    let mut r = rng(5);
    for _ in 0..200 {
        let m = random_moments(&mut r);
        let (m1, m2) = optimal_m(&m).unwrap();
        let f = |a: f64, b: f64| mse_tp(&m, a, b).mse;
        let y2 = m.mean_y * m.mean_y;
        // exact second differences of a quadratic, any step
        for h in [0.5, 2.0] {
            let d11 = (f(m1 + h, m2) - 2.0 * f(m1, m2) + f(m1 - h, m2)) / (h * h);
            let d22 = (f(m1, m2 + h) - 2.0 * f(m1, m2) + f(m1, m2 - h)) / (h * h);
            let d12 = (f(m1 + h, m2 + h) - f(m1 + h, m2 - h) - f(m1 - h, m2 + h) + f(m1 - h, m2 - h)) / (4.0 * h * h);
            let scale = f(m1, m2).abs() / (h * h) + y2 * m.v020;
            assert!((d11 - y2 * m.v020 / 2.0).abs() < 1e-9 * scale, "{d11}");
            assert!((d22 - y2 * m.v002 / 2.0).abs() < 1e-9 * scale, "{d22}");
            assert!((d12 - y2 * m.v011 / 2.0).abs() < 1e-9 * scale, "{d12}");
        }
        let h = 1e-3;
        let g1 = (f(m1 + h, m2) - f(m1 - h, m2)) / (2.0 * h);
        let g2 = (f(m1, m2 + h) - f(m1, m2 - h)) / (2.0 * h);
        let scale = y2 * (m.v020 + m.v002);
        assert!(g1.abs() < 1e-6 * scale && g2.abs() < 1e-6 * scale, "{g1} {g2}");
        assert!(is_minimum(&m));
    }
}

#[test]
fn minimum_depends_only_on_the_moments() {
    let mut r = rng(6);
    for _ in 0..200 {
        let m = random_moments(&mut r);
        let a = min_mse_tp(&m).unwrap().mse;
        let b = min_mse_tp(&m.with_coefficients(-m.b1.unwrap() * 3.0, 0.5)).unwrap().mse;
        let (v, w) = (m.v200, [m.v110, m.v101]);
        let det = m.v020 * m.v002 - m.v011 * m.v011;
        let quad = (w[0] * w[0] * m.v002 - 2.0 * w[0] * w[1] * m.v011 + w[1] * w[1] * m.v020) / det;
        let closed = m.mean_y * m.mean_y * (v - quad);
        assert!(rel(a, b) < 1e-9 && rel(a, closed) < 1e-9, "{a} {b} {closed}");
    }
}

#[test]
fn decomposition_terms_reassemble() {
    let mut r = rng(7);
    for _ in 0..500 {
        let m = random_moments(&mut r);
        let (m1, m2) = (r.random_range(-4.0..4.0), r.random_range(-4.0..4.0));
        let b = mse_tp(&m, m1, m2);
        let t = b.tp.unwrap();
        let y = m.mean_y;
        let total = y * y * (m.v200 + t.p1) + t.p2 - y * t.p3;
        assert!(rel(total, b.mse) < 1e-10, "{total} vs {}", b.mse);
    }
}

/// Second-order expansion of `E[(1 + ey) exp(m1 r(ex)) exp(m2 r(ez))] - 1`
/// with `r(e) = -e / (2 + e)`, Hessian by finite differences.
fn numerical_bias(v: [[f64; 3]; 3], m1: f64, m2: f64) -> f64 {
    let g = |e: [f64; 3]| (1.0 + e[0]) * (-m1 * e[1] / (2.0 + e[1])).exp() * (-m2 * e[2] / (2.0 + e[2])).exp();
    let h = 1e-4;
    let mut total = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let at = |si: f64, sj: f64| {
                let mut e = [0.0; 3];
                e[i] += si * h;
                e[j] += sj * h;
                g(e)
            };
            let d = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
            total += 0.5 * d * v[i][j];
        }
    }
    total
}

#[test]
fn bias_expansion_matches_numerical_hessian() {
    let mut r = rng(8);
    for _ in 0..200 {
        let m = random_moments(&mut r);
        let (m1, m2) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let v = [
            [m.v200, m.v110, m.v101],
            [m.v110, m.v020, m.v011],
            [m.v101, m.v011, m.v002],
        ];
        let want = m.mean_y * numerical_bias(v, m1, m2);
        let got = bias_tp_expansion(&m, m1, m2);
        let scale = m.mean_y * (m.v200 + m.v020 + m.v002) * (1.0 + m1.abs() + m2.abs()).powi(2);
        assert!((got - want).abs() < 1e-5 * scale, "{got} vs {want}");
        // the printed form differs by the linear m/4 terms and the cross-term sign
        let printed = bias_tp(&m, m1, m2);
        let gap = m.mean_y
            * (m1 / 4.0 * m.v020 + m2 / 4.0 * m.v002 - m1 * m1 / 8.0 * m.v020 - m2 * m2 / 8.0 * m.v002
                + m1 * m2 / 2.0 * m.v011);
        assert!((got - printed - gap).abs() < 1e-9 * scale);
    }
}

#[test]
fn diagnostics_expose_printed_variants() {
    let mut r = rng(9);
    let m = random_moments(&mut r);
    let (m1, m2) = optimal_m(&m).unwrap();
    let d = diagnostics(&m, m1, m2);
    assert_eq!(d.optimum_solved, Some((m1, m2)));
    assert_eq!(d.mse_tp_implemented, mse_tp(&m, m1, m2).mse);
    assert!(rel(d.t7_combined, regression_oracle(&m)) < 1e-12);
    let at = d.mse_at_printed_optimum.unwrap();
    assert!(at >= d.mse_tp_implemented * (1.0 - 1e-12));
}
