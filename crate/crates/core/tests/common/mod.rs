#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stratmean::{MomentSet, PopulationSummary, SampleDesign, StratumSummary};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Three correlations forming a positive definite matrix with determinant
/// at least `margin`.
pub fn correlations<R: Rng>(rng: &mut R, max: f64, margin: f64) -> (f64, f64, f64) {
    loop {
        let r: [f64; 3] = [
            rng.random_range(-max..max),
            rng.random_range(-max..max),
            rng.random_range(-max..max),
        ];
        let det = 1.0 - r[0] * r[0] - r[1] * r[1] - r[2] * r[2] + 2.0 * r[0] * r[1] * r[2];
        if det >= margin {
            return (r[0], r[1], r[2]);
        }
    }
}

/// A positive definite moment set with arbitrary coefficients.
pub fn random_moments<R: Rng>(rng: &mut R) -> MomentSet {
    let v = |rng: &mut R| 10f64.powf(rng.random_range(-5.0..-2.0));
    let (v200, v020, v002) = (v(rng), v(rng), v(rng));
    let (ryx, ryz, rxz) = correlations(rng, 0.95, 0.02);
    let mean_y = rng.random_range(1.0..1000.0);
    let mean_x = rng.random_range(1.0..1000.0);
    let mean_z = rng.random_range(1.0..1000.0);
    MomentSet {
        v200,
        v020,
        v002,
        v110: ryx * (v200 * v020).sqrt(),
        v101: ryz * (v200 * v002).sqrt(),
        v011: rxz * (v020 * v002).sqrt(),
        mean_y,
        mean_x,
        mean_z,
        b1: Some(rng.random_range(-3.0..3.0) * mean_y / mean_x),
        b2: Some(rng.random_range(-3.0..3.0) * mean_y / mean_z),
        regression_residual: rng.random_range(0.0..1.0),
    }
}

/// Classic first-order MSEs written out term by term, in the order
/// mean, t1, t2, t3, t4, t5, t6.
pub fn classic_oracle(m: &MomentSet) -> [f64; 7] {
    let y2 = m.mean_y * m.mean_y;
    let (a, b, c, d, e, f) = (m.v200, m.v020, m.v002, m.v110, m.v101, m.v011);
    [
        y2 * a,
        y2 * (a + b - 2.0 * d),
        y2 * (a + b / 4.0 - d),
        y2 * (a + b / 4.0 + c / 4.0 - d - e + f / 2.0),
        y2 * (a + b / 4.0 + c / 4.0 + d + e + f / 2.0),
        y2 * (a + b / 4.0 + c / 4.0 - d + e - f / 2.0),
        y2 * (a + b / 4.0 + c / 4.0 + d - e - f / 2.0),
    ]
}

/// First-order MSE of `ybar + B1 (Xbar - xbar) + B2 (Zbar - zbar)`.
pub fn regression_oracle(m: &MomentSet) -> f64 {
    let (b1, b2) = (m.b1.unwrap(), m.b2.unwrap());
    let (y, x, z) = (m.mean_y, m.mean_x, m.mean_z);
    y * y * m.v200 + b1 * b1 * x * x * m.v020 + b2 * b2 * z * z * m.v002 + 2.0 * b1 * b2 * x * z * m.v011
        - 2.0 * b1 * y * x * m.v110
        - 2.0 * b2 * y * z * m.v101
}

/// Nelder-Mead on a function of two variables.
pub fn nelder_mead(f: impl Fn(f64, f64) -> f64, start: (f64, f64), step: f64, iterations: usize) -> ((f64, f64), f64) {
    let mut s: Vec<((f64, f64), f64)> = [start, (start.0 + step, start.1), (start.0, start.1 + step)]
        .into_iter()
        .map(|p| (p, f(p.0, p.1)))
        .collect();
    for _ in 0..iterations {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (s[0], s[2]);
        let c = ((s[0].0 .0 + s[1].0 .0) / 2.0, (s[0].0 .1 + s[1].0 .1) / 2.0);
        let at = |t: f64| {
            let p = (c.0 + t * (worst.0 .0 - c.0), c.1 + t * (worst.0 .1 - c.1));
            (p, f(p.0, p.1))
        };
        let r = at(-1.0);
        if r.1 < best.1 {
            let e = at(-2.0);
            s[2] = if e.1 < r.1 { e } else { r };
        } else if r.1 < s[1].1 {
            s[2] = r;
        } else {
            let k = if r.1 < worst.1 { at(-0.5) } else { at(0.5) };
            if k.1 < worst.1.min(r.1) {
                s[2] = k;
            } else {
                for v in &mut s[1..] {
                    let p = ((v.0 .0 + best.0 .0) / 2.0, (v.0 .1 + best.0 .1) / 2.0);
                    *v = (p, f(p.0, p.1));
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    s[0]
}

/// A random valid population summary with correlations only, plus a design.
pub fn random_population<R: Rng>(rng: &mut R, strata: usize) -> (PopulationSummary, SampleDesign) {
    let mut out = Vec::with_capacity(strata);
    let mut n = Vec::with_capacity(strata);
    for h in 1..=strata {
        let size = rng.random_range(10..500);
        let (ryx, ryz, rxz) = correlations(rng, 0.95, 0.01);
        let mean_y = rng.random_range(10.0..1000.0);
        let mean_x = rng.random_range(10.0..1000.0);
        let mean_z = rng.random_range(10.0..1000.0);
        out.push(StratumSummary {
            h,
            size,
            mean_y,
            mean_x,
            mean_z,
            sd_y: mean_y * rng.random_range(0.05..0.5),
            sd_x: mean_x * rng.random_range(0.05..0.5),
            sd_z: mean_z * rng.random_range(0.05..0.5),
            cov_yx: None,
            cov_yz: None,
            cov_xz: None,
            rho_yx: Some(ryx),
            rho_yz: Some(ryz),
            rho_xz: Some(rxz),
            beta2_x: None,
            beta2_y: None,
            beta2_z: None,
        });
        n.push(rng.random_range(2..=size));
    }
    (PopulationSummary::new(out).unwrap(), SampleDesign::new(n))
}
