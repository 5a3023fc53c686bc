#![allow(dead_code)]

use igep_core::igep::GeneratorParams;
use igep_core::rng::Rng;
use ndarray::Array2;
use rand::Rng as _;

/// Energy score by the textbook double loop over ordered pairs.
pub fn naive_energy_score(x: &Array2<f64>, y: &[f64], beta: f64, unbiased: bool) -> f64 {
    let s = x.nrows();
    let norm = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt().powf(beta)
    };
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut first = 0.0;
    for r in &rows {
        first += norm(r, y);
    }
    first /= s as f64;
    let mut second = 0.0;
    for i in 0..s {
        for j in 0..s {
            if i != j {
                second += norm(&rows[i], &rows[j]);
            }
        }
    }
    let denom = if unbiased {
        2.0 * (s * (s - 1)) as f64
    } else {
        2.0 * (s * s) as f64
    };
    first - second / denom
}

pub fn random_params(rng: &mut Rng, d: usize, j: usize) -> GeneratorParams {
    let mut p = GeneratorParams::zeros(d, j);
    p.alpha.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    p.beta.mapv_inplace(|_| rng.gen_range(0.5..1.5));
    p.gamma.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    p.omega.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    p
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
}

/// Minimum mean pinball loss of the linear `tau`-quantile regression, solved
/// as a linear program: min sum tau*u + (1-tau)*v  s.t.  X b + u - v = y.
pub fn quantile_regression_lp(x: &Array2<f64>, y: &[f64], tau: f64) -> f64 {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let (n, p) = x.dim();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let b: Vec<_> = (0..p).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for i in 0..n {
        let u = lp.add_var(tau, (0.0, f64::INFINITY));
        let v = lp.add_var(1.0 - tau, (0.0, f64::INFINITY));
        let mut e = LinearExpr::empty();
        for (j, var) in b.iter().enumerate() {
            e.add(*var, x[[i, j]]);
        }
        e.add(u, 1.0);
        e.add(v, -1.0);
        lp.add_constraint(e, ComparisonOp::Eq, y[i]);
    }
    lp.solve().expect("LP solves").objective() / n as f64
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
