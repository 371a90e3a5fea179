//! Small statistical helpers used by tests, probes and diagnostics.

use crate::error::{Result, SabcError};

/// One-sample Kolmogorov-Smirnov distance `sup |F_n(x) - F(x)|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        // step over ties so discrete targets are compared at their jumps
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        // below an atom the empirical CDF meets the left limit of F
        let f_left = cdf(xs[i].next_down());
        let f = cdf(xs[i]);
        d = d.max((f_left - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Least-squares slope of `ys` on `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(SabcError::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(SabcError::EmptyInput("slope needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(SabcError::IllConditioned(f64::INFINITY));
    }
    Ok(sxy / sxx)
}

/// Slope of `ln y` against `ln t` over points with positive coordinates.
pub fn log_log_slope(ts: &[f64], ys: &[f64]) -> Result<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .unzip();
    ls_slope(&lx, &ly)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor n - 1).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}
