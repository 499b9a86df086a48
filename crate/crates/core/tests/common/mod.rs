//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let m = panels + panels % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `∫_a^b σ(τ)/τ dτ` by Simpson in `u = ln τ`, where the integrand is smooth.
pub fn log_simpson<F: Fn(f64) -> f64>(sigma: F, a: f64, b: f64) -> f64 {
    simpson(|u: f64| sigma(u.exp()), a.ln(), b.ln(), 4096)
}

/// `m` log-uniform points covering `[lo, hi]`, endpoints included.
pub fn log_uniform(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..m)
        .map(|k| match k {
            0 => lo,
            k if k == m - 1 => hi,
            k => (a + (b - a) * k as f64 / (m - 1) as f64).exp(),
        })
        .collect()
}

pub fn dyadic(k_lo: i32, k_hi: i32) -> Vec<f64> {
    (k_lo..=k_hi).map(|k| 0.5f64.powi(k)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `max / min` of a positive sequence.
pub fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Whether every value lies within `factor` of the median (independent of the
/// library's helper).
pub fn within_factor_of_median(v: &[f64], factor: f64) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    let med = if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) };
    v.iter().all(|&x| x / med <= factor && med / x <= factor)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
