//! Adaptive Gauss–Kronrod quadrature.
//!
//! [`integrate`] is a globally adaptive 21-point Gauss–Kronrod scheme in the
//! spirit of QUADPACK's `qag`: the interval with the largest error estimate is
//! bisected until the summed estimate drops below the requested tolerance.
//!
//! [`integrate_singular_origin`] handles integrands on `(0, b]` that blow up
//! like `σ(τ)/τ` at the origin for a modulus of continuity `σ`. It uses the
//! substitution `τ = b·exp(1 − e^v)`, which turns both power-type and
//! logarithmic singularities into an exponentially decaying tail in `v`, and
//! then maps `v ∈ [0, ∞)` onto `w ∈ (0, 1]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_500_301_702_930,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss 10-point weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Requested accuracy: stop once `error <= max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 2000,
        }
    }

    pub const fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Panel { a, b, value, error }
}

/// Globally adaptive Gauss–Kronrod (G10/K21) quadrature of `f` on `[a, b]`.
///
/// Never evaluates `f` at the endpoints, so integrable endpoint singularities
/// are allowed. Non-finite function values poison the estimate; callers that
/// extend integrands by zero should return `0.0` rather than `NaN`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Like [`integrate`], but starts from the panels delimited by `points`
/// (sorted, at least two entries). Use it to place known kinks on panel edges.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> QuadResult {
    assert!(points.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let p = kronrod21(&f, w[0], w[1]);
            value += p.value;
            error += p.error;
            heap.push(p);
        }
    }
    let mut evaluations = 21 * heap.len();
    if heap.is_empty() {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    loop {
        if error <= tol.abs.max(tol.rel * value.abs()) {
            break;
        }
        if heap.len() >= tol.max_intervals {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        evaluations,
        converged: error <= tol.abs.max(tol.rel * value.abs()) && value.is_finite(),
    }
}

/// Integral over `(0, b]` of an integrand `f` that behaves like `σ(τ)/τ`
/// near the origin.
///
/// The caller supplies `g(ln τ) = τ·f(τ)`, so that points far below the
/// smallest positive `f64` still contribute: for logarithmic moduli the
/// transformed integrand only decays like `e^{−(β−1)v}` and the mass beyond
/// `τ ≈ 1e−308` is not negligible.
///
/// `decay` is the exponential decay rate of the transformed integrand in the
/// doubly-logarithmic variable: `1` for power-type moduli and `β − 1` for the
/// logarithmic family `(1 + ln(1/τ))^{−β}`. See
/// [`crate::modulus::ModulusDescriptor::log_decay_rate`].
pub fn integrate_singular_origin<G: Fn(f64) -> f64>(
    g: G,
    b: f64,
    decay: f64,
    tol: Tolerance,
) -> QuadResult {
    let kappa = decay.max(1e-3);
    let ln_b = b.ln();
    let h = |w: f64| {
        let v = (1.0 / w - 1.0) / kappa;
        let u = v.exp_m1();
        if !u.is_finite() {
            return 0.0;
        }
        // dτ = τ·e^v dv, dv = dw / (κ w²)
        let val = g(ln_b - u) * (v - 2.0 * w.ln()).exp() / kappa;
        if val.is_finite() {
            val
        } else {
            0.0
        }
    };
    integrate(h, 0.0, 1.0, tol)
}

/// `∫_{v0}^{∞} exp(h(v)) dv` for a log-integrand `h` whose tail decays at
/// least like `−κ v`.
pub fn integrate_log_tail<H: Fn(f64) -> f64>(h: H, v0: f64, decay: f64, tol: Tolerance) -> QuadResult {
    let kappa = decay.max(1e-3);
    let ln_kappa = kappa.ln();
    let g = |w: f64| {
        let v = v0 + (1.0 / w - 1.0) / kappa;
        let val = (h(v) - ln_kappa - 2.0 * w.ln()).exp();
        if val.is_finite() {
            val
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::new(1e-12, 1e-14));
        assert!(r.value.abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn endpoint_power_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-12, 1e-12));
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn breaks_handle_kinks() {
        let r = integrate_with_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], Tolerance::new(1e-14, 1e-14));
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn singular_origin_power() {
        // ∫_0^1 τ^{-0.7} dτ = 1/0.3, supplied as τ·τ^{-0.7} = e^{0.3 ln τ}
        let r = integrate_singular_origin(|l: f64| (0.3 * l).exp(), 1.0, 1.0, Tolerance::new(1e-12, 1e-12));
        assert!((r.value - 1.0 / 0.3).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn singular_origin_logarithmic() {
        // ∫_0^{1/2} dτ / (τ (1 + ln(1/τ))^2) = 1 / (1 + ln 2)
        let g = |l: f64| (1.0 - l).powi(-2);
        let r = integrate_singular_origin(g, 0.5, 1.0, Tolerance::new(1e-12, 1e-12));
        assert!((r.value - 1.0 / (1.0 + 2f64.ln())).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn log_tail_exponential() {
        let r = integrate_log_tail(|v| -2.0 * v, 1.0, 2.0, Tolerance::new(1e-14, 1e-13));
        assert!((r.value - (-2.0f64).exp() / 2.0).abs() < 1e-13, "{r:?}");
    }
}
