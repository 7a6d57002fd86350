//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate meets the tolerance. Jumps and kinks in the integrand are handled
//! by bisection; callers that know where they are should pass them as
//! breakpoints.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::{Error, Result};

// 21-point Kronrod abscissae (positive half, descending) and weights; the odd
// entries are the 10-point Gauss abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One application of the 21-point rule on `[a, b]`: (Kronrod value, error estimate).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = fc.abs() * WGK[10];
    let mut fv = [(0.0, 0.0); 10];
    for (j, &x) in XGK[..10].iter().enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    // QUADPACK error rescaling
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (kronrod * half, err)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], opts)
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the given
/// (sorted) subdivision.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("need at least two integration points".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a <= b) {
            return Err(Error::InvalidArgument("integration points must be sorted".into()));
        }
        if a == b {
            continue;
        }
        let (value, error) = gk21(&mut f, a, b);
        total += value;
        total_err += error;
        heap.push(Segment { a, b, value, error });
    }
    if !total.is_finite() {
        return Err(Error::Numerical("non-finite integrand".into()));
    }
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numerical(alloc::format!(
                "quadrature did not converge: error {total_err:.3e} after {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision; accept its contribution
            heap.push(Segment { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation error
    let segments: Vec<Segment> = heap.into_vec();
    let value = segments.iter().map(|s| s.value).sum();
    let error = segments.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        error,
        intervals: segments.len(),
    })
}

/// Integrates over `[a, ∞)` through `x = a + t / (1 − t)`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    pts.push(0.0);
    for &x in breaks {
        if x > a && x.is_finite() {
            let u = x - a;
            pts.push(u / (1.0 + u));
        }
    }
    pts.push(1.0);
    pts.sort_by(|x, y| x.total_cmp(y));
    pts.dedup();
    integrate_with_breaks(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - t;
            let jac = 1.0 / (one_minus * one_minus);
            let v = f(a + t / one_minus);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        &pts,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn single_rule_is_exact_for_polynomials() {
        // K21 integrates degree 31 exactly, G10 degree 19
        for deg in 0..=31 {
            let (v, _) = gk21(&mut |x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "degree {deg}: {v} vs {exact}");
        }
    }

    #[test]
    fn gauss_weights_sum_to_two() {
        let s: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((s - 2.0).abs() < 1e-14);
        let k: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        assert!((k - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_and_discontinuous_integrands() {
        let r = integrate(|x: f64| x.sin(), 0.0, PI, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        // jump at an irrational point, not passed as a breakpoint
        let r = integrate(|x: f64| if x < 0.3 * PI.sqrt() { 1.0 } else { 0.0 }, 0.0, 1.0, QuadOptions::with_abs_tol(1e-10)).unwrap();
        assert!((r.value - 0.3 * PI.sqrt()).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn semi_infinite_gaussian_and_power_tail() {
        let r = integrate_semi_infinite(|x: f64| (-x * x / 2.0).exp(), 0.0, &[], QuadOptions::default()).unwrap();
        assert!((r.value - (PI / 2.0).sqrt()).abs() < 1e-10);
        let r = integrate_semi_infinite(|x: f64| 1.0 / (1.0 + x * x), 0.0, &[1.0], QuadOptions::default()).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 0.0, max_intervals: 4 };
        assert!(integrate(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0, opts).is_err());
    }
}
