//! Numerical checks of the stability and ergodicity machinery.
//!
//! Every check returns a [`BoundReport`] with the scanned grid, the observed
//! values, the explicit numeric bound they are compared against and any fitted
//! constants. Only bounds that come with an explicit number are gated; the
//! existential constants are reported.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::adapt::{ChainSummary, FunctionalAverage};
use crate::kernel::{alpha_from_logs, expected_acc_at, expected_acc_quadrature, mean_acc, mean_acc_quadrature, proposal_expectation, PiSampler};
use crate::proposal::{DerivativeReport, ProposalModel, ScalingReport};
use crate::quad::{integrate_semi_infinite, integrate_with_breaks, QuadOptions};
use crate::rng::{derive_seed, seeded};
use crate::special::unit_sphere_area;
use crate::stats::{MannKendall, Welford};
use crate::target::{check_dim, SupportKind, TailReport, TargetDensity};
use crate::{Error, Result};

/// Result of one numerical check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// The bound the values are compared against, when there is a single one.
    pub threshold: Option<f64>,
    pub fitted: BTreeMap<String, f64>,
    pub pass: bool,
    pub skipped: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
            grid: Vec::new(),
            values: Vec::new(),
            std_errors: Vec::new(),
            threshold: None,
            fitted: BTreeMap::new(),
            pass: false,
            skipped: false,
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn fitted_value(&self, key: &str) -> Option<f64> {
        self.fitted.get(key).copied()
    }
}

impl From<&DerivativeReport> for BoundReport {
    fn from(r: &DerivativeReport) -> Self {
        let mut b = BoundReport::new("profile_derivative").param("a", r.interval.0).param("b", r.interval.1);
        b.grid = r.eps.clone();
        b.values = r.min_on_interval.clone();
        b.std_errors = r.negative_part.clone();
        b.threshold = Some(0.0);
        b.fitted.insert("c1".into(), r.fitted_c1);
        b.fitted.insert("c2".into(), r.fitted_c2);
        b.fitted.insert("c3".into(), r.fitted_c3);
        b.notes.push("std_errors carry the negative-part integrals".into());
        b.pass = r.pass;
        b
    }
}

impl From<&TailReport> for BoundReport {
    fn from(r: &TailReport) -> Self {
        let mut b = BoundReport::new("tail_condition").param("rho", r.rho);
        b.grid = r.radii.clone();
        b.values = r.radial_drift.clone();
        b.std_errors = r.contour_cosine.clone();
        b.threshold = Some(r.threshold);
        if let Some(r0) = r.fitted_r0 {
            b.fitted.insert("r0".into(), r0);
        }
        b.notes.push("std_errors carry the contour cosines".into());
        b.pass = r.pass;
        b
    }
}

impl From<&ScalingReport> for BoundReport {
    fn from(r: &ScalingReport) -> Self {
        let mut b = BoundReport::new("scaling_function");
        b.values = vec![r.worst_ratio];
        b.threshold = Some(r.constants.c);
        b.fitted.insert("h".into(), r.constants.h);
        b.fitted.insert("c".into(), r.constants.c);
        b.fitted.insert("kappa".into(), r.constants.kappa);
        b.fitted.insert("range_low".into(), r.range.0);
        b.fitted.insert("range_high".into(), r.range.1);
        if !r.increasing {
            b.notes.push("not increasing on the grid".into());
        }
        b.pass = r.pass;
        b
    }
}

/// How a check evaluates `acc(x, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AccMethod {
    /// Deterministic quadrature (`d ≤ 2`).
    Quadrature,
    /// `n` proposals per point; point `k` of a check uses stream `derive_seed(seed, k)`.
    MonteCarlo { n: u64, seed: u64 },
}

/// `acc(x, s)` and its standard error (zero for quadrature).
pub fn evaluate_acc<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    x: &[f64],
    s: f64,
    method: AccMethod,
    index: u64,
) -> Result<(f64, f64)> {
    match method {
        AccMethod::Quadrature => Ok((expected_acc_quadrature(target, model, x, s)?, 0.0)),
        AccMethod::MonteCarlo { n, seed } => {
            let mut rng = seeded(derive_seed(seed, index));
            expected_acc_at(target, model, x, s, n, &mut rng)
        }
    }
}

fn method_params(mut r: BoundReport, method: AccMethod) -> BoundReport {
    match method {
        AccMethod::Quadrature => r.notes.push("acc by quadrature".into()),
        AccMethod::MonteCarlo { n, seed } => {
            r = r.param("n_mc", n as f64);
            r.notes.push(format!("acc by Monte Carlo, seed {seed}"));
        }
    }
    r
}

/// Statistical allowance on a Monte Carlo check, in standard errors.
pub const STD_ERRORS: f64 = 3.0;

/// States drawn from π with the target's direct sampler.
pub fn pi_sample_points<T: TargetDensity + ?Sized>(target: &T, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = vec![0.0; target.dim()];
        if !target.sample(&mut rng, &mut x) {
            return Err(Error::Configuration("target has no direct sampler".into()));
        }
        out.push(x);
    }
    Ok(out)
}

/// Boundary points moved inward toward the center by `10^{-k}`, `k = 1..=6`.
pub fn boundary_probe_points<T: TargetDensity + ?Sized>(target: &T, count: usize) -> Vec<Vec<f64>> {
    let c = target.center();
    let mut out = Vec::new();
    for b in target.boundary_points(count) {
        let dir: Vec<f64> = c.iter().zip(&b).map(|(ci, bi)| ci - bi).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        for k in 1..=6 {
            let h = 10f64.powi(-k);
            let p: Vec<f64> = b.iter().zip(&dir).map(|(bi, di)| bi + h * di / len).collect();
            if target.log_density_unchecked(&p) > f64::NEG_INFINITY {
                out.push(p);
            }
        }
    }
    out
}

/// Largest `acc(x, s)` over the sample at each `s`; the upper bound `α*/2` must
/// hold beyond a detected threshold and at the scale `diam/ε` fixed by
/// `∫_{B(0,ε)} q ≤ α*/2`.
pub fn check_upper_bound_compact<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    alpha_star: f64,
    s_grid: &[f64],
    x_sample: &[Vec<f64>],
    method: AccMethod,
) -> Result<BoundReport> {
    let diam = match (target.support_kind(), target.diameter()) {
        (SupportKind::SuperExponential, _) | (_, None) => {
            return Err(Error::UnsupportedTarget("upper bound check needs a compact support".into()))
        }
        (_, Some(d)) => d,
    };
    validate_grid(s_grid)?;
    let bound = alpha_star / 2.0;
    let mut r = method_params(BoundReport::new("upper_bound").param("alpha_star", alpha_star), method);
    r.threshold = Some(bound);
    let nx = x_sample.len() as u64;
    let worst = |s: f64, row: u64| -> Result<(f64, f64)> {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (j, x) in x_sample.iter().enumerate() {
            let v = evaluate_acc(target, model, x, s, method, row * nx + j as u64)?;
            if v.0 + STD_ERRORS * v.1 > best.0 + STD_ERRORS * best.1 {
                best = v;
            }
        }
        Ok(best)
    };
    for (i, &s) in s_grid.iter().enumerate() {
        let (v, se) = worst(s, i as u64)?;
        r.grid.push(s);
        r.values.push(v);
        r.std_errors.push(se);
    }
    let ok: Vec<bool> = r.values.iter().zip(&r.std_errors).map(|(v, se)| *v <= bound + STD_ERRORS * se).collect();
    let detected = suffix_start(&ok).map(|i| s_grid[i]);
    // the radius whose proposal mass is α*/2, measured in the Euclidean norm
    let eps = model.shape().min_eigenvalue() * model.radial_quantile(bound)?;
    let s_theory = model.scaling().inverse(diam / eps);
    let (v, se) = worst(s_theory, s_grid.len() as u64)?;
    r.fitted.insert("epsilon".into(), eps);
    r.fitted.insert("theory_threshold_s".into(), s_theory);
    r.fitted.insert("acc_at_theory_threshold".into(), v);
    if let Some(a) = detected {
        r.fitted.insert("threshold_s".into(), a);
    } else {
        r.notes.push("no grid suffix satisfies the bound".into());
    }
    let theory_ok = v <= bound + STD_ERRORS * se;
    if !theory_ok {
        r.notes.push(format!("acc = {v} at the theoretical threshold exceeds α*/2"));
    }
    r.pass = detected.is_some() && theory_ok;
    Ok(r)
}

/// Smallest `acc(x, s)` over the sample at each `s`; the lower bound
/// `1/2 − (1/2)(1/2 − α*)` must hold below a detected threshold.
pub fn check_lower_bound_small_scale<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    alpha_star: f64,
    s_grid: &[f64],
    x_sample: &[Vec<f64>],
    method: AccMethod,
) -> Result<BoundReport> {
    validate_grid(s_grid)?;
    let bound = 0.5 - 0.5 * (0.5 - alpha_star);
    let mut r = method_params(BoundReport::new("lower_bound").param("alpha_star", alpha_star), method);
    r.threshold = Some(bound);
    if !target.has_uniformly_continuous_normals() {
        r.notes.push("target is outside the boundary regularity hypothesis; reported, not gated".into());
    }
    let nx = x_sample.len() as u64;
    for (i, &s) in s_grid.iter().enumerate() {
        let mut best = (f64::INFINITY, 0.0);
        for (j, x) in x_sample.iter().enumerate() {
            let v = evaluate_acc(target, model, x, s, method, i as u64 * nx + j as u64)?;
            if v.0 - STD_ERRORS * v.1 < best.0 - STD_ERRORS * best.1 {
                best = v;
            }
        }
        r.grid.push(s);
        r.values.push(best.0);
        r.std_errors.push(best.1);
    }
    let ok: Vec<bool> = r.values.iter().zip(&r.std_errors).map(|(v, se)| *v >= bound - STD_ERRORS * se).collect();
    let n_ok = ok.iter().take_while(|b| **b).count();
    if n_ok > 0 {
        r.fitted.insert("threshold_s".into(), s_grid[n_ok - 1]);
    } else {
        r.notes.push("the bound fails at the smallest scale".into());
    }
    r.pass = n_ok > 0 || !target.has_uniformly_continuous_normals();
    Ok(r)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("grid must be non-empty and increasing".into()));
    }
    Ok(())
}

// Index of the first element of the longest all-true suffix.
fn suffix_start(ok: &[bool]) -> Option<usize> {
    let n = ok.iter().rev().take_while(|b| **b).count();
    (n > 0).then(|| ok.len() - n)
}

/// Whether the small-scale threshold lies strictly below the large-scale one.
pub fn thresholds_consistent(lower: &BoundReport, upper: &BoundReport) -> bool {
    match (lower.fitted_value("threshold_s"), upper.fitted_value("threshold_s")) {
        (Some(a), Some(b)) => a < b,
        _ => false,
    }
}

/// Searches, for each `ε`, the smallest `c(ε)` with `acc(x, s) ≤ ε` whenever
/// `φ(s) ≥ c max{1, ‖x‖}`, over `x_grid`.
///
/// For each `x` the crossing scale is bisected in `log φ`, then confirmed on a
/// geometric grid up to `scale_cap`.
pub fn check_acc_envelope<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    eps_grid: &[f64],
    x_grid: &[Vec<f64>],
    method: AccMethod,
    scale_cap: f64,
) -> Result<BoundReport> {
    if target.support_kind() != SupportKind::SuperExponential {
        return Err(Error::UnsupportedTarget("envelope check needs a super-exponential target".into()));
    }
    let mut r = method_params(BoundReport::new("acc_envelope").param("scale_cap", scale_cap), method);
    let scaling = model.scaling();
    let floor = 1e-3;
    let mut all = true;
    let mut counter = 0u64;
    for &eps in eps_grid {
        let mut c_eps: f64 = 0.0;
        let mut found = true;
        for x in x_grid {
            check_dim(model.dim(), x)?;
            let unit = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let mut acc_at = |theta: f64| -> Result<f64> {
                counter += 1;
                let (v, se) = evaluate_acc(target, model, x, scaling.inverse(theta), method, counter)?;
                Ok(v + STD_ERRORS * se)
            };
            if acc_at(floor * unit)? <= eps {
                c_eps = c_eps.max(floor);
                continue;
            }
            if acc_at(scale_cap * unit)? > eps {
                found = false;
                r.notes.push(format!("ε = {eps}: acc above ε at the scale cap for x = {x:?}"));
                break;
            }
            let (mut lo, mut hi) = (floor.ln(), scale_cap.ln());
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if acc_at(mid.exp() * unit)? <= eps {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let c = hi.exp();
            // confirm the bound keeps holding above the crossing
            let mut t = c;
            while t < scale_cap {
                t *= 2.0;
                if acc_at(t.min(scale_cap) * unit)? > eps {
                    found = false;
                    r.notes.push(format!("ε = {eps}: acc rises above ε again at φ = {} for x = {x:?}", t * unit));
                    break;
                }
            }
            c_eps = c_eps.max(c);
        }
        r.grid.push(eps);
        r.values.push(if found { c_eps } else { f64::INFINITY });
        r.std_errors.push(0.0);
        if found {
            r.fitted.insert(format!("c({eps})"), c_eps);
        }
        all &= found;
    }
    r.pass = all;
    Ok(r)
}

/// How `find_target_scale` evaluates `acc(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MeanAccMethod {
    /// Nested quadrature (`d = 1`).
    Quadrature,
    /// Nested Monte Carlo from the direct sampler with common random numbers.
    MonteCarlo { n_outer: u64, n_inner: u64, seed: u64 },
}

/// Evaluates `acc(s)` with its standard error.
pub fn evaluate_mean_acc<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    s: f64,
    method: MeanAccMethod,
) -> Result<(f64, f64)> {
    match method {
        MeanAccMethod::Quadrature => Ok((mean_acc_quadrature(target, model, s)?, 0.0)),
        MeanAccMethod::MonteCarlo { n_outer, n_inner, seed } => {
            mean_acc(target, model, s, n_outer, n_inner, &PiSampler::Direct, &mut seeded(seed))
        }
    }
}

/// Outcome of [`find_target_scale`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetScale {
    pub s_star: f64,
    pub theta_star: f64,
    pub acc: f64,
    pub std_error: f64,
    pub iterations: u32,
}

/// Tolerance `|acc(s*) − α*|` that the search must reach.
pub const TARGET_SCALE_TOLERANCE: f64 = 0.005;

/// Bisects `acc(s) = α*` on a bracket with `acc(lo) ≥ α* ≥ acc(hi)`.
///
/// The bracket is first scanned at nine points to confirm that `acc(s)` is
/// non-increasing on it (within three standard errors).
pub fn find_target_scale<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    alpha_star: f64,
    bracket: (f64, f64),
    method: MeanAccMethod,
) -> Result<TargetScale> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Bracketing { lo, hi });
    }
    let eval = |s: f64| evaluate_mean_acc(target, model, s, method);
    let theta = |s: f64| model.scaling().eval(s);
    let (a_lo, se_lo) = eval(lo)?;
    if a_lo == alpha_star {
        return Ok(TargetScale { s_star: lo, theta_star: theta(lo), acc: a_lo, std_error: se_lo, iterations: 0 });
    }
    let (a_hi, _) = eval(hi)?;
    if !(a_lo > alpha_star && alpha_star >= a_hi) {
        return Err(Error::Bracketing { lo, hi });
    }
    let scan: Vec<(f64, f64)> = (0..9)
        .map(|k| eval(lo + (hi - lo) * k as f64 / 8.0))
        .collect::<Result<_>>()?;
    for w in scan.windows(2) {
        if w[1].0 > w[0].0 + STD_ERRORS * (w[0].1 + w[1].1) {
            return Err(Error::Numerical("acc(s) is not monotone on the bracket".into()));
        }
    }
    let mut best = (lo, a_lo, se_lo);
    let mut iterations = 0;
    while iterations < 200 && hi - lo > 1e-12 * hi.abs().max(1.0) {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (a, se) = eval(mid)?;
        if (a - alpha_star).abs() < (best.1 - alpha_star).abs() {
            best = (mid, a, se);
        }
        if a > alpha_star {
            lo = mid;
        } else {
            hi = mid;
        }
        if matches!(method, MeanAccMethod::MonteCarlo { .. }) && (a - alpha_star).abs() <= se.min(TARGET_SCALE_TOLERANCE) {
            break;
        }
    }
    let (s_star, a, se) = best;
    if (a - alpha_star).abs() > TARGET_SCALE_TOLERANCE {
        return Err(Error::Numerical(format!("search stopped at acc = {a}, target {alpha_star}")));
    }
    Ok(TargetScale { s_star, theta_star: theta(s_star), acc: a, std_error: se, iterations })
}

/// `V(x) = c_V π(x)^{−1/2}` with `c_V = sup π^{1/2}`, so `V ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftFunction {
    log_c_v: f64,
}

impl DriftFunction {
    pub fn for_target<T: TargetDensity + ?Sized>(target: &T) -> Self {
        Self { log_c_v: 0.5 * target.max_log_density() }
    }

    /// `log V(x)` from `log π(x)`.
    #[inline]
    pub fn log_value_from(&self, log_pi: f64) -> f64 {
        self.log_c_v - 0.5 * log_pi
    }

    pub fn log_value<T: TargetDensity + ?Sized>(&self, target: &T, x: &[f64]) -> f64 {
        self.log_value_from(target.log_density_unchecked(x))
    }
}

// α(x, y)(V(y)/V(x) − 1), always in [−1, 1/4].
fn drift_kernel(lx: f64, ly: f64) -> f64 {
    let r = (ly - lx).exp();
    if ly >= lx {
        (-0.5 * (ly - lx)).exp() - 1.0
    } else {
        r.sqrt() - r
    }
}

/// How [`estimate_drift`] evaluates `P_s V(x)/V(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DriftMethod {
    Quadrature,
    MonteCarlo { n: u64, seed: u64 },
}

/// `P_s V(x)/V(x) = 1 + ∫ α(x, y)(V(y)/V(x) − 1) q_s(y − x) dy`.
pub fn drift_ratio<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    x: &[f64],
    s: f64,
    method: DriftMethod,
    index: u64,
) -> Result<(f64, f64)> {
    match method {
        DriftMethod::Quadrature => Ok((1.0 + proposal_expectation(target, model, x, s, &drift_kernel)?, 0.0)),
        DriftMethod::MonteCarlo { n, seed } => {
            let mut rng = seeded(derive_seed(seed, index));
            let lx = target.log_density(x)?;
            if lx == f64::NEG_INFINITY {
                return Err(Error::OutsideSupport);
            }
            let mut w = Welford::new();
            let d = x.len();
            let mut y = vec![0.0; d];
            for _ in 0..n {
                let z = model.sample_increment(s, &mut rng);
                for i in 0..d {
                    y[i] = x[i] + z[i];
                }
                let ly = target.log_density_unchecked(&y);
                w.push(if ly == f64::NEG_INFINITY { 0.0 } else { drift_kernel(lx, ly) });
            }
            Ok((1.0 + w.mean(), w.std_error()))
        }
    }
}

/// Drift of `V = c_V π^{−1/2}` under the fixed-scale kernel on a grid of states.
///
/// Fits the radius of the set `C` outside which `P_s V < V`, the contraction
/// `λ_s` outside it, and `b` in both `P_s V ≤ V + b` and `P_s V ≤ λ_s V + b 1_C`.
/// In one dimension the overlap `δ` of the kernels started in `C` is reported.
/// Skipped when `φ(s)` is below `theta_min`.
pub fn estimate_drift<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    s: f64,
    x_grid: &[Vec<f64>],
    method: DriftMethod,
    theta_min: Option<f64>,
) -> Result<BoundReport> {
    if target.support_kind() != SupportKind::SuperExponential {
        return Err(Error::UnsupportedTarget("drift check needs a super-exponential target".into()));
    }
    let theta = model.scaling().eval(s);
    let mut r = BoundReport::new("drift").param("s", s).param("theta", theta);
    r.threshold = Some(1.0);
    if let Some(t1) = theta_min {
        r = r.param("theta_min", t1);
        if theta < t1 {
            r.skipped = true;
            r.pass = true;
            r.notes.push(format!("φ(s) = {theta} below θ₁ = {t1}; outside the drift regime"));
            return Ok(r);
        }
    }
    let v = DriftFunction::for_target(target);
    let center = target.center();
    let mut radii = Vec::with_capacity(x_grid.len());
    let mut log_v = Vec::with_capacity(x_grid.len());
    for (k, x) in x_grid.iter().enumerate() {
        check_dim(model.dim(), x)?;
        let (ratio, se) = drift_ratio(target, model, x, s, method, k as u64)?;
        let lv = v.log_value(target, x);
        if !ratio.is_finite() || !lv.is_finite() {
            return Err(Error::Numerical(format!("non-finite drift at x = {x:?}")));
        }
        if lv < -1e-12 {
            return Err(Error::InvariantViolation { step: 0, what: format!("V(x) < 1 at x = {x:?}") });
        }
        radii.push(x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt());
        log_v.push(lv);
        r.grid.push(radii[k]);
        r.values.push(ratio);
        r.std_errors.push(se);
    }
    // C = {‖x − c‖ < radius}: the smallest radius beyond which every ratio is below one
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let below = |k: usize| r.values[k] + STD_ERRORS * r.std_errors[k] < 1.0;
    let n_tail = order.iter().rev().take_while(|&&k| below(k)).count();
    if n_tail == 0 {
        r.notes.push("no contraction at the largest radius".into());
        r.pass = false;
        return Ok(r);
    }
    let first_out = order[order.len() - n_tail];
    let c_radius = if n_tail == order.len() { 0.0 } else { radii[order[order.len() - n_tail - 1]] };
    let lambda = order[order.len() - n_tail..].iter().map(|&k| r.values[k]).fold(0.0, f64::max);
    let inside: Vec<usize> = order[..order.len() - n_tail].to_vec();
    let b_weak = inside.iter().map(|&k| (r.values[k] - 1.0).max(0.0) * log_v[k].exp()).fold(0.0, f64::max);
    let b_strong = inside.iter().map(|&k| (r.values[k] - lambda).max(0.0) * log_v[k].exp()).fold(0.0, f64::max);
    r.fitted.insert("c_radius".into(), c_radius);
    r.fitted.insert("first_contracting_radius".into(), radii[first_out]);
    r.fitted.insert("lambda".into(), lambda);
    r.fitted.insert("b".into(), b_weak);
    r.fitted.insert("b_geometric".into(), b_strong);
    if model.dim() == 1 && c_radius > 0.0 {
        let delta = minorisation_overlap(target, model, s, center[0] - c_radius, center[0] + c_radius)?;
        r.fitted.insert("delta".into(), delta);
    }
    r.pass = lambda < 1.0 && b_weak.is_finite() && b_strong.is_finite();
    Ok(r)
}

/// `min_{x, x' ∈ [lo, hi]} ∫ min{α(x,y) q_s(y−x), α(x',y) q_s(y−x')} dy` over an
/// 11-point grid of `[lo, hi]`, in one dimension.
pub fn minorisation_overlap<T: TargetDensity + ?Sized>(target: &T, model: &ProposalModel, s: f64, lo: f64, hi: f64) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::UnsupportedDimension(model.dim()));
    }
    let pts: Vec<f64> = (0..=10).map(|k| lo + (hi - lo) * k as f64 / 10.0).collect();
    let theta = model.scaling().eval(s);
    let density = |x: f64, y: f64| -> f64 {
        let lx = target.log_density_unchecked(&[x]);
        let ly = target.log_density_unchecked(&[y]);
        alpha_from_logs(lx, ly) * model.log_density(s, &[y - x]).map(|v| v.exp()).unwrap_or(0.0)
    };
    let mut worst = f64::INFINITY;
    let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-8, max_intervals: 4000 };
    let span = 12.0 * theta + (hi - lo);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (pts[i], pts[j]);
            let mut breaks = vec![lo - span, a, b, hi + span];
            breaks.sort_by(|u, v| u.total_cmp(v));
            breaks.dedup();
            let v = integrate_with_breaks(|y| density(a, y).min(density(b, y)), &breaks, opts)?.value;
            worst = worst.min(v);
        }
    }
    Ok(worst)
}

/// `∫ |q_s − q_{s'}|` by radial quadrature.
pub fn proposal_l1_distance(model: &ProposalModel, s: f64, s2: f64) -> Result<f64> {
    if s == s2 {
        return Ok(0.0);
    }
    let d = model.dim();
    let (t1, t2) = (model.scaling().eval(s), model.scaling().eval(s2));
    let c = model.ln_profile_norm().exp() * unit_sphere_area(d);
    let prof = model.profile();
    let ln_f = |t: f64, r: f64| -(d as f64) * t.ln() + prof.ln_value(r / t, d);
    let f = |r: f64| {
        let rad = if d == 1 { 1.0 } else { r.powi(d as i32 - 1) };
        c * rad * (ln_f(t1, r).exp() - ln_f(t2, r).exp()).abs()
    };
    // the two radial densities cross once; locate it to give the integrator a breakpoint
    let g = |r: f64| ln_f(t1, r) - ln_f(t2, r);
    let (mut lo, mut hi) = (1e-12, t1.max(t2));
    while g(lo).signum() == g(hi).signum() && hi < 1e6 {
        hi *= 2.0;
    }
    let mut breaks = vec![t1.min(t2), t1.max(t2)];
    if g(lo).signum() != g(hi).signum() {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == g(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        breaks.push(0.5 * (lo + hi));
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 4000 };
    Ok(integrate_semi_infinite(f, 0.0, &breaks, opts)?.value)
}

/// Total-variation Lipschitz behavior of the proposal in its scale matrix.
///
/// For each pair, `TV/‖Δ‖` is compared with the same ratio at half the
/// separation; the check passes when every pair is stable within `20%`, the
/// diagonal pair `s = s` gives exactly zero, and the fitted
/// `c₁ = max TV/(‖Δ‖ max{‖s‖, ‖s'‖}^{d+1})` is finite.
pub fn proposal_tv_lipschitz(model: &ProposalModel, s_pairs: &[(f64, f64)]) -> Result<BoundReport> {
    let d = model.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let mut r = BoundReport::new("tv_lipschitz").param("dim", d as f64);
    r.threshold = Some(0.2);
    let fro = model.shape().frobenius_norm();
    let norm_of = |s: f64| model.scaling().eval(s) * fro;
    let mut c1: f64 = 0.0;
    let mut stable = true;
    let zero = proposal_l1_distance(model, 0.0, 0.0)?;
    for &(s, s2) in s_pairs {
        let delta = (norm_of(s) - norm_of(s2)).abs();
        if delta == 0.0 {
            continue;
        }
        let tv = proposal_l1_distance(model, s, s2)?;
        let ratio = tv / delta;
        let half = model.scaling().inverse(0.5 * (model.scaling().eval(s) + model.scaling().eval(s2)));
        let ratio_half = proposal_l1_distance(model, s, half)? / (norm_of(s) - norm_of(half)).abs();
        let drift = (ratio_half / ratio - 1.0).abs();
        stable &= drift <= 0.2;
        c1 = c1.max(ratio / norm_of(s).max(norm_of(s2)).powi(d as i32 + 1));
        r.grid.push(delta);
        r.values.push(ratio);
        r.std_errors.push(drift);
    }
    r.notes.push("std_errors carry |ratio(Δ/2)/ratio(Δ) − 1|".into());
    r.fitted.insert("c1".into(), c1);
    r.fitted.insert("tv_at_zero".into(), zero);
    r.pass = stable && zero == 0.0 && c1.is_finite();
    Ok(r)
}

/// Per-functional outcome of [`slln_report`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SllnEntry {
    pub name: String,
    pub mean: f64,
    pub std_error: f64,
    pub truth: f64,
    pub z: f64,
    pub pass: bool,
    pub growth_warning: bool,
}

/// Compares ergodic averages with their true values: pass iff `|z| ≤ z_max`.
///
/// A zero standard error (a constant functional) passes only on exact agreement.
pub fn slln_report(averages: &[FunctionalAverage], truths: &[f64], z_max: f64) -> Result<Vec<SllnEntry>> {
    if averages.len() != truths.len() {
        return Err(Error::InvalidArgument("one truth per functional".into()));
    }
    Ok(averages
        .iter()
        .zip(truths)
        .map(|(a, &truth)| {
            let z = if a.std_error > 0.0 {
                (a.mean - truth) / a.std_error
            } else if a.mean == truth {
                0.0
            } else {
                f64::INFINITY
            };
            SllnEntry {
                name: a.name.clone(),
                mean: a.mean,
                std_error: a.std_error,
                truth,
                z,
                pass: z.abs() <= z_max,
                growth_warning: a.growth_violations > 0,
            }
        })
        .collect())
}

/// Per-seed line of [`stability_report`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedStability {
    pub s_min: f64,
    pub s_max: f64,
    pub range_last_half: f64,
    /// Trend p-value under the inflation pooled over all runs.
    pub trend_p_value: f64,
    /// Trend p-value under this run's own inflation estimate.
    pub trend_p_value_single: f64,
    pub max_theta_growth: f64,
    pub theta_min: f64,
    pub second_half_jump: f64,
}

/// Aggregate of [`stability_report`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityReport {
    pub seeds: Vec<SeedStability>,
    pub band: f64,
    pub level: f64,
    /// Mean serial-correlation inflation of the trend variance over the runs.
    pub pooled_inflation: f64,
    pub within_band: usize,
    pub without_trend: usize,
    pub required_without_trend: usize,
    pub within_restriction: Option<bool>,
    pub pass: bool,
}

/// Ranges, trend tests and growth ratios over independent runs.
///
/// Passes iff every last-half range is at most `band`, at least
/// `required_without_trend` runs show no trend at `level`, and, when
/// `restriction` is given, every run stayed inside it.
///
/// The runs share one dynamics, so the trend tests use the mean of their
/// serial-correlation inflations: a single 50-block series estimates its own
/// correlation too noisily to hold the level.
pub fn stability_report(
    summaries: &[ChainSummary],
    band: f64,
    level: f64,
    required_without_trend: usize,
    restriction: Option<(f64, f64)>,
) -> Result<StabilityReport> {
    if summaries.len() < 8 {
        return Err(Error::InvalidArgument("stability report needs at least 8 runs".into()));
    }
    let trends: Vec<&MannKendall> = summaries.iter().filter_map(|s| s.trend.as_ref()).collect();
    let pooled_inflation = if trends.is_empty() {
        1.0
    } else {
        trends.iter().map(|t| t.inflation).sum::<f64>() / trends.len() as f64
    };
    let seeds: Vec<SeedStability> = summaries
        .iter()
        .map(|s| SeedStability {
            s_min: s.s_min,
            s_max: s.s_max,
            range_last_half: s.s_range_last_half(),
            trend_p_value: s.trend.map(|t| t.p_value_with_inflation(pooled_inflation)).unwrap_or(1.0),
            trend_p_value_single: s.trend.map(|t| t.p_value).unwrap_or(1.0),
            max_theta_growth: s.max_theta_growth,
            theta_min: s.theta_min,
            second_half_jump: s.theta_max_second_half / s.theta_max_first_half,
        })
        .collect();
    let within_band = seeds.iter().filter(|s| s.range_last_half <= band).count();
    let without_trend = seeds.iter().filter(|s| s.trend_p_value >= level).count();
    let within_restriction = restriction.map(|(a, b)| seeds.iter().all(|s| a <= s.s_min && s.s_max <= b));
    let pass = within_band == seeds.len() && without_trend >= required_without_trend && within_restriction.unwrap_or(true);
    Ok(StabilityReport { seeds, band, level, pooled_inflation, within_band, without_trend, required_without_trend, within_restriction, pass })
}

/// Growth summary over independent runs on an unbounded target.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthReport {
    pub beta: f64,
    pub min_theta: f64,
    pub max_growth: f64,
    pub max_second_half_jump: f64,
    pub theta_floor: f64,
    pub growth_cap: f64,
    pub pass: bool,
}

/// Passes iff `min φ(S_n) ≥ theta_floor`, `max φ(S_n)/n^β ≤ growth_cap` and no
/// run's second-half maximum of `φ(S_n)` exceeds ten times its first-half maximum.
pub fn growth_report(summaries: &[ChainSummary], theta_floor: f64, growth_cap: f64) -> Result<GrowthReport> {
    if summaries.is_empty() {
        return Err(Error::InvalidArgument("no runs".into()));
    }
    let min_theta = summaries.iter().map(|s| s.theta_min).fold(f64::INFINITY, f64::min);
    let max_growth = summaries.iter().map(|s| s.max_theta_growth).fold(0.0, f64::max);
    let jump = summaries.iter().map(|s| s.theta_max_second_half / s.theta_max_first_half).fold(0.0, f64::max);
    Ok(GrowthReport {
        beta: summaries[0].beta,
        min_theta,
        max_growth,
        max_second_half_jump: jump,
        theta_floor,
        growth_cap,
        pass: min_theta >= theta_floor && max_growth <= growth_cap && jump <= 10.0,
    })
}

/// Quadrature against Monte Carlo at the given `(x, s)` points: the values are
/// the z-scores, and the check passes iff all are within `STD_ERRORS`.
pub fn oracle_coherence<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    points: &[(Vec<f64>, f64)],
    n_mc: u64,
    seed: u64,
) -> Result<BoundReport> {
    let mut r = BoundReport::new("oracle_coherence").param("n_mc", n_mc as f64);
    r.threshold = Some(STD_ERRORS);
    for (k, (x, s)) in points.iter().enumerate() {
        let q = expected_acc_quadrature(target, model, x, *s)?;
        let q2 = proposal_expectation(target, model, x, *s, &|lx, ly| alpha_from_logs(lx, ly).powi(2))?;
        let (m, _) = evaluate_acc(target, model, x, *s, AccMethod::MonteCarlo { n: n_mc, seed }, k as u64)?;
        // standardised by the oracle's own variance, so an all-accept sample near q = 1 stays finite
        let se = ((q2 - q * q).max(0.0) / n_mc as f64).sqrt();
        let z = if se > 0.0 {
            (m - q) / se
        } else if (m - q).abs() < 1e-9 {
            0.0
        } else {
            f64::INFINITY
        };
        r.grid.push(*s);
        r.values.push(z);
        r.std_errors.push(se);
    }
    r.pass = r.values.iter().all(|z| z.abs() <= STD_ERRORS);
    Ok(r)
}
