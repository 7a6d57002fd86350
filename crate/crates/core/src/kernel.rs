//! The fixed-scale symmetric Metropolis kernel.
//!
//! Every step consumes randomness in the same order regardless of the state:
//! first the increment noise, then the uniform `U ∈ (0, 1]`. The noise is drawn
//! by [`StepNoise::draw`] and only afterwards combined with `(x, s)`, so two
//! chains fed from copies of one stream stay aligned step for step.

use alloc::vec;
use alloc::vec::Vec;
use rand::distr::OpenClosed01;
use rand::Rng;

use crate::proposal::ProposalModel;
use crate::quad::{integrate_semi_infinite, integrate_with_breaks, QuadOptions};
use crate::stats::Welford;
use crate::target::{check_dim, TargetDensity};
use crate::{Error, Result};

/// Result of one Metropolis step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub proposal: Vec<f64>,
    pub alpha: f64,
    pub accepted: bool,
    pub next_x: Vec<f64>,
}

/// `min{1, exp(log π(y) − log π(x))}` from the two log-densities.
#[inline]
pub fn alpha_from_logs(log_pi_x: f64, log_pi_y: f64) -> f64 {
    if log_pi_y == f64::NEG_INFINITY {
        return 0.0;
    }
    (log_pi_y - log_pi_x).min(0.0).exp()
}

/// `α(x, y) = min{1, π(y)/π(x)}`.
pub fn acceptance_prob<T: TargetDensity + ?Sized>(target: &T, x: &[f64], y: &[f64]) -> Result<f64> {
    let lx = target.log_density(x)?;
    if lx == f64::NEG_INFINITY {
        return Err(Error::OutsideSupport);
    }
    let ly = target.log_density(y)?;
    Ok(alpha_from_logs(lx, ly))
}

/// The randomness of one step: standardized increment noise and the uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    pub w: Vec<f64>,
    pub u: f64,
}

impl StepNoise {
    pub fn new(d: usize) -> Self {
        Self { w: vec![0.0; d], u: 1.0 }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&mut self, model: &ProposalModel, rng: &mut R) {
        model.sample_noise(rng, &mut self.w);
        self.u = rng.sample(OpenClosed01);
    }
}

/// A Metropolis chain state with its cached log-density and scratch space.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisChain {
    x: Vec<f64>,
    log_pi_x: f64,
    z: Vec<f64>,
    y: Vec<f64>,
}

impl MetropolisChain {
    pub fn new<T: TargetDensity + ?Sized>(target: &T, x: Vec<f64>) -> Result<Self> {
        let log_pi_x = target.log_density(&x)?;
        if log_pi_x == f64::NEG_INFINITY {
            return Err(Error::OutsideSupport);
        }
        let d = x.len();
        Ok(Self { x, log_pi_x, z: vec![0.0; d], y: vec![0.0; d] })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn log_pi_x(&self) -> f64 {
        self.log_pi_x
    }

    /// The last proposal.
    pub fn proposal(&self) -> &[f64] {
        &self.y
    }

    /// Applies a step with pre-drawn noise; returns `(α, accepted)`.
    #[inline]
    pub fn step_with_noise<T: TargetDensity + ?Sized>(
        &mut self,
        target: &T,
        model: &ProposalModel,
        s: f64,
        noise: &StepNoise,
    ) -> (f64, bool) {
        model.scale_noise(s, &noise.w, &mut self.z);
        for i in 0..self.x.len() {
            self.y[i] = self.x[i] + self.z[i];
        }
        let log_pi_y = target.log_density_unchecked(&self.y);
        let alpha = alpha_from_logs(self.log_pi_x, log_pi_y);
        let accepted = noise.u <= alpha;
        if accepted {
            self.x.copy_from_slice(&self.y);
            self.log_pi_x = log_pi_y;
        }
        (alpha, accepted)
    }
}

/// One step `x → x'` at scale parameter `s`.
pub fn metropolis_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    s: f64,
    x: &[f64],
    rng: &mut R,
) -> Result<StepOutcome> {
    check_dim(model.dim(), x)?;
    let mut chain = MetropolisChain::new(target, x.to_vec())?;
    let mut noise = StepNoise::new(x.len());
    noise.draw(model, rng);
    let (alpha, accepted) = chain.step_with_noise(target, model, s, &noise);
    Ok(StepOutcome { proposal: chain.y.clone(), alpha, accepted, next_x: chain.x })
}

/// Summary of a fixed-scale run.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedScaleRun {
    pub steps: u64,
    pub mean_alpha: f64,
    pub acceptance_rate: f64,
    pub final_x: Vec<f64>,
}

/// Runs `n` steps at fixed `s`, calling `visit` with every post-step state.
pub fn run_fixed_scale<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    s: f64,
    x0: Vec<f64>,
    n: u64,
    rng: &mut R,
    mut visit: impl FnMut(&[f64]),
) -> Result<FixedScaleRun> {
    check_dim(model.dim(), &x0)?;
    let mut chain = MetropolisChain::new(target, x0)?;
    let mut noise = StepNoise::new(model.dim());
    let mut alpha_sum = 0.0;
    let mut accepted = 0u64;
    for _ in 0..n {
        noise.draw(model, rng);
        let (a, acc) = chain.step_with_noise(target, model, s, &noise);
        alpha_sum += a;
        accepted += acc as u64;
        visit(chain.x());
    }
    Ok(FixedScaleRun {
        steps: n,
        mean_alpha: alpha_sum / n.max(1) as f64,
        acceptance_rate: accepted as f64 / n.max(1) as f64,
        final_x: chain.x,
    })
}

/// Monte Carlo estimate of `acc(x, s) = ∫ α(x, x + z) q_s(z) dz` with its standard error.
pub fn expected_acc_at<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    x: &[f64],
    s: f64,
    n_mc: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be positive".into()));
    }
    check_dim(model.dim(), x)?;
    let lx = target.log_density_unchecked(x);
    if lx == f64::NEG_INFINITY {
        return Err(Error::OutsideSupport);
    }
    let d = x.len();
    let mut w = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut acc = Welford::new();
    for _ in 0..n_mc {
        model.sample_noise(rng, &mut w);
        model.scale_noise(s, &w, &mut z);
        for i in 0..d {
            y[i] = x[i] + z[i];
        }
        acc.push(alpha_from_logs(lx, target.log_density_unchecked(&y)));
    }
    Ok((acc.mean(), acc.std_error()))
}

/// Radial cutoff for the Gaussian profile; `e^{-r²/2}` is below 1e-300 past it.
const GAUSSIAN_RADIAL_CUTOFF: f64 = 38.0;

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 4000 }
}

// ∫_0^∞ k(x, x + φ(s) Σ r u) c q̂(r) r^{d−1} dr along the direction u, where
// k is given through the two log-densities and vanishes outside the support.
#[allow(clippy::too_many_arguments)]
fn ray_integral<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    x: &[f64],
    lx: f64,
    s: f64,
    u: &[f64],
    compact: bool,
    kern: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    let d = x.len();
    let profile = model.profile();
    let norm = model.ln_profile_norm().exp();
    let mut v = vec![0.0; d];
    model.scale_noise(s, u, &mut v);
    let exit = target.ray_exit(x, &v);
    let stop = match (exit, compact) {
        (Some(t), _) => Some(t),
        (None, true) => return Ok(0.0),
        (None, false) => None,
    };
    let mut y = vec![0.0; d];
    let mut f = |r: f64| {
        for i in 0..d {
            y[i] = x[i] + r * v[i];
        }
        let ly = target.log_density_unchecked(&y);
        if ly == f64::NEG_INFINITY {
            return 0.0;
        }
        let a = kern(lx, ly);
        let rad = if d == 1 { 1.0 } else { r.powi(d as i32 - 1) };
        a * norm * profile.value(r, d) * rad
    };
    let mut breaks: Vec<f64> = vec![0.0];
    // the level set π(y) = π(x) crosses the ray at the reflection of x
    if target.is_point_symmetric() {
        let c = target.center();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let pv: f64 = (0..d).map(|i| (c[i] - x[i]) * v[i]).sum();
        let r = 2.0 * pv / vv;
        if r > 0.0 && r.is_finite() {
            breaks.push(r);
        }
    }
    let gaussian = matches!(profile, crate::proposal::RadialProfile::Gaussian);
    match stop {
        Some(t) => {
            let end = if gaussian { t.min(GAUSSIAN_RADIAL_CUTOFF) } else { t };
            if end <= 0.0 {
                return Ok(0.0);
            }
            breaks.retain(|&b| b < end);
            for b in [1.0, 3.0, 6.0] {
                if b < end && !breaks.contains(&b) {
                    breaks.push(b);
                }
            }
            breaks.sort_by(|a, b| a.total_cmp(b));
            breaks.dedup();
            breaks.push(end);
            Ok(integrate_with_breaks(&mut f, &breaks, quad_opts())?.value)
        }
        None if gaussian => {
            breaks.retain(|&b| b < GAUSSIAN_RADIAL_CUTOFF);
            for b in [1.0, 3.0, 6.0] {
                if !breaks.contains(&b) {
                    breaks.push(b);
                }
            }
            breaks.sort_by(|a, b| a.total_cmp(b));
            breaks.dedup();
            breaks.push(GAUSSIAN_RADIAL_CUTOFF);
            Ok(integrate_with_breaks(&mut f, &breaks, quad_opts())?.value)
        }
        None => {
            breaks.retain(|&b| b > 0.0);
            breaks.push(1.0);
            breaks.sort_by(|a, b| a.total_cmp(b));
            breaks.dedup();
            Ok(integrate_semi_infinite(&mut f, 0.0, &breaks, quad_opts())?.value)
        }
    }
}

/// Deterministic `acc(x, s)` by adaptive Gauss–Kronrod quadrature, for `d ≤ 2`.
///
/// The integral is taken in the standardized noise variable in polar form:
/// two rays for `d = 1`, an adaptive angular integral of ray integrals for `d = 2`.
pub fn expected_acc_quadrature<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    x: &[f64],
    s: f64,
) -> Result<f64> {
    proposal_expectation(target, model, x, s, &alpha_from_logs)
}

/// `∫ k(log π(x), log π(x + z)) q_s(z) dz` over `x + z` in the support, by
/// quadrature, for `d ≤ 2`.
pub fn proposal_expectation<T: TargetDensity + ?Sized>(
    target: &T,
    model: &ProposalModel,
    x: &[f64],
    s: f64,
    kern: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    check_dim(model.dim(), x)?;
    let d = x.len();
    let lx = target.log_density_unchecked(x);
    if lx == f64::NEG_INFINITY {
        return Err(Error::OutsideSupport);
    }
    let compact = target.diameter().is_some();
    match d {
        1 => Ok(ray_integral(target, model, x, lx, s, &[1.0], compact, kern)?
            + ray_integral(target, model, x, lx, s, &[-1.0], compact, kern)?),
        2 => {
            let mut err = None;
            let mut g = |a: f64| match ray_integral(target, model, x, lx, s, &[a.cos(), a.sin()], compact, kern) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            };
            let pi = core::f64::consts::PI;
            let breaks: Vec<f64> = (0..=8).map(|k| k as f64 * pi / 4.0).collect();
            let opts = QuadOptions { abs_tol: 1e-9, rel_tol: 1e-9, max_intervals: 2000 };
            let v = integrate_with_breaks(&mut g, &breaks, opts)?.value;
            match err {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// How `mean_acc` draws states from π.
#[derive(Debug, Clone, PartialEq)]
pub enum PiSampler {
    /// The target's exact sampler.
    Direct,
    /// A fixed-scale chain at `s`, burned in and thinned.
    PilotChain { s: f64, x0: Vec<f64>, burn_in: u64, thin: u64 },
}

/// Nested Monte Carlo estimate of `acc(s) = ∫ acc(x, s) π(dx)` with its standard error.
pub fn mean_acc<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    s: f64,
    n_outer: u64,
    n_inner: u64,
    sampler: &PiSampler,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_outer == 0 || n_inner == 0 {
        return Err(Error::InvalidArgument("sample sizes must be positive".into()));
    }
    let d = model.dim();
    let mut outer = Welford::new();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n_outer as usize);
    match sampler {
        PiSampler::Direct => {
            let mut buf = vec![0.0; d];
            for _ in 0..n_outer {
                let mut r = &mut *rng;
                if !target.sample(&mut r, &mut buf) {
                    return Err(Error::Configuration("target has no direct sampler; use a pilot chain".into()));
                }
                xs.push(buf.clone());
            }
        }
        PiSampler::PilotChain { s: sp, x0, burn_in, thin } => {
            let thin = (*thin).max(1);
            let mut k = 0u64;
            run_fixed_scale(target, model, *sp, x0.clone(), burn_in + n_outer * thin, rng, |x| {
                k += 1;
                if k > *burn_in && (k - burn_in) % thin == 0 {
                    xs.push(x.to_vec());
                }
            })?;
        }
    }
    for x in &xs {
        let (m, _) = expected_acc_at(target, model, x, s, n_inner, rng)?;
        outer.push(m);
    }
    // the variance of the per-x means already contains the inner noise
    Ok((outer.mean(), outer.std_error()))
}

/// `acc(s)` by nested quadrature, for `d = 1`.
pub fn mean_acc_quadrature<T: TargetDensity + ?Sized>(target: &T, model: &ProposalModel, s: f64) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::UnsupportedDimension(model.dim()));
    }
    let (lo, hi) = target.bounding_box();
    let (a, b) = (lo[0], hi[0]);
    let mut err = None;
    let opts = QuadOptions { abs_tol: 1e-9, rel_tol: 1e-9, max_intervals: 2000 };
    let mut mass = |x: f64| target.log_density_unchecked(&[x]).exp();
    let m = integrate_with_breaks(&mut mass, &[a, 0.5 * (a + b), b], opts)?.value;
    let mut f = |x: f64| {
        let p = target.log_density_unchecked(&[x]).exp();
        if p == 0.0 {
            return 0.0;
        }
        match expected_acc_quadrature(target, model, &[x], s) {
            Ok(v) => v * p,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let c = target.center()[0];
    let mut breaks = vec![a, b];
    if c > a && c < b {
        breaks.insert(1, c);
    }
    let v = integrate_with_breaks(&mut f, &breaks, opts)?.value;
    match err {
        Some(e) => Err(e),
        None => Ok(v / m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposal::{RadialProfile, ScalingFunction, ShapeMatrix};
    use crate::rng::seeded;
    use crate::special::normal_cdf;
    use crate::target::{BuiltinTarget, ExponentialPower, Gaussian, SmoothBump, UniformBall, UniformBox};
    use rand::RngCore;

    fn unit_interval() -> UniformBox {
        UniformBox::unit_interval()
    }

    #[test]
    fn acceptance_prob_examples() {
        let g = Gaussian::standard(1);
        assert_eq!(acceptance_prob(&g, &[0.3], &[0.3]).unwrap(), 1.0);
        assert!((acceptance_prob(&g, &[0.0], &[1.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        let b = UniformBall::new(vec![0.0], 1.0).unwrap();
        assert_eq!(acceptance_prob(&b, &[0.0], &[2.0]).unwrap(), 0.0);
        assert!(matches!(acceptance_prob(&b, &[2.0], &[0.0]), Err(Error::OutsideSupport)));
    }

    #[test]
    fn step_outcome_is_consistent() {
        let g = Gaussian::standard(2);
        let m = ProposalModel::gaussian(2);
        let mut rng = seeded(5);
        let mut x = vec![0.5, -0.2];
        for _ in 0..1000 {
            let o = metropolis_step(&g, &m, 0.7, &x, &mut rng).unwrap();
            let a = acceptance_prob(&g, &x, &o.proposal).unwrap();
            assert_eq!(a, o.alpha);
            if o.accepted {
                assert_eq!(o.next_x, o.proposal);
            } else {
                assert_eq!(o.next_x, x);
            }
            if o.alpha == 1.0 {
                assert!(o.accepted);
            }
            x = o.next_x;
        }
    }

    #[test]
    fn outside_proposals_are_rejected() {
        let b = UniformBall::new(vec![0.0], 1.0).unwrap();
        let m = ProposalModel::gaussian(1);
        let mut rng = seeded(2);
        for _ in 0..200 {
            let o = metropolis_step(&b, &m, 3.0, &[0.9], &mut rng).unwrap();
            if o.proposal[0].abs() > 1.0 {
                assert_eq!(o.alpha, 0.0);
                assert!(!o.accepted);
                assert_eq!(o.next_x, vec![0.9]);
            }
        }
    }

    #[test]
    fn two_draws_per_step_at_a_state_independent_position() {
        let g = Gaussian::standard(1);
        let m = ProposalModel::gaussian(1);
        let mut r1 = seeded(8);
        let mut r2 = seeded(8);
        metropolis_step(&g, &m, 0.0, &[0.0], &mut r1).unwrap();
        metropolis_step(&g, &m, 3.0, &[5.0], &mut r2).unwrap();
        assert_eq!(r1.get_word_pos(), r2.get_word_pos());
        // one normal and one uniform, replayed by hand
        let mut r3 = seeded(8);
        let _: f64 = r3.sample(rand_distr::StandardNormal);
        let _: f64 = r3.sample(OpenClosed01);
        assert_eq!(r1.get_word_pos(), r3.get_word_pos());
        assert_eq!(r1.next_u64(), r3.next_u64());
    }

    #[test]
    fn detailed_balance_identity() {
        let targets: Vec<BuiltinTarget> = vec![
            BuiltinTarget::Gaussian(Gaussian::from_covariance(vec![0.5, -1.0], &[2.0, 0.6, 0.6, 1.0]).unwrap()),
            BuiltinTarget::ExponentialPower(ExponentialPower::new(2, 4.0, 1.5).unwrap()),
            BuiltinTarget::SmoothBump(SmoothBump::new(vec![0.0, 0.0], 2.0, 0.1).unwrap()),
        ];
        let m = ProposalModel::new(
            RadialProfile::Student { gamma: 1.0 },
            ShapeMatrix::dense(vec![1.0, 0.3, 0.3, 0.8], 2).unwrap(),
            ScalingFunction::Exponential,
        )
        .unwrap();
        let mut rng = seeded(77);
        for t in &targets {
            for _ in 0..1000 {
                let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let s = rng.random::<f64>() * 2.0 - 1.0;
                let zxy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let zyx: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                let lhs = t.log_density(&x).unwrap() + acceptance_prob(t, &x, &y).unwrap().ln() + m.log_density(s, &zxy).unwrap();
                let rhs = t.log_density(&y).unwrap() + acceptance_prob(t, &y, &x).unwrap().ln() + m.log_density(s, &zyx).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn quadrature_unit_interval_closed_form() {
        let t = unit_interval();
        let m = ProposalModel::gaussian(1);
        let v = expected_acc_quadrature(&t, &m, &[0.5], 0.5f64.ln()).unwrap();
        assert!((v - 0.6826894921370859).abs() < 1e-8, "{v}");
        let v = expected_acc_quadrature(&t, &m, &[0.5], 5f64.ln()).unwrap();
        assert!((v - (2.0 * normal_cdf(0.1) - 1.0)).abs() < 1e-8, "{v}");
        let x = 0.01;
        let th: f64 = 1e-3;
        let v = expected_acc_quadrature(&t, &m, &[x], th.ln()).unwrap();
        let exact = normal_cdf((1.0 - x) / th) - normal_cdf(-x / th);
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn quadrature_gaussian_pointwise_closed_form() {
        // 1-d N(0,1) at x with proposal θ: α = 1 on |y| ≤ |x|, else e^{(x²−y²)/2}
        let g = Gaussian::standard(1);
        let m = ProposalModel::gaussian(1);
        for &(x, th) in &[(0.0, 1.0), (1.3, 2.4), (-2.0, 0.5)] {
            let v = expected_acc_quadrature(&g, &m, &[x], f64::ln(th)).unwrap();
            // closed form: P(|x+θW| ≤ |x|) + ∫_{|y|>|x|} e^{(x²−y²)/2} φ((y−x)/θ)/θ dy
            let ax = f64::abs(x);
            let inner = normal_cdf((ax - x) / th) - normal_cdf((-ax - x) / th);
            let s2 = 1.0 / (1.0 + 1.0 / (th * th));
            let mu = x / (th * th) * s2;
            let k = f64::exp(x * x / 2.0 - x * x / (2.0 * th * th) + mu * mu / (2.0 * s2)) * f64::sqrt(s2) / th;
            let tails = k * (1.0 - normal_cdf((ax - mu) / s2.sqrt()) + normal_cdf((-ax - mu) / s2.sqrt()));
            let exact = inner + tails;
            assert!((v - exact).abs() < 1e-8, "x={x} θ={th}: {v} vs {exact}");
        }
    }

    #[test]
    fn mean_acc_gaussian_matches_arctan_formula() {
        let g = Gaussian::standard(1);
        let m = ProposalModel::gaussian(1);
        for th in [1.0, 2.4, 5.0] {
            let v = mean_acc_quadrature(&g, &m, f64::ln(th)).unwrap();
            let exact = 2.0 / core::f64::consts::PI * f64::atan(2.0 / th);
            assert!((v - exact).abs() < 1e-7, "θ={th}: {v} vs {exact}");
        }
    }

    #[test]
    fn mean_acc_mc_agrees_with_quadrature() {
        let g = Gaussian::standard(1);
        let m = ProposalModel::gaussian(1);
        let mut rng = seeded(21);
        let s = 2.4f64.ln();
        let (est, se) = mean_acc(&g, &m, s, 4000, 25, &PiSampler::Direct, &mut rng).unwrap();
        assert!((est - 0.44228412).abs() < 4.0 * se, "{est} ± {se}");
        let (est, se) = mean_acc(
            &g,
            &m,
            s,
            2000,
            25,
            &PiSampler::PilotChain { s, x0: vec![0.0], burn_in: 1000, thin: 20 },
            &mut rng,
        )
        .unwrap();
        assert!((est - 0.44228412).abs() < 5.0 * se, "{est} ± {se}");
    }

    #[test]
    fn mean_acc_requires_a_sampler() {
        struct NoSampler;
        impl TargetDensity for NoSampler {
            fn dim(&self) -> usize {
                1
            }
            fn log_density_unchecked(&self, x: &[f64]) -> f64 {
                -x[0] * x[0]
            }
            fn support_kind(&self) -> crate::target::SupportKind {
                crate::target::SupportKind::SuperExponential
            }
            fn has_uniformly_continuous_normals(&self) -> bool {
                true
            }
            fn max_log_density(&self) -> f64 {
                0.0
            }
            fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
                (vec![-10.0], vec![10.0])
            }
            fn center(&self) -> Vec<f64> {
                vec![0.0]
            }
        }
        let m = ProposalModel::gaussian(1);
        let r = mean_acc(&NoSampler, &m, 0.0, 10, 10, &PiSampler::Direct, &mut seeded(1));
        assert!(matches!(r, Err(Error::Configuration(_))));
    }

    #[test]
    fn quadrature_small_scale_limits() {
        let m = ProposalModel::gaussian(2);
        let g = Gaussian::standard(2);
        let v = expected_acc_quadrature(&g, &m, &[0.0, 0.0], f64::ln(1e-4)).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        let b = UniformBall::new(vec![0.0, 0.0], 1.0).unwrap();
        let v = expected_acc_quadrature(&b, &m, &[1.0, 0.0], f64::ln(1e-3)).unwrap();
        assert!((v - 0.5).abs() < 2e-3, "{v}");
        assert!(matches!(
            expected_acc_quadrature(&Gaussian::standard(3), &ProposalModel::gaussian(3), &[0.0; 3], 0.0),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn fixed_scale_lln_on_gaussian() {
        let g = Gaussian::standard(1);
        let m = ProposalModel::gaussian(1);
        let mut rng = seeded(42);
        let n = 1_000_000;
        let mut bm = crate::stats::BatchMeans::for_length(n);
        run_fixed_scale(&g, &m, 2.4f64.ln(), vec![0.0], n, &mut rng, |x| bm.push(x[0] * x[0])).unwrap();
        assert!((bm.mean() - 1.0).abs() < 4.0 * bm.std_error(), "{} ± {}", bm.mean(), bm.std_error());
    }

    #[test]
    fn fixed_scale_uniform_ball_matches_quadrature() {
        let b = UniformBall::new(vec![0.0], 1.0).unwrap();
        let m = ProposalModel::gaussian(1);
        let s = 2f64.ln();
        let exact = mean_acc_quadrature(&b, &m, s).unwrap();
        let mut rng = seeded(3);
        let n = 1_000_000;
        let mut bm = crate::stats::BatchMeans::for_length(n);
        let mut prev = 0.0;
        let mut first = true;
        run_fixed_scale(&b, &m, s, vec![0.0], n, &mut rng, |x| {
            if !first {
                bm.push((x[0] != prev) as u8 as f64);
            }
            first = false;
            prev = x[0];
        })
        .unwrap();
        assert!((bm.mean() - exact).abs() < 3.0 * bm.std_error(), "{} ± {} vs {exact}", bm.mean(), bm.std_error());
    }
}
