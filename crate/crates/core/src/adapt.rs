//! The adaptive scaling recursion.
//!
//! A step from `(x_n, s_n)` draws `Y = x_n + φ(s_n) Σ W`, accepts it with
//! probability `α = min{1, π(Y)/π(x_n)}`, then moves the parameter by
//! `η_{n+1}(α − α*)`. Chains are indexed from `n = 1`, so the first update uses
//! `η_2`. The truncated variant discards an update that would leave the
//! restriction set instead of clamping it.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::kernel::{MetropolisChain, StepNoise, StepOutcome};
use crate::linalg;
use crate::proposal::{ProposalModel, ScalingFunction, ShapeMatrix};
use crate::special::zeta;
use crate::stats::{mann_kendall, BatchMeans, MannKendall, Welford};
use crate::target::{check_dim, Functional, TargetDensity};
use crate::{Error, Result};

/// Gains `η_n = c n^{−γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepSchedule {
    c: f64,
    gamma: f64,
    within_theorem: bool,
}

impl StepSchedule {
    /// `c > 0`, `γ ∈ (1/2, 1]`.
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument("step constant c must be positive".into()));
        }
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma = {gamma} outside (1/2, 1]")));
        }
        Ok(Self { c, gamma, within_theorem: true })
    }

    /// Any square-summable polynomial schedule, `γ > 1/2`. Schedules with
    /// `γ > 1` are not divergent and fall outside the convergence statements.
    pub fn square_summable(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument("step constant c must be positive".into()));
        }
        if !(gamma > 0.5 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma = {gamma} is not square-summable")));
        }
        Ok(Self { c, gamma, within_theorem: gamma <= 1.0 })
    }

    #[inline]
    pub fn eta(&self, n: u64) -> f64 {
        self.c * (n as f64).powf(-self.gamma)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn within_theorem(&self) -> bool {
        self.within_theorem
    }

    /// `c² ζ(2γ) ≥ Σ_{n≥1} η_n²`.
    pub fn square_sum_bound(&self) -> f64 {
        self.c * self.c * zeta(2.0 * self.gamma)
    }

    /// `c ∫_2^{N+1} x^{−γ} dx ≤ Σ_{n=2}^{N} η_n`.
    pub fn sum_lower_bound(&self, n_max: u64) -> f64 {
        let hi = (n_max + 1) as f64;
        if self.gamma == 1.0 {
            self.c * (hi.ln() - 2f64.ln())
        } else {
            let e = 1.0 - self.gamma;
            self.c * (hi.powf(e) - 2f64.powf(e)) / e
        }
    }
}

/// Configuration of an adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    pub alpha_star: f64,
    pub schedule: StepSchedule,
    pub x0: Vec<f64>,
    pub s0: f64,
    pub n_steps: u64,
    /// Adapt on the accept indicator instead of `α`.
    pub binary_adaptation: bool,
}

impl AdaptConfig {
    pub fn new(alpha_star: f64, schedule: StepSchedule, x0: Vec<f64>, s0: f64, n_steps: u64) -> Result<Self> {
        if !(alpha_star > 0.0 && alpha_star < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha_star = {alpha_star} outside (0, 1)")));
        }
        if !s0.is_finite() {
            return Err(Error::InvalidArgument("initial s must be finite".into()));
        }
        Ok(Self { alpha_star, schedule, x0, s0, n_steps, binary_adaptation: false })
    }

    /// Whether `α*` lies in the range `(0, 1/2)` covered by the stability results.
    pub fn theory_safe(&self) -> bool {
        self.alpha_star < 0.5
    }

    /// `s₁` with `φ(s₁) = 2.38/√d`.
    pub fn default_s0(model: &ProposalModel) -> f64 {
        model.scaling().inverse(2.38 / (model.dim() as f64).sqrt())
    }

    /// `max{α*, 1 − α*}`, the bound on `|H|`.
    pub fn h_bound(&self) -> f64 {
        self.alpha_star.max(1.0 - self.alpha_star)
    }
}

/// Chain state `(x_n, s_n, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptState {
    pub x: Vec<f64>,
    pub s: f64,
    pub n: u64,
}

impl AdaptState {
    pub fn initial(config: &AdaptConfig) -> Self {
        Self { x: config.x0.clone(), s: config.s0, n: 1 }
    }
}

#[inline]
fn adaptation_signal(config: &AdaptConfig, alpha: f64, accepted: bool) -> f64 {
    let a = if config.binary_adaptation { accepted as u8 as f64 } else { alpha };
    a - config.alpha_star
}

/// One adaptive step.
pub fn asm_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    state: &AdaptState,
    config: &AdaptConfig,
    rng: &mut R,
) -> Result<(AdaptState, StepOutcome)> {
    let out = crate::kernel::metropolis_step(target, model, state.s, &state.x, rng)?;
    let n = state.n + 1;
    let s = state.s + config.schedule.eta(n) * adaptation_signal(config, out.alpha, out.accepted);
    Ok((AdaptState { x: out.next_x.clone(), s, n }, out))
}

/// Nested restriction sets `K_n = [a₁, a₂(n)]` for the parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum RestrictionSchedule {
    Fixed { a1: f64, a2: f64 },
    /// `φ(a₁) = θ₁`, `φ(a₂(n)) = θ₂ n^β`.
    PolyGrowth { theta1: f64, theta2: f64, beta: f64 },
}

impl RestrictionSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RestrictionSchedule::Fixed { a1, a2 } => a1 <= a2 && a1.is_finite() && a2.is_finite(),
            RestrictionSchedule::PolyGrowth { theta1, theta2, beta } => {
                theta1 > 0.0 && theta1 <= theta2 && theta2.is_finite() && beta >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid restriction {self:?}")))
        }
    }

    /// `(a₁, a₂(n))`.
    #[inline]
    pub fn bounds(&self, n: u64, scaling: &ScalingFunction) -> (f64, f64) {
        match *self {
            RestrictionSchedule::Fixed { a1, a2 } => (a1, a2),
            RestrictionSchedule::PolyGrowth { theta1, theta2, beta } => {
                (scaling.inverse(theta1), scaling.inverse(theta2 * (n as f64).powf(beta)))
            }
        }
    }

    #[inline]
    pub fn contains(&self, n: u64, s: f64, scaling: &ScalingFunction) -> bool {
        let (a, b) = self.bounds(n, scaling);
        a <= s && s <= b
    }
}

/// One step of the truncated recursion: an update leaving `K_{n+1}` is dropped.
pub fn truncated_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    state: &AdaptState,
    config: &AdaptConfig,
    restriction: &RestrictionSchedule,
    rng: &mut R,
) -> Result<(AdaptState, StepOutcome)> {
    let scaling = model.scaling();
    if !restriction.contains(state.n, state.s, &scaling) {
        return Err(Error::InvariantViolation { step: state.n, what: format!("s = {} outside K_n", state.s) });
    }
    let (mut next, out) = asm_step(target, model, state, config, rng)?;
    if !restriction.contains(next.n, next.s, &scaling) {
        next.s = state.s;
    }
    Ok((next, out))
}

/// One row of a chain trace, describing the state after step `n − 1 → n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<'a> {
    pub n: u64,
    pub x: &'a [f64],
    pub s: f64,
    pub theta: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub eta: f64,
}

/// Receiver of per-step records.
pub trait TraceSink {
    fn record(&mut self, record: &TraceRecord<'_>) -> core::result::Result<(), String>;
}

/// Discards every record.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    #[inline]
    fn record(&mut self, _record: &TraceRecord<'_>) -> core::result::Result<(), String> {
        Ok(())
    }
}

impl<F: FnMut(&TraceRecord<'_>) -> core::result::Result<(), String>> TraceSink for F {
    fn record(&mut self, record: &TraceRecord<'_>) -> core::result::Result<(), String> {
        self(record)
    }
}

/// Knobs of the streaming summary.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryOptions {
    /// Exponent in `max_n φ(S_n)/n^β`.
    pub beta: f64,
    /// Number of blocks of the last half fed to the trend test.
    pub trend_blocks: usize,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self { beta: 0.1, trend_blocks: 50 }
    }
}

/// Ergodic average of one functional.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionalAverage {
    pub name: String,
    pub mean: f64,
    pub std_error: f64,
    pub batches: u64,
    /// Visited states where `f` broke its declared growth class.
    pub growth_violations: u64,
}

/// Summary of an adaptive run, computed from every step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainSummary {
    pub steps: u64,
    pub alpha_star: f64,
    pub theory_safe: bool,
    pub final_x: Vec<f64>,
    pub final_s: f64,
    pub final_theta: f64,
    pub mean_alpha: f64,
    pub mean_alpha_last_half: f64,
    pub acceptance_rate: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub s_min_last_half: f64,
    pub s_max_last_half: f64,
    pub s_min_last_quarter: f64,
    pub s_max_last_quarter: f64,
    pub theta_min: f64,
    pub theta_max_first_half: f64,
    pub theta_max_second_half: f64,
    pub beta: f64,
    /// `max_n φ(S_n)/n^β`
    pub max_theta_growth: f64,
    /// Steps whose parameter increment exceeded `η max{α*, 1 − α*}`.
    pub increment_violations: u64,
    /// Steps whose update was dropped by a restriction.
    pub truncations: u64,
    pub trend: Option<MannKendall>,
    pub functionals: Vec<FunctionalAverage>,
}

impl ChainSummary {
    pub fn s_range_last_half(&self) -> f64 {
        self.s_max_last_half - self.s_min_last_half
    }

    pub fn s_range_last_quarter(&self) -> f64 {
        self.s_max_last_quarter - self.s_min_last_quarter
    }
}

struct Accumulator {
    n_steps: u64,
    half_start: u64,
    quarter_start: u64,
    block_size: u64,
    opts: SummaryOptions,
    scaling: ScalingFunction,
    alpha_all: f64,
    alpha_half: f64,
    accepted: u64,
    s_min: f64,
    s_max: f64,
    s_half: (f64, f64),
    s_quarter: (f64, f64),
    theta_min: f64,
    theta_max_first: f64,
    theta_max_second: f64,
    max_growth: f64,
    violations: u64,
    truncations: u64,
    block_sum: f64,
    block_fill: u64,
    blocks: Vec<f64>,
    functionals: Vec<(Functional, BatchMeans, u64)>,
}

impl Accumulator {
    fn new(config: &AdaptConfig, scaling: ScalingFunction, functionals: &[Functional], opts: SummaryOptions) -> Self {
        let n = config.n_steps;
        let half_len = n / 2;
        let half_start = n - half_len + 1;
        let quarter_start = n - n / 4 + 1;
        let nb = (opts.trend_blocks as u64).min(half_len).max(1);
        let theta0 = scaling.eval(config.s0);
        Self {
            n_steps: n,
            half_start,
            quarter_start,
            block_size: (half_len / nb).max(1),
            opts,
            scaling,
            alpha_all: 0.0,
            alpha_half: 0.0,
            accepted: 0,
            s_min: config.s0,
            s_max: config.s0,
            s_half: (f64::INFINITY, f64::NEG_INFINITY),
            s_quarter: (f64::INFINITY, f64::NEG_INFINITY),
            theta_min: theta0,
            theta_max_first: theta0,
            theta_max_second: 0.0,
            max_growth: theta0,
            violations: 0,
            truncations: 0,
            block_sum: 0.0,
            block_fill: 0,
            blocks: Vec::with_capacity(nb as usize),
            functionals: functionals.iter().map(|f| (f.clone(), BatchMeans::for_length(n), 0)).collect(),
        }
    }

    // k is the step number 1..=N; the post-step state has index k + 1.
    #[inline]
    fn push(&mut self, k: u64, x: &[f64], s: f64, alpha: f64, accepted: bool) {
        self.alpha_all += alpha;
        self.accepted += accepted as u64;
        self.s_min = self.s_min.min(s);
        self.s_max = self.s_max.max(s);
        let theta = self.scaling.eval(s);
        self.theta_min = self.theta_min.min(theta);
        let growth = theta / ((k + 1) as f64).powf(self.opts.beta);
        self.max_growth = self.max_growth.max(growth);
        if k >= self.half_start {
            self.alpha_half += alpha;
            self.s_half.0 = self.s_half.0.min(s);
            self.s_half.1 = self.s_half.1.max(s);
            self.theta_max_second = self.theta_max_second.max(theta);
            self.block_sum += s;
            self.block_fill += 1;
            if self.block_fill == self.block_size {
                self.blocks.push(self.block_sum / self.block_size as f64);
                self.block_sum = 0.0;
                self.block_fill = 0;
            }
        } else {
            self.theta_max_first = self.theta_max_first.max(theta);
        }
        if k >= self.quarter_start {
            self.s_quarter.0 = self.s_quarter.0.min(s);
            self.s_quarter.1 = self.s_quarter.1.max(s);
        }
        for (f, bm, viol) in self.functionals.iter_mut() {
            let v = f.eval(x);
            if !f.natural_growth().admits(v, x) {
                *viol += 1;
            }
            bm.push(v);
        }
    }

    fn finish(self, config: &AdaptConfig, x: &[f64], s: f64) -> ChainSummary {
        let n = self.n_steps.max(1) as f64;
        let half = (self.n_steps + 1).saturating_sub(self.half_start).max(1) as f64;
        let trend = (self.blocks.len() >= 3).then(|| mann_kendall(&self.blocks));
        ChainSummary {
            steps: self.n_steps,
            alpha_star: config.alpha_star,
            theory_safe: config.theory_safe(),
            final_x: x.to_vec(),
            final_s: s,
            final_theta: self.scaling.eval(s),
            mean_alpha: self.alpha_all / n,
            mean_alpha_last_half: self.alpha_half / half,
            acceptance_rate: self.accepted as f64 / n,
            s_min: self.s_min,
            s_max: self.s_max,
            s_min_last_half: self.s_half.0,
            s_max_last_half: self.s_half.1,
            s_min_last_quarter: self.s_quarter.0,
            s_max_last_quarter: self.s_quarter.1,
            theta_min: self.theta_min,
            theta_max_first_half: self.theta_max_first,
            theta_max_second_half: self.theta_max_second,
            beta: self.opts.beta,
            max_theta_growth: self.max_growth,
            increment_violations: self.violations,
            truncations: self.truncations,
            trend,
            functionals: self
                .functionals
                .into_iter()
                .map(|(f, bm, viol)| FunctionalAverage {
                    name: f.name(),
                    mean: bm.mean(),
                    std_error: bm.std_error(),
                    batches: bm.batch_count(),
                    growth_violations: viol,
                })
                .collect(),
        }
    }
}

fn drive<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    config: &AdaptConfig,
    restriction: Option<&RestrictionSchedule>,
    functionals: &[Functional],
    opts: SummaryOptions,
    rng: &mut R,
    sink: &mut dyn TraceSink,
) -> Result<ChainSummary> {
    check_dim(model.dim(), &config.x0)?;
    if config.n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let scaling = model.scaling();
    if let Some(r) = restriction {
        r.validate()?;
        if !r.contains(1, config.s0, &scaling) {
            return Err(Error::InvariantViolation { step: 1, what: "s₁ outside K₁".into() });
        }
    }
    let mut chain = MetropolisChain::new(target, config.x0.clone())?;
    let mut noise = StepNoise::new(model.dim());
    let mut acc = Accumulator::new(config, scaling, functionals, opts);
    let h_bound = config.h_bound();
    let mut s = config.s0;
    for k in 1..=config.n_steps {
        let n = k + 1;
        noise.draw(model, rng);
        let (alpha, accepted) = chain.step_with_noise(target, model, s, &noise);
        let eta = config.schedule.eta(n);
        let mut next = s + eta * adaptation_signal(config, alpha, accepted);
        if let Some(r) = restriction {
            if !r.contains(n, next, &scaling) {
                next = s;
                acc.truncations += 1;
            }
        }
        if !next.is_finite() {
            return Err(Error::Numerical(format!("non-finite s at step {n}")));
        }
        // rounding of s + ηH can exceed |ηH| by an ulp of s
        if (next - s).abs() > eta * h_bound * (1.0 + 1e-12) + 4.0 * f64::EPSILON * s.abs() {
            acc.violations += 1;
        }
        s = next;
        acc.push(k, chain.x(), s, alpha, accepted);
        let rec = TraceRecord { n, x: chain.x(), s, theta: scaling.eval(s), alpha, accepted, eta };
        sink.record(&rec).map_err(|message| Error::Sink { step: n, message })?;
    }
    Ok(acc.finish(config, chain.x(), s))
}

/// Runs the adaptive chain for `config.n_steps` steps.
pub fn run_asm<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    config: &AdaptConfig,
    functionals: &[Functional],
    rng: &mut R,
    sink: &mut dyn TraceSink,
) -> Result<ChainSummary> {
    drive(target, model, config, None, functionals, SummaryOptions::default(), rng, sink)
}

/// [`run_asm`] with explicit summary options.
pub fn run_asm_with<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    config: &AdaptConfig,
    functionals: &[Functional],
    opts: SummaryOptions,
    rng: &mut R,
    sink: &mut dyn TraceSink,
) -> Result<ChainSummary> {
    drive(target, model, config, None, functionals, opts, rng, sink)
}

/// Runs the truncated recursion.
pub fn run_truncated<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    config: &AdaptConfig,
    restriction: &RestrictionSchedule,
    functionals: &[Functional],
    rng: &mut R,
    sink: &mut dyn TraceSink,
) -> Result<ChainSummary> {
    drive(target, model, config, Some(restriction), functionals, SummaryOptions::default(), rng, sink)
}

/// Outcome of [`run_coupled`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingReport {
    pub steps: u64,
    /// First `n` with the unconstrained `S_n ∉ K_n`.
    pub first_violation: Option<u64>,
    /// First `n` at which the two states differ in any bit.
    pub first_divergence: Option<u64>,
    /// Every truncated `S̃_n` lay in `K_n`.
    pub truncated_within_k: bool,
    pub truncated_final_s: f64,
    pub unconstrained_final_s: f64,
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Runs the unconstrained and the truncated recursion from the same state,
/// each on its own copy of `rng`, and locates where they part.
///
/// Fails with a coupling-contract error if they differ before the first
/// restriction violation or agree at it.
pub fn run_coupled<T: TargetDensity + ?Sized, R: Rng + Clone>(
    target: &T,
    model: &ProposalModel,
    config: &AdaptConfig,
    restriction: &RestrictionSchedule,
    rng: &R,
) -> Result<CouplingReport> {
    check_dim(model.dim(), &config.x0)?;
    restriction.validate()?;
    let scaling = model.scaling();
    if !restriction.contains(1, config.s0, &scaling) {
        return Err(Error::InvariantViolation { step: 1, what: "s₁ outside K₁".into() });
    }
    let mut rng_free = rng.clone();
    let mut rng_trunc = rng.clone();
    let mut free = MetropolisChain::new(target, config.x0.clone())?;
    let mut trunc = free.clone();
    let mut noise_free = StepNoise::new(model.dim());
    let mut noise_trunc = StepNoise::new(model.dim());
    let (mut s_free, mut s_trunc) = (config.s0, config.s0);
    let mut first_violation = None;
    let mut first_divergence = None;
    let mut within = true;
    for k in 1..=config.n_steps {
        let n = k + 1;
        let eta = config.schedule.eta(n);
        noise_free.draw(model, &mut rng_free);
        let (a, acc) = free.step_with_noise(target, model, s_free, &noise_free);
        s_free += eta * adaptation_signal(config, a, acc);
        noise_trunc.draw(model, &mut rng_trunc);
        let (a, acc) = trunc.step_with_noise(target, model, s_trunc, &noise_trunc);
        let next = s_trunc + eta * adaptation_signal(config, a, acc);
        if restriction.contains(n, next, &scaling) {
            s_trunc = next;
        }
        within &= restriction.contains(n, s_trunc, &scaling);
        if first_violation.is_none() && !restriction.contains(n, s_free, &scaling) {
            first_violation = Some(n);
        }
        if first_divergence.is_none() && (s_free.to_bits() != s_trunc.to_bits() || !same_bits(free.x(), trunc.x())) {
            first_divergence = Some(n);
        }
    }
    if first_divergence != first_violation {
        return Err(Error::CouplingContract(format!(
            "divergence at {first_divergence:?}, first violation at {first_violation:?}"
        )));
    }
    Ok(CouplingReport {
        steps: config.n_steps,
        first_violation,
        first_divergence,
        truncated_within_k: within,
        truncated_final_s: s_trunc,
        unconstrained_final_s: s_free,
    })
}

/// Shape learning for the AM-within-ASM combination.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AmConfig {
    /// Eigenvalue clamps of the shape matrix.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Weight `1/(n+1)` instead of `η_{n+1}` in the mean and covariance recursions.
    pub harmonic_weights: bool,
}

impl AmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument("need 0 < lambda_min <= lambda_max < inf".into()))
        }
    }
}

/// Adaptive state plus the running moments driving the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AmAsmState {
    pub state: AdaptState,
    pub mean: Vec<f64>,
    /// Row-major running covariance.
    pub covariance: Vec<f64>,
    pub shape: ShapeMatrix,
}

impl AmAsmState {
    pub fn initial(config: &AdaptConfig, am: &AmConfig) -> Result<Self> {
        am.validate()?;
        let d = config.x0.len();
        let covariance = linalg::identity(d);
        let shape = clamped_root(&covariance, d, am)?;
        Ok(Self { state: AdaptState::initial(config), mean: config.x0.clone(), covariance, shape })
    }

    /// Correlation of the running covariance between coordinates `i` and `j`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let d = self.mean.len();
        let c = &self.covariance;
        c[i * d + j] / (c[i * d + i] * c[j * d + j]).sqrt()
    }
}

// Symmetric square root of `cov` with eigenvalues clamped into [λmin, λmax],
// assembled as λmin I + V diag(e − λmin) Vᵀ so that a full clamp is exactly λmin I.
fn clamped_root(cov: &[f64], d: usize, am: &AmConfig) -> Result<ShapeMatrix> {
    let (vals, vecs) = linalg::symmetric_eigen(cov, d);
    let e: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt().clamp(am.lambda_min, am.lambda_max) - am.lambda_min).collect();
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut v: f64 = (0..d).map(|k| vecs[i * d + k] * e[k] * vecs[j * d + k]).sum();
            if i == j {
                v += am.lambda_min;
            }
            m[i * d + j] = v;
            m[j * d + i] = v;
        }
    }
    ShapeMatrix::dense(m, d)
}

/// One AM-within-ASM step: a scale step with the current shape, then the
/// moment recursions and a fresh clamped shape.
pub fn am_asm_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    am_state: &AmAsmState,
    config: &AdaptConfig,
    am: &AmConfig,
    rng: &mut R,
) -> Result<(AmAsmState, StepOutcome)> {
    let shaped = model.with_shape(am_state.shape.clone());
    let (state, out) = asm_step(target, &shaped, &am_state.state, config, rng)?;
    let d = state.x.len();
    let w = if am.harmonic_weights {
        1.0 / state.n as f64
    } else {
        config.schedule.eta(state.n).min(1.0)
    };
    let mut mean = am_state.mean.clone();
    let mut cov = am_state.covariance.clone();
    let dx: Vec<f64> = (0..d).map(|i| state.x[i] - mean[i]).collect();
    for i in 0..d {
        mean[i] += w * dx[i];
    }
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] += w * (dx[i] * dx[j] - cov[i * d + j]);
        }
    }
    if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite moments at step {}: x = {:?}, mean = {mean:?}, covariance = {cov:?}",
            state.n, state.x
        )));
    }
    let shape = clamped_root(&cov, d, am)?;
    Ok((AmAsmState { state, mean, covariance: cov, shape }, out))
}

/// Runs `config.n_steps` AM-within-ASM steps and returns the final state and
/// the mean acceptance probability.
pub fn run_am_asm<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    model: &ProposalModel,
    config: &AdaptConfig,
    am: &AmConfig,
    rng: &mut R,
) -> Result<(AmAsmState, f64)> {
    let mut st = AmAsmState::initial(config, am)?;
    let mut alpha = Welford::new();
    for _ in 0..config.n_steps {
        let (next, out) = am_asm_step(target, model, &st, config, am, rng)?;
        alpha.push(out.alpha);
        st = next;
    }
    Ok((st, alpha.mean()))
}
