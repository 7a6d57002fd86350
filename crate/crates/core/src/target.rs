//! Target densities.
//!
//! Densities are exposed only through their logarithm; `-∞` marks points
//! outside the support. The builtins are normalized, but nothing downstream
//! relies on that except the quadrature checks that say so.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::linalg::{self, dot, norm};
use crate::special::{ln_gamma, ln_unit_ball_volume, normal_cdf, unit_sphere_area};
use crate::{Error, Result};

/// Which of the two theory regimes a target belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SupportKind {
    /// Compact support whose boundary has uniformly continuous normals.
    CompactRegular,
    /// Unbounded support with super-exponentially decaying tails.
    SuperExponential,
    /// Compact support with a boundary outside the regularity hypothesis.
    Irregular,
}

/// A real function of the chain state whose ergodic average is tracked.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Functional {
    Constant { value: f64 },
    Coordinate { index: usize },
    Power { index: usize, power: u32 },
    SquaredNorm,
    /// `1{x_index > threshold}`
    HalfSpace { index: usize, threshold: f64 },
}

/// Declared growth of a functional, `|f(x)| ≤ M` or `|f(x)| ≤ M max{1, e^{ξ‖x‖}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GrowthClass {
    Bounded { m: f64 },
    SubExponential { m: f64, xi: f64 },
}

impl GrowthClass {
    pub fn admits(&self, value: f64, x: &[f64]) -> bool {
        match *self {
            GrowthClass::Bounded { m } => value.abs() <= m,
            GrowthClass::SubExponential { m, xi } => value.abs() <= m * (xi * norm(x)).exp().max(1.0),
        }
    }
}

impl Functional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Functional::Constant { value } => value,
            Functional::Coordinate { index } => x[index],
            Functional::Power { index, power } => x[index].powi(power as i32),
            Functional::SquaredNorm => dot(x, x),
            Functional::HalfSpace { index, threshold } => {
                if x[index] > threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The growth class implied by the functional's form.
    pub fn natural_growth(&self) -> GrowthClass {
        match *self {
            Functional::Constant { value } => GrowthClass::Bounded { m: value.abs() },
            Functional::HalfSpace { .. } => GrowthClass::Bounded { m: 1.0 },
            Functional::Coordinate { .. } | Functional::SquaredNorm => GrowthClass::SubExponential { m: 1.0, xi: 1.0 },
            // |t|^p ≤ (p/e)^p e^{|t|}
            Functional::Power { power, .. } => {
                let p = power as f64;
                GrowthClass::SubExponential {
                    m: (p / core::f64::consts::E).powf(p).max(1.0),
                    xi: 1.0,
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Functional::Constant { value } => alloc::format!("const({value})"),
            Functional::Coordinate { index } => alloc::format!("x{}", index + 1),
            Functional::Power { index, power } => alloc::format!("x{}^{power}", index + 1),
            Functional::SquaredNorm => "|x|^2".into(),
            Functional::HalfSpace { index, threshold } => alloc::format!("1{{x{} > {threshold}}}", index + 1),
        }
    }
}

/// The target-density contract used by the kernels and checks.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;

    /// `log π(x)`, `-∞` outside the support. The caller guarantees `x.len() == dim()`.
    fn log_density_unchecked(&self, x: &[f64]) -> f64;

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.log_density_unchecked(x))
    }

    /// `∇ log π(x)`; `None` when the target ships no gradient.
    fn grad_log_density(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn support_kind(&self) -> SupportKind;

    /// Declared boundary regularity (uniformly continuous normals of the
    /// support or of the far contours). Not computed.
    fn has_uniformly_continuous_normals(&self) -> bool;

    /// Declared tail exponent `ρ > 1` for super-exponential targets.
    fn tail_exponent(&self) -> Option<f64> {
        None
    }

    /// `log sup_x π(x)`.
    fn max_log_density(&self) -> f64;

    /// Draws an exact sample from π into `out`; `false` if there is no direct sampler.
    fn sample(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) -> bool {
        false
    }

    /// Exact `∫ f π`, when known in closed form.
    fn expectation(&self, _f: &Functional) -> Option<f64> {
        None
    }

    /// A box holding the support, or essentially all of the mass.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);

    /// A point the target is symmetric about / concentrated around.
    fn center(&self) -> Vec<f64>;

    /// Smallest `t > 0` at which `x + t v` leaves the support.
    fn ray_exit(&self, _x: &[f64], _v: &[f64]) -> Option<f64> {
        None
    }

    /// Diameter of a compact support.
    fn diameter(&self) -> Option<f64> {
        None
    }

    /// Points on the support boundary (compact targets).
    fn boundary_points(&self, _count: usize) -> Vec<Vec<f64>> {
        Vec::new()
    }

    /// `log π(x) = log π(2c − x)` about [`center`](Self::center).
    fn is_point_symmetric(&self) -> bool {
        false
    }
}

pub(crate) fn check_dim(d: usize, x: &[f64]) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(())
}

/// Evaluates `log π(x)` with a dimension check.
pub fn log_density<T: TargetDensity + ?Sized>(target: &T, x: &[f64]) -> Result<f64> {
    target.log_density(x)
}

/// The concrete targets shipped with the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinTarget {
    UniformBall(UniformBall),
    SmoothBump(SmoothBump),
    Gaussian(Gaussian),
    ExponentialPower(ExponentialPower),
    UniformBox(UniformBox),
}

macro_rules! dispatch {
    ($self:ident, $t:ident => $e:expr) => {
        match $self {
            BuiltinTarget::UniformBall($t) => $e,
            BuiltinTarget::SmoothBump($t) => $e,
            BuiltinTarget::Gaussian($t) => $e,
            BuiltinTarget::ExponentialPower($t) => $e,
            BuiltinTarget::UniformBox($t) => $e,
        }
    };
}

impl TargetDensity for BuiltinTarget {
    fn dim(&self) -> usize {
        dispatch!(self, t => t.dim())
    }
    #[inline]
    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        dispatch!(self, t => t.log_density_unchecked(x))
    }
    fn grad_log_density(&self, x: &[f64]) -> Option<Vec<f64>> {
        dispatch!(self, t => t.grad_log_density(x))
    }
    fn support_kind(&self) -> SupportKind {
        dispatch!(self, t => t.support_kind())
    }
    fn has_uniformly_continuous_normals(&self) -> bool {
        dispatch!(self, t => t.has_uniformly_continuous_normals())
    }
    fn tail_exponent(&self) -> Option<f64> {
        dispatch!(self, t => t.tail_exponent())
    }
    fn max_log_density(&self) -> f64 {
        dispatch!(self, t => t.max_log_density())
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        dispatch!(self, t => t.sample(rng, out))
    }
    fn expectation(&self, f: &Functional) -> Option<f64> {
        dispatch!(self, t => t.expectation(f))
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        dispatch!(self, t => t.bounding_box())
    }
    fn center(&self) -> Vec<f64> {
        dispatch!(self, t => t.center())
    }
    fn ray_exit(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        dispatch!(self, t => t.ray_exit(x, v))
    }
    fn diameter(&self) -> Option<f64> {
        dispatch!(self, t => t.diameter())
    }
    fn boundary_points(&self, count: usize) -> Vec<Vec<f64>> {
        dispatch!(self, t => t.boundary_points(count))
    }
    fn is_point_symmetric(&self) -> bool {
        dispatch!(self, t => t.is_point_symmetric())
    }
}

impl BuiltinTarget {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinTarget::UniformBall(_) => "uniform_ball",
            BuiltinTarget::SmoothBump(_) => "smooth_bump",
            BuiltinTarget::Gaussian(_) => "gaussian",
            BuiltinTarget::ExponentialPower(_) => "exponential_power",
            BuiltinTarget::UniformBox(_) => "uniform_box",
        }
    }
}

fn sample_standard_normal(rng: &mut dyn RngCore, out: &mut [f64]) {
    for o in out.iter_mut() {
        *o = StandardNormal.sample(rng);
    }
}

fn sample_in_unit_ball(rng: &mut dyn RngCore, out: &mut [f64]) {
    sample_standard_normal(rng, out);
    let r = norm(out);
    let u: f64 = rng.random();
    let scale = u.powf(1.0 / out.len() as f64) / r;
    out.iter_mut().for_each(|v| *v *= scale);
}

// Exit parameter of x + t v from the ball |y − c| ≤ radius.
fn ball_exit(center: &[f64], radius: f64, x: &[f64], v: &[f64]) -> Option<f64> {
    let a = dot(v, v);
    if a == 0.0 {
        return None;
    }
    let mut b = 0.0;
    let mut c = -radius * radius;
    for i in 0..x.len() {
        let p = x[i] - center[i];
        b += p * v[i];
        c += p * p;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b + disc.sqrt()) / a;
    (t > 0.0).then_some(t)
}

fn sphere_points(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    match center.len() {
        1 => vec![vec![center[0] - radius], vec![center[0] + radius]],
        2 => (0..count.max(1))
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count.max(1) as f64;
                vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect(),
        d => (0..count.max(1))
            .map(|k| {
                let mut p = center.to_vec();
                let axis = k % d;
                p[axis] += if (k / d) % 2 == 0 { radius } else { -radius };
                p
            })
            .collect(),
    }
}

/// Uniform density on a closed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBall {
    center: Vec<f64>,
    radius: f64,
    log_value: f64,
}

impl UniformBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument("uniform ball needs d >= 1 and radius > 0".into()));
        }
        let d = center.len();
        let log_value = -(ln_unit_ball_volume(d) + d as f64 * radius.ln());
        Ok(Self { center, radius, log_value })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl TargetDensity for UniformBall {
    fn dim(&self) -> usize {
        self.center.len()
    }
    #[inline]
    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        if r2 <= self.radius * self.radius {
            self.log_value
        } else {
            f64::NEG_INFINITY
        }
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::CompactRegular
    }
    fn has_uniformly_continuous_normals(&self) -> bool {
        true
    }
    fn max_log_density(&self) -> f64 {
        self.log_value
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        sample_in_unit_ball(rng, out);
        for (o, c) in out.iter_mut().zip(&self.center) {
            *o = c + self.radius * *o;
        }
        true
    }
    fn expectation(&self, f: &Functional) -> Option<f64> {
        let d = self.dim() as f64;
        let r2 = self.radius * self.radius;
        match *f {
            Functional::Constant { value } => Some(value),
            Functional::Coordinate { index } => Some(self.center[index]),
            Functional::Power { index, power: 2 } => Some(self.center[index].powi(2) + r2 / (d + 2.0)),
            Functional::SquaredNorm => Some(dot(&self.center, &self.center) + d / (d + 2.0) * r2),
            Functional::HalfSpace { index, threshold } if threshold == self.center[index] => Some(0.5),
            _ => None,
        }
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }
    fn center(&self) -> Vec<f64> {
        self.center.clone()
    }
    fn ray_exit(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        ball_exit(&self.center, self.radius, x, v)
    }
    fn diameter(&self) -> Option<f64> {
        Some(2.0 * self.radius)
    }
    fn boundary_points(&self, count: usize) -> Vec<Vec<f64>> {
        sphere_points(&self.center, self.radius, count)
    }
    fn is_point_symmetric(&self) -> bool {
        true
    }
}

/// Radially decreasing bump on a ball, `π ∝ 1 − (1 − floor)(‖x − c‖/R)²`,
/// continuous and bounded below by `floor · max π` on the support.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothBump {
    center: Vec<f64>,
    radius: f64,
    floor: f64,
    log_norm: f64,
}

impl SmoothBump {
    pub const MIN_FLOOR: f64 = 1e-8;

    pub fn new(center: Vec<f64>, radius: f64, floor: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument("smooth bump needs d >= 1 and radius > 0".into()));
        }
        if !(Self::MIN_FLOOR..=1.0).contains(&floor) {
            return Err(Error::InvalidArgument(alloc::format!(
                "smooth bump floor must lie in [{}, 1], got {floor}",
                Self::MIN_FLOOR
            )));
        }
        let d = center.len() as f64;
        let k = 1.0 - floor;
        let log_norm = ln_unit_ball_volume(center.len()) + d * radius.ln() + (1.0 - k * d / (d + 2.0)).ln();
        Ok(Self { center, radius, floor, log_norm })
    }

    fn k(&self) -> f64 {
        1.0 - self.floor
    }

    fn u2(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        r2 / (self.radius * self.radius)
    }
}

impl TargetDensity for SmoothBump {
    fn dim(&self) -> usize {
        self.center.len()
    }
    #[inline]
    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let u2 = self.u2(x);
        if u2 <= 1.0 {
            (1.0 - self.k() * u2).ln() - self.log_norm
        } else {
            f64::NEG_INFINITY
        }
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::CompactRegular
    }
    fn has_uniformly_continuous_normals(&self) -> bool {
        true
    }
    fn max_log_density(&self) -> f64 {
        -self.log_norm
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        // rejection from the uniform ball; acceptance ≥ floor
        loop {
            sample_in_unit_ball(rng, out);
            let u2 = dot(out, out);
            let u: f64 = rng.random();
            if u <= 1.0 - self.k() * u2 {
                break;
            }
        }
        for (o, c) in out.iter_mut().zip(&self.center) {
            *o = c + self.radius * *o;
        }
        true
    }
    fn expectation(&self, f: &Functional) -> Option<f64> {
        let d = self.dim() as f64;
        let k = self.k();
        let eu2 = (1.0 / (d + 2.0) - k / (d + 4.0)) / (1.0 / d - k / (d + 2.0));
        let r2 = self.radius * self.radius;
        match *f {
            Functional::Constant { value } => Some(value),
            Functional::Coordinate { index } => Some(self.center[index]),
            Functional::SquaredNorm => Some(dot(&self.center, &self.center) + eu2 * r2),
            Functional::Power { index, power: 2 } => Some(self.center[index].powi(2) + eu2 * r2 / d),
            Functional::HalfSpace { index, threshold } if threshold == self.center[index] => Some(0.5),
            _ => None,
        }
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }
    fn center(&self) -> Vec<f64> {
        self.center.clone()
    }
    fn ray_exit(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        ball_exit(&self.center, self.radius, x, v)
    }
    fn diameter(&self) -> Option<f64> {
        Some(2.0 * self.radius)
    }
    fn boundary_points(&self, count: usize) -> Vec<Vec<f64>> {
        sphere_points(&self.center, self.radius, count)
    }
    fn is_point_symmetric(&self) -> bool {
        true
    }
}

/// Multivariate normal `N(μ, L Lᵀ)` given a lower-triangular factor `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    factor: Vec<f64>,
    precision: Vec<f64>,
    log_norm: f64,
    isotropic: bool,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, factor: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || factor.len() != d * d {
            return Err(Error::InvalidArgument("gaussian needs d >= 1 and a d×d factor".into()));
        }
        for i in 0..d {
            if !(factor[i * d + i] > 0.0) {
                return Err(Error::InvalidArgument("covariance factor needs a positive diagonal".into()));
            }
            if (i + 1..d).any(|j| factor[i * d + j] != 0.0) {
                return Err(Error::InvalidArgument("covariance factor must be lower triangular".into()));
            }
        }
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = (0..d).map(|k| factor[i * d + k] * factor[j * d + k]).sum();
            }
        }
        let precision = linalg::inverse(&cov, d).ok_or_else(|| Error::Numerical("singular covariance".into()))?;
        let log_det_factor: f64 = (0..d).map(|i| factor[i * d + i].ln()).sum();
        let log_norm = log_det_factor + 0.5 * d as f64 * (2.0 * PI).ln();
        let diag0 = factor[0];
        let isotropic = (0..d).all(|i| (0..d).all(|j| factor[i * d + j] == if i == j { diag0 } else { 0.0 }));
        Ok(Self { mean, factor, precision, log_norm, isotropic })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(vec![0.0; d], linalg::identity(d)).expect("identity factor is valid")
    }

    pub fn from_covariance(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        let l = linalg::cholesky(cov, d).ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
        Self::new(mean, l)
    }

    pub fn covariance(&self) -> Vec<f64> {
        let d = self.mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = (0..d).map(|k| self.factor[i * d + k] * self.factor[j * d + k]).sum();
            }
        }
        cov
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

impl TargetDensity for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    #[inline]
    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        if d == 1 {
            let z = (x[0] - self.mean[0]) / self.factor[0];
            return -0.5 * z * z - self.log_norm;
        }
        let mut q = 0.0;
        for i in 0..d {
            let di = x[i] - self.mean[i];
            for j in 0..d {
                q += di * self.precision[i * d + j] * (x[j] - self.mean[j]);
            }
        }
        -0.5 * q - self.log_norm
    }
    fn grad_log_density(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.mean.len();
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut g = vec![0.0; d];
        linalg::mat_vec(&self.precision, &diff, &mut g);
        g.iter_mut().for_each(|v| *v = -*v);
        Some(g)
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::SuperExponential
    }
    fn has_uniformly_continuous_normals(&self) -> bool {
        // far contours are ellipsoids
        true
    }
    fn tail_exponent(&self) -> Option<f64> {
        Some(1.5)
    }
    fn max_log_density(&self) -> f64 {
        -self.log_norm
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        let d = self.mean.len();
        let mut g = vec![0.0; d];
        sample_standard_normal(rng, &mut g);
        linalg::mat_vec(&self.factor, &g, out);
        out.iter_mut().zip(&self.mean).for_each(|(o, m)| *o += m);
        true
    }
    fn expectation(&self, f: &Functional) -> Option<f64> {
        let d = self.mean.len();
        let var = |i: usize| -> f64 { (0..d).map(|k| self.factor[i * d + k].powi(2)).sum() };
        match *f {
            Functional::Constant { value } => Some(value),
            Functional::Coordinate { index } => Some(self.mean[index]),
            Functional::Power { index, power: 2 } => Some(self.mean[index].powi(2) + var(index)),
            Functional::Power { index, power } if self.mean[index] == 0.0 => {
                if power % 2 == 1 {
                    Some(0.0)
                } else {
                    // (p − 1)!! σ^p
                    let dfact: f64 = (1..power).step_by(2).map(|k| k as f64).product();
                    Some(dfact * var(index).powf(power as f64 / 2.0))
                }
            }
            Functional::SquaredNorm => Some(dot(&self.mean, &self.mean) + (0..d).map(var).sum::<f64>()),
            Functional::HalfSpace { index, threshold } => Some(1.0 - normal_cdf((threshold - self.mean[index]) / var(index).sqrt())),
            _ => None,
        }
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.mean.len();
        let sd: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|k| self.factor[i * d + k].powi(2)).sum::<f64>().sqrt())
            .collect();
        (
            self.mean.iter().zip(&sd).map(|(m, s)| m - 12.0 * s).collect(),
            self.mean.iter().zip(&sd).map(|(m, s)| m + 12.0 * s).collect(),
        )
    }
    fn center(&self) -> Vec<f64> {
        self.mean.clone()
    }
    fn is_point_symmetric(&self) -> bool {
        true
    }
}

impl Gaussian {
    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }
}

/// `π(x) ∝ exp(−(‖x‖/scale)^p)` with `p > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialPower {
    dim: usize,
    p: f64,
    scale: f64,
    log_norm: f64,
}

impl ExponentialPower {
    pub fn new(dim: usize, p: f64, scale: f64) -> Result<Self> {
        if dim == 0 || !(p > 1.0) || !(scale > 0.0) || !p.is_finite() || !scale.is_finite() {
            return Err(Error::InvalidArgument("exponential power needs d >= 1, p > 1 and scale > 0".into()));
        }
        let d = dim as f64;
        let log_norm = d * scale.ln() + unit_sphere_area(dim).ln() + ln_gamma(d / p) - p.ln();
        Ok(Self { dim, p, scale, log_norm })
    }

    pub fn power(&self) -> f64 {
        self.p
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `E‖X‖^k = scale^k Γ((d + k)/p) / Γ(d/p)`.
    pub fn radial_moment(&self, k: f64) -> f64 {
        let d = self.dim as f64;
        (k * self.scale.ln() + ln_gamma((d + k) / self.p) - ln_gamma(d / self.p)).exp()
    }
}

impl TargetDensity for ExponentialPower {
    fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let r = if self.dim == 1 { x[0].abs() } else { norm(x) };
        -(r / self.scale).powf(self.p) - self.log_norm
    }
    fn grad_log_density(&self, x: &[f64]) -> Option<Vec<f64>> {
        // −(p / scale^p) ‖x‖^{p−2} x
        let r = norm(x);
        let c = if r == 0.0 { 0.0 } else { -self.p / self.scale.powf(self.p) * r.powf(self.p - 2.0) };
        Some(x.iter().map(|v| c * v).collect())
    }
    fn support_kind(&self) -> SupportKind {
        SupportKind::SuperExponential
    }
    fn has_uniformly_continuous_normals(&self) -> bool {
        true
    }
    fn tail_exponent(&self) -> Option<f64> {
        Some(0.5 * (1.0 + self.p))
    }
    fn max_log_density(&self) -> f64 {
        -self.log_norm
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        // (‖X‖/scale)^p ~ Gamma(d/p, 1), direction uniform
        let gamma = Gamma::new(self.dim as f64 / self.p, 1.0).expect("valid gamma shape");
        let w: f64 = gamma.sample(rng);
        let r = self.scale * w.powf(1.0 / self.p);
        sample_standard_normal(rng, out);
        let n = norm(out);
        out.iter_mut().for_each(|v| *v *= r / n);
        true
    }
    fn expectation(&self, f: &Functional) -> Option<f64> {
        let d = self.dim as f64;
        match *f {
            Functional::Constant { value } => Some(value),
            Functional::Coordinate { .. } => Some(0.0),
            Functional::SquaredNorm => Some(self.radial_moment(2.0)),
            Functional::Power { power: 2, .. } => Some(self.radial_moment(2.0) / d),
            Functional::Power { power, .. } if power % 2 == 1 => Some(0.0),
            Functional::Power { power, .. } if self.dim == 1 => Some(self.radial_moment(power as f64)),
            Functional::HalfSpace { threshold, .. } if threshold == 0.0 => Some(0.5),
            _ => None,
        }
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        // (r/scale)^p = 60 leaves e^{-60} of the mass outside
        let r = self.scale * 60f64.powf(1.0 / self.p);
        (vec![-r; self.dim], vec![r; self.dim])
    }
    fn center(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn is_point_symmetric(&self) -> bool {
        true
    }
}

/// Uniform density on an axis-aligned box. In `d ≥ 2` its corners break the
/// boundary-regularity hypothesis and it is tagged [`SupportKind::Irregular`].
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
    log_value: f64,
}

impl UniformBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("uniform box needs d >= 1 and lo < hi".into()));
        }
        let log_value = -lo.iter().zip(&hi).map(|(a, b)| (b - a).ln()).sum::<f64>();
        Ok(Self { lo, hi, log_value })
    }

    /// Uniform on `[0, 1]`.
    pub fn unit_interval() -> Self {
        Self::new(vec![0.0], vec![1.0]).expect("valid interval")
    }
}

impl TargetDensity for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    #[inline]
    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        for i in 0..x.len() {
            if x[i] < self.lo[i] || x[i] > self.hi[i] {
                return f64::NEG_INFINITY;
            }
        }
        self.log_value
    }
    fn support_kind(&self) -> SupportKind {
        // an interval's boundary is two points; corners only appear for d ≥ 2
        if self.lo.len() == 1 {
            SupportKind::CompactRegular
        } else {
            SupportKind::Irregular
        }
    }
    fn has_uniformly_continuous_normals(&self) -> bool {
        self.lo.len() == 1
    }
    fn max_log_density(&self) -> f64 {
        self.log_value
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        for (i, o) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *o = self.lo[i] + u * (self.hi[i] - self.lo[i]);
        }
        true
    }
    fn expectation(&self, f: &Functional) -> Option<f64> {
        match *f {
            Functional::Constant { value } => Some(value),
            Functional::Coordinate { index } => Some(0.5 * (self.lo[index] + self.hi[index])),
            Functional::Power { index, power } => {
                let (a, b) = (self.lo[index], self.hi[index]);
                let k = power as i32 + 1;
                Some((b.powi(k) - a.powi(k)) / (k as f64 * (b - a)))
            }
            Functional::SquaredNorm => {
                Some((0..self.dim()).map(|i| self.expectation(&Functional::Power { index: i, power: 2 }).unwrap()).sum())
            }
            Functional::HalfSpace { index, threshold } => {
                let (a, b) = (self.lo[index], self.hi[index]);
                Some(((b - threshold) / (b - a)).clamp(0.0, 1.0))
            }
        }
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
    fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
    fn ray_exit(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let mut t = f64::INFINITY;
        for i in 0..x.len() {
            if v[i] > 0.0 {
                t = t.min((self.hi[i] - x[i]) / v[i]);
            } else if v[i] < 0.0 {
                t = t.min((self.lo[i] - x[i]) / v[i]);
            }
        }
        (t.is_finite() && t > 0.0).then_some(t)
    }
    fn diameter(&self) -> Option<f64> {
        Some(self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt())
    }
    fn boundary_points(&self, count: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let c = self.center();
        let mut pts = Vec::new();
        // face centers, then corners
        for i in 0..d {
            let mut p = c.clone();
            p[i] = self.lo[i];
            pts.push(p.clone());
            p[i] = self.hi[i];
            pts.push(p);
        }
        if d > 1 {
            for mask in 0..(1usize << d.min(16)) {
                pts.push((0..d).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect());
            }
        }
        pts.truncate(count.max(2 * d));
        pts
    }
    fn is_point_symmetric(&self) -> bool {
        true
    }
}

/// Result of [`check_assumption1`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailReport {
    pub rho: f64,
    pub radii: Vec<f64>,
    /// `sup_u (x/‖x‖^ρ)·∇log π(x)` at `x = r u`.
    pub radial_drift: Vec<f64>,
    /// `sup_u (x/‖x‖)·∇π(x)/‖∇π(x)‖` at `x = r u`.
    pub contour_cosine: Vec<f64>,
    pub threshold: f64,
    /// Smallest radius beyond which every contour cosine is negative.
    pub fitted_r0: Option<f64>,
    pub pass: bool,
}

/// Evaluates the super-exponential tail and contour-normal conditions on a grid.
///
/// Passes iff the radial drift decreases strictly along the (increasing) grid and
/// ends below `threshold`, and the contour cosine stays negative beyond some r₀.
pub fn check_assumption1<T: TargetDensity + ?Sized>(
    target: &T,
    rho: f64,
    radii: &[f64],
    directions: &[Vec<f64>],
    threshold: f64,
) -> Result<TailReport> {
    if target.support_kind() != SupportKind::SuperExponential {
        return Err(Error::UnsupportedTarget("tail conditions need a super-exponential target".into()));
    }
    if !(rho > 1.0) {
        return Err(Error::InvalidArgument("tail exponent must exceed 1".into()));
    }
    let d = target.dim();
    let mut radial_drift = Vec::with_capacity(radii.len());
    let mut contour_cosine = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sup_drift = f64::NEG_INFINITY;
        let mut sup_cos = f64::NEG_INFINITY;
        for u in directions {
            check_dim(d, u)?;
            let un = norm(u);
            let x: Vec<f64> = u.iter().map(|v| r * v / un).collect();
            let g = target
                .grad_log_density(&x)
                .ok_or_else(|| Error::UnsupportedTarget("target has no gradient".into()))?;
            let xn = norm(&x);
            let xg = dot(&x, &g);
            sup_drift = sup_drift.max(xg / xn.powf(rho));
            sup_cos = sup_cos.max(xg / (xn * norm(&g)));
        }
        radial_drift.push(sup_drift);
        contour_cosine.push(sup_cos);
    }
    let decreasing = radial_drift.windows(2).all(|w| w[1] < w[0]);
    let below = radial_drift.last().is_some_and(|&v| v < threshold);
    let mut fitted_r0 = None;
    for (i, &r) in radii.iter().enumerate().rev() {
        if contour_cosine[i] < 0.0 {
            fitted_r0 = Some(r);
        } else {
            break;
        }
    }
    Ok(TailReport {
        rho,
        radii: radii.to_vec(),
        radial_drift,
        contour_cosine,
        threshold,
        fitted_r0,
        pass: decreasing && below && fitted_r0.is_some(),
    })
}

/// `count` directions on the unit sphere: the two signs for `d = 1`, evenly spaced
/// angles for `d = 2`, Gaussian draws otherwise.
pub fn sphere_directions<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => (0..count)
            .map(|_| {
                let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&v);
                v.iter_mut().for_each(|x| *x /= n);
                v
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};
    use crate::rng::seeded;

    // Inner limits follow the support along vertical lines, so the
    // integrands stay smooth on each piece.
    fn quad2<T: TargetDensity>(t: &T, lo: &[f64], hi: &[f64]) -> f64 {
        let opts = QuadOptions::with_abs_tol(1e-10);
        let c = t.center()[1];
        let inner = |x: f64| {
            let (a, b) = if t.diameter().is_some() {
                let p = [x, c];
                if t.log_density_unchecked(&p) == f64::NEG_INFINITY {
                    return 0.0;
                }
                let up = t.ray_exit(&p, &[0.0, 1.0]).unwrap_or(0.0);
                let down = t.ray_exit(&p, &[0.0, -1.0]).unwrap_or(0.0);
                (c - down, c + up)
            } else {
                (lo[1], hi[1])
            };
            if b <= a {
                return 0.0;
            }
            integrate(|y| t.log_density_unchecked(&[x, y]).exp(), a, b, opts).unwrap().value
        };
        integrate(inner, lo[0], hi[0], opts).unwrap().value
    }

    fn all_targets() -> Vec<BuiltinTarget> {
        vec![
            BuiltinTarget::UniformBall(UniformBall::new(vec![0.0], 1.0).unwrap()),
            BuiltinTarget::UniformBall(UniformBall::new(vec![0.5, -0.5], 1.5).unwrap()),
            BuiltinTarget::SmoothBump(SmoothBump::new(vec![0.0], 2.0, 0.1).unwrap()),
            BuiltinTarget::SmoothBump(SmoothBump::new(vec![0.0, 0.0], 1.0, 0.01).unwrap()),
            BuiltinTarget::Gaussian(Gaussian::standard(1)),
            BuiltinTarget::Gaussian(Gaussian::new(vec![1.0, -1.0], vec![1.0, 0.0, 0.5, 0.8]).unwrap()),
            BuiltinTarget::ExponentialPower(ExponentialPower::new(1, 4.0, 1.0).unwrap()),
            BuiltinTarget::ExponentialPower(ExponentialPower::new(2, 3.0, 1.5).unwrap()),
            BuiltinTarget::UniformBox(UniformBox::unit_interval()),
            BuiltinTarget::UniformBox(UniformBox::new(vec![-1.0, 0.0], vec![1.0, 0.5]).unwrap()),
        ]
    }

    #[test]
    fn normalization_by_quadrature() {
        for t in all_targets() {
            let (lo, hi) = t.bounding_box();
            let z = match t.dim() {
                1 => {
                    let mut pts = vec![lo[0], hi[0]];
                    pts.insert(1, t.center()[0]);
                    crate::quad::integrate_with_breaks(|x| t.log_density(&[x]).unwrap().exp(), &pts, QuadOptions::with_abs_tol(1e-11))
                        .unwrap()
                        .value
                }
                _ => quad2(&t, &lo, &hi),
            };
            assert!((z - 1.0).abs() < 1e-6, "{}: {z}", t.name());
        }
    }

    #[test]
    fn gaussian_log_density_examples() {
        let g = Gaussian::standard(1);
        let l0 = g.log_density(&[0.0]).unwrap();
        assert!((l0 + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let ratio = (l0 - g.log_density(&[1.0]).unwrap()).exp();
        assert!((ratio - 0.5f64.exp()).abs() < 1e-15);
        assert_eq!(
            g.log_density(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn outside_support_is_neg_infinity() {
        let b = UniformBall::new(vec![0.0], 1.0).unwrap();
        assert_eq!(b.log_density(&[2.0]).unwrap(), f64::NEG_INFINITY);
        assert!(b.log_density(&[1.0]).unwrap().is_finite());
        let bx = UniformBox::unit_interval();
        assert_eq!(bx.log_density(&[-1e-12]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn exponential_power_mode_at_origin() {
        let t = ExponentialPower::new(1, 4.0, 1.0).unwrap();
        let l0 = t.log_density(&[0.0]).unwrap();
        for k in -100..=100 {
            let x = k as f64 * 0.05;
            assert!(t.log_density(&[x]).unwrap() <= l0);
        }
        assert_eq!(t.max_log_density(), l0);
    }

    #[test]
    fn symmetric_targets_are_exactly_symmetric() {
        let mut rng = seeded(3);
        for t in all_targets() {
            if !t.is_point_symmetric() {
                continue;
            }
            let c = t.center();
            let (lo, hi) = t.bounding_box();
            for _ in 0..200 {
                let x: Vec<f64> = (0..t.dim()).map(|i| lo[i] + rng.random::<f64>() * (hi[i] - lo[i])).collect();
                let m: Vec<f64> = x.iter().zip(&c).map(|(a, ci)| 2.0 * ci - a).collect();
                let (a, b) = (t.log_density(&x).unwrap(), t.log_density(&m).unwrap());
                // exact for centered targets; reflection through a nonzero
                // center may round differently
                if c.iter().all(|&v| v == 0.0) {
                    assert_eq!(a, b, "{}", t.name());
                } else {
                    assert!(a == b || (a - b).abs() < 1e-12, "{}", t.name());
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(11);
        for t in all_targets() {
            if t.grad_log_density(&t.center()).is_none() {
                continue;
            }
            let d = t.dim();
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| 0.2 + 2.0 * rng.random::<f64>()).collect();
                let g = t.grad_log_density(&x).unwrap();
                for i in 0..d {
                    let h = 1e-5;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (t.log_density(&xp).unwrap() - t.log_density(&xm).unwrap()) / (2.0 * h);
                    let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
                    assert!(rel < 1e-5, "{} grad[{i}] {} vs fd {}", t.name(), g[i], fd);
                }
            }
        }
    }

    #[test]
    fn exponential_power_radial_drift_is_symbolic() {
        // x/‖x‖^ρ · ∇log π(x) = −(p/scale^p) ‖x‖^{p−ρ}
        let t = ExponentialPower::new(2, 3.0, 1.5).unwrap();
        let rho = 1.7;
        for &r in &[1.0, 3.0, 10.0] {
            let x = [r * 0.6, r * 0.8];
            let g = t.grad_log_density(&x).unwrap();
            let v = dot(&x, &g) / r.powf(rho);
            let expect = -(3.0 / 1.5f64.powi(3)) * r.powf(3.0 - rho);
            assert!((v - expect).abs() < 1e-12 * expect.abs(), "{v} vs {expect}");
        }
    }

    #[test]
    fn assumption1_examples() {
        let g = Gaussian::standard(1);
        let dirs = vec![vec![1.0], vec![-1.0]];
        let rep = check_assumption1(&g, 1.5, &[2.0, 5.0, 10.0], &dirs, -1.0).unwrap();
        let expect = [-(2f64.sqrt()), -(5f64.sqrt()), -(10f64.sqrt())];
        for (v, e) in rep.radial_drift.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(rep.pass);
        assert_eq!(rep.fitted_r0, Some(2.0));

        let ep = ExponentialPower::new(1, 4.0, 1.0).unwrap();
        let rep = check_assumption1(&ep, 2.0, &[1.0, 2.0], &dirs, -1.0).unwrap();
        assert!((rep.radial_drift[0] + 4.0).abs() < 1e-12);
        assert!((rep.radial_drift[1] + 16.0).abs() < 1e-12);

        let ball = UniformBall::new(vec![0.0], 1.0).unwrap();
        assert!(matches!(
            check_assumption1(&ball, 1.5, &[1.0], &dirs, -1.0),
            Err(Error::UnsupportedTarget(_))
        ));
    }

    #[test]
    fn assumption1_in_two_dimensions() {
        let t = Gaussian::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.6, 0.5]).unwrap();
        let dirs = sphere_directions(2, 64, &mut seeded(0));
        let rep = check_assumption1(&t, 1.5, &[2.0, 4.0, 8.0, 16.0, 32.0], &dirs, -1.0).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.contour_cosine.iter().all(|&c| c < 0.0));
    }

    #[test]
    fn direct_samplers_match_moments() {
        let mut rng = seeded(5);
        for t in all_targets() {
            let d = t.dim();
            let f = Functional::SquaredNorm;
            let truth = t.expectation(&f).unwrap();
            let n = 100_000;
            let mut out = vec![0.0; d];
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                assert!(t.sample(&mut rng, &mut out));
                assert!(t.log_density(&out).unwrap().is_finite());
                let v = f.eval(&out);
                sum += v;
                sum2 += v * v;
            }
            let mean = sum / n as f64;
            let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - truth).abs() < 4.0 * se, "{}: {mean} vs {truth} (se {se})", t.name());
        }
    }

    #[test]
    fn exponential_power_second_moment_oracle() {
        // Γ(3/4)/Γ(1/4) against direct quadrature of the moment integral
        let t = ExponentialPower::new(1, 4.0, 1.0).unwrap();
        let opts = QuadOptions::with_abs_tol(1e-13);
        let num = integrate(|x: f64| x * x * (-x.powi(4)).exp(), -10.0, 10.0, opts).unwrap().value;
        let den = integrate(|x: f64| (-x.powi(4)).exp(), -10.0, 10.0, opts).unwrap().value;
        let m2 = t.expectation(&Functional::Power { index: 0, power: 2 }).unwrap();
        assert!((m2 - num / den).abs() < 1e-12);
        assert!((m2 - 0.3379891200336424).abs() < 1e-12);
    }

    #[test]
    fn smooth_bump_floor_is_validated() {
        assert!(SmoothBump::new(vec![0.0], 1.0, 1e-9).is_err());
        let b = SmoothBump::new(vec![0.0], 1.0, 1e-8).unwrap();
        let ratio = (b.log_density(&[1.0]).unwrap() - b.max_log_density()).exp();
        assert!((ratio - 1e-8).abs() < 1e-15);
    }

    #[test]
    fn support_tags() {
        assert_eq!(UniformBox::unit_interval().support_kind(), SupportKind::CompactRegular);
        let b2 = UniformBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b2.support_kind(), SupportKind::Irregular);
        assert!(!b2.has_uniformly_continuous_normals());
        assert_eq!(Gaussian::standard(3).support_kind(), SupportKind::SuperExponential);
    }

    #[test]
    fn ray_exit_distances() {
        let b = UniformBall::new(vec![0.0, 0.0], 1.0).unwrap();
        let t = b.ray_exit(&[0.5, 0.0], &[2.0, 0.0]).unwrap();
        assert!((t - 0.25).abs() < 1e-15);
        let bx = UniformBox::unit_interval();
        assert!((bx.ray_exit(&[0.25], &[-0.5]).unwrap() - 0.5).abs() < 1e-15);
    }
}
