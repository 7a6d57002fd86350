//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use asm_core::adapt::{
    run_asm, run_coupled, run_truncated, AdaptConfig, ChainSummary, NullSink, RestrictionSchedule, StepSchedule,
    TraceRecord,
};
use asm_core::analysis::{
    boundary_probe_points, check_acc_envelope, check_lower_bound_small_scale, check_upper_bound_compact,
    estimate_drift, find_target_scale, growth_report, oracle_coherence, pi_sample_points, proposal_tv_lipschitz,
    slln_report, stability_report, thresholds_consistent, AccMethod, DriftMethod, MeanAccMethod,
};
use asm_core::kernel::acceptance_prob;
use asm_core::proposal::{
    check_profile_derivative_conditions, ProposalModel, RadialProfile, ScalingFunction, ShapeMatrix, DEFAULT_EPS_GRID,
};
use asm_core::quad::{integrate_semi_infinite, QuadOptions};
use asm_core::rng::seeded;
use asm_core::target::{
    BuiltinTarget, ExponentialPower, Functional, Gaussian, SmoothBump, TargetDensity, UniformBall, UniformBox,
};
use asm_core::{derive_seed, ChainRng};
use rand::Rng;

const N: u64 = 1_000_000;
const SEEDS: u64 = 32;
/// Last-half range of s on UniformBall, pinned from a 32-seed pilot (max 0.050).
const STABILITY_BAND: f64 = 0.1;
/// Floor for min φ(S_n) and cap for max φ(S_n)/n^0.1 on ExponentialPower(p = 4),
/// pinned from a 32-seed pilot (min 1.455, max 4.26).
const GROWTH_THETA_FLOOR: f64 = 0.5;
const GROWTH_CAP: f64 = 10.0;

struct Outcome {
    failures: Vec<String>,
}

impl Outcome {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id}: {name} :: {detail}");
        if !pass {
            self.failures.push(format!("{id} {name}"));
        }
    }
}

fn gaussian_model(d: usize) -> ProposalModel {
    ProposalModel::gaussian(d)
}

fn adapt_config(target: &dyn TargetDensity, alpha_star: f64, n: u64) -> AdaptConfig {
    let model = gaussian_model(target.dim());
    AdaptConfig::new(
        alpha_star,
        StepSchedule::new(1.0, 0.66).unwrap(),
        target.center(),
        AdaptConfig::default_s0(&model),
        n,
    )
    .unwrap()
}

fn chain(target: &BuiltinTarget, alpha_star: f64, seed: u64, fs: &[Functional]) -> ChainSummary {
    let model = gaussian_model(target.dim());
    let cfg = adapt_config(target, alpha_star, N);
    run_asm(target, &model, &cfg, fs, &mut seeded(seed), &mut NullSink).unwrap()
}

fn criterion1(out: &mut Outcome) {
    let t0 = Instant::now();
    let mut rng = seeded(1);
    let mut notes = Vec::new();

    // proposal symmetry, bit for bit
    let models = [
        ProposalModel::new(RadialProfile::Gaussian, ShapeMatrix::dense(vec![1.5, 0.4, 0.4, 0.7], 2).unwrap(), ScalingFunction::Exponential)
            .unwrap(),
        ProposalModel::new(RadialProfile::Student { gamma: 1.0 }, ShapeMatrix::diagonal(&[0.5, 2.0]).unwrap(), ScalingFunction::Exponential)
            .unwrap(),
    ];
    let mut symmetric = true;
    for m in &models {
        for _ in 0..1000 {
            let z: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
            let mz: Vec<f64> = z.iter().map(|v| -v).collect();
            let s = rng.random_range(-3.0..3.0);
            symmetric &= m.log_density(s, &z).unwrap().to_bits() == m.log_density(s, &mz).unwrap().to_bits();
        }
    }
    notes.push(format!("symmetry {symmetric}"));

    // detailed balance π(x)α(x,y)q(x−y) = π(y)α(y,x)q(y−x), log domain
    let targets = [
        BuiltinTarget::Gaussian(Gaussian::from_covariance(vec![0.3, -0.2], &[1.0, 0.5, 0.5, 2.0]).unwrap()),
        BuiltinTarget::ExponentialPower(ExponentialPower::new(2, 4.0, 1.0).unwrap()),
        BuiltinTarget::SmoothBump(SmoothBump::new(vec![0.0, 0.0], 1.5, 0.05).unwrap()),
        BuiltinTarget::UniformBall(UniformBall::new(vec![0.0, 0.0], 1.0).unwrap()),
    ];
    let mut worst_db: f64 = 0.0;
    for t in &targets {
        let mut pairs = 0;
        while pairs < 1000 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.2..1.2)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.2..1.2)).collect();
            let (lx, ly) = (t.log_density(&x).unwrap(), t.log_density(&y).unwrap());
            if lx == f64::NEG_INFINITY || ly == f64::NEG_INFINITY {
                continue;
            }
            pairs += 1;
            let s = rng.random_range(-1.0..1.0);
            let m = &models[pairs % 2];
            let dxy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dyx: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let lhs = lx + acceptance_prob(t, &x, &y).unwrap().ln() + m.log_density(s, &dxy).unwrap();
            let rhs = ly + acceptance_prob(t, &y, &x).unwrap().ln() + m.log_density(s, &dyx).unwrap();
            worst_db = worst_db.max((lhs - rhs).abs());
        }
    }
    let balance = worst_db <= 1e-12;
    notes.push(format!("detailed balance max |Δlog| {worst_db:.2e}"));

    // bounded increments on every step of a 1e5-step trace
    let g = BuiltinTarget::Gaussian(Gaussian::standard(1));
    let model = gaussian_model(1);
    let cfg = adapt_config(&g, 0.234, 100_000);
    let h = cfg.h_bound();
    let mut prev = cfg.s0;
    let mut bad_steps = 0u64;
    let mut sink = |r: &TraceRecord<'_>| {
        if (r.s - prev).abs() > r.eta * h * (1.0 + 1e-12) + 4.0 * f64::EPSILON * prev.abs() {
            bad_steps += 1;
        }
        prev = r.s;
        Ok(())
    };
    run_asm(&g, &model, &cfg, &[], &mut seeded(2), &mut sink).unwrap();
    let increments = bad_steps == 0;
    notes.push(format!("increment violations {bad_steps}"));

    // truncated traces stay in K_n
    let scaling = model.scaling();
    let mut outside = 0u64;
    for r in [
        RestrictionSchedule::Fixed { a1: 0.5, a2: 1.2 },
        RestrictionSchedule::PolyGrowth { theta1: 1.0, theta2: 2.5, beta: 0.1 },
    ] {
        let cfg = AdaptConfig { s0: 0.9, ..adapt_config(&g, 0.234, 100_000) };
        let mut sink = |rec: &TraceRecord<'_>| {
            if !r.contains(rec.n, rec.s, &scaling) {
                outside += 1;
            }
            Ok(())
        };
        let sum = run_truncated(&g, &model, &cfg, &r, &[], &mut seeded(3), &mut sink).unwrap();
        if sum.truncations == 0 {
            notes.push("restriction never bound".into());
            outside += 1;
        }
    }
    let truncation = outside == 0;
    notes.push(format!("truncated outside K_n {outside}"));

    // coupling: K's upper edge sits just under the free chain's max s over its first 1000 steps
    let cfg = AdaptConfig { s0: 0.0, ..adapt_config(&g, 0.234, 20_000) };
    let mut free_s = Vec::new();
    let mut sink = |r: &TraceRecord<'_>| {
        free_s.push((r.n, r.s));
        Ok(())
    };
    run_asm(&g, &model, &cfg, &[], &mut seeded(4), &mut sink).unwrap();
    let a2 = free_s.iter().take(1000).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) - 1e-9;
    let restriction = RestrictionSchedule::Fixed { a1: -5.0, a2 };
    let expected = free_s.iter().find(|p| p.1 > a2).map(|p| p.0);
    let coupling = match run_coupled(&g, &model, &cfg, &restriction, &seeded(4)) {
        Ok(rep) => {
            notes.push(format!("coupling diverges at {:?}, first violation {:?}", rep.first_divergence, expected));
            rep.first_divergence == expected && expected.is_some() && rep.truncated_within_k
        }
        Err(e) => {
            notes.push(format!("coupling error {e}"));
            false
        }
    };
    let elapsed = t0.elapsed().as_secs_f64();
    notes.push(format!("{elapsed:.2}s"));
    out.line(
        1,
        "exact identities",
        symmetric && balance && increments && truncation && coupling && elapsed < 10.0,
        notes.join("; "),
    );
}

fn criterion2(out: &mut Outcome) {
    let g = BuiltinTarget::Gaussian(Gaussian::standard(1));
    let model = gaussian_model(1);
    let ts = find_target_scale(&g, &model, 0.234, (0.0, 3.0), MeanAccMethod::Quadrature).unwrap();
    // closed form acc(θ) = (2/π) arctan(2/θ) gives θ* = 2/tan(0.117π)
    let closed = 2.0 / (0.117 * std::f64::consts::PI).tan();
    let t0 = Instant::now();
    let sum = chain(&g, 0.234, 2026, &[]);
    let elapsed = t0.elapsed().as_secs_f64();
    let dev_acc = (sum.mean_alpha_last_half - 0.234).abs();
    let rel = (sum.final_theta - ts.theta_star).abs() / ts.theta_star;
    out.line(
        2,
        "fixed point",
        dev_acc <= 0.02 && rel <= 0.1 && elapsed <= 10.0 && (ts.theta_star - closed).abs() < 1e-6,
        format!(
            "acc(last half) {:.5} (|Δ| {dev_acc:.4} ≤ 0.02); θ_N {:.4} vs θ* {:.6} (closed form {closed:.6}), rel {rel:.4} ≤ 0.1; {elapsed:.2}s",
            sum.mean_alpha_last_half, sum.final_theta, ts.theta_star
        ),
    );
}

// E x² under π ∝ exp(−x⁴), by quadrature over (0, ∞)
fn ep4_second_moment() -> f64 {
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 2000 };
    let num = integrate_semi_infinite(|x| x * x * (-x.powi(4)).exp(), 0.0, &[1.0, 3.0], opts).unwrap().value;
    let den = integrate_semi_infinite(|x| (-x.powi(4)).exp(), 0.0, &[1.0, 3.0], opts).unwrap().value;
    num / den
}

fn criterion3_and_5(out: &mut Outcome) {
    let g = BuiltinTarget::Gaussian(Gaussian::standard(1));
    let ep = BuiltinTarget::ExponentialPower(ExponentialPower::new(1, 4.0, 1.0).unwrap());
    let x2 = Functional::Power { index: 0, power: 2 };
    let half = Functional::HalfSpace { index: 0, threshold: 0.0 };
    let truth_ep = ep4_second_moment();
    let pinned = 0.3379891200336424;
    let mut ok = [0usize; 3];
    let mut worst = [0.0f64; 3];
    let mut ep_runs = Vec::new();
    for k in 0..SEEDS {
        let sg = chain(&g, 0.234, derive_seed(3001, k), &[x2.clone(), half.clone()]);
        let rep = slln_report(&sg.functionals, &[1.0, 0.5], 4.0).unwrap();
        for (i, e) in rep.iter().enumerate() {
            ok[2 * i] += e.pass as usize;
            worst[2 * i] = worst[2 * i].max(e.z.abs());
        }
        let se = chain(&ep, 0.234, derive_seed(3002, k), &[x2.clone()]);
        let rep = slln_report(&se.functionals, &[truth_ep], 4.0).unwrap();
        ok[1] += rep[0].pass as usize;
        worst[1] = worst[1].max(rep[0].z.abs());
        ep_runs.push(se);
    }
    let oracle_ok = (truth_ep - pinned).abs() < 1e-10;
    out.line(
        3,
        "SLLN",
        ok.iter().all(|&c| c >= 31) && oracle_ok,
        format!(
            "|z| ≤ 4 in {}/32 (Gaussian x², max |z| {:.2}), {}/32 (EP4 x², truth {truth_ep:.12}, max |z| {:.2}), {}/32 (1{{x>0}}, max |z| {:.2})",
            ok[0], worst[0], ok[1], worst[1], ok[2], worst[2]
        ),
    );
    let gr = growth_report(&ep_runs, GROWTH_THETA_FLOOR, GROWTH_CAP).unwrap();
    out.line(
        5,
        "growth",
        gr.pass,
        format!(
            "min φ(S_n) {:.4} ≥ {GROWTH_THETA_FLOOR}; max φ(S_n)/n^0.1 {:.4} ≤ {GROWTH_CAP}; max second/first-half ratio {:.4} ≤ 10",
            gr.min_theta, gr.max_growth, gr.max_second_half_jump
        ),
    );
}

fn criterion4(out: &mut Outcome) {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1usize, 2] {
        let ball = BuiltinTarget::UniformBall(UniformBall::new(vec![0.0; d], 1.0).unwrap());
        for alpha_star in [0.1, 0.234, 0.44] {
            let runs: Vec<ChainSummary> =
                (0..SEEDS).map(|k| chain(&ball, alpha_star, derive_seed(4000 + d as u64, k), &[])).collect();
            let rep = stability_report(&runs, STABILITY_BAND, 0.01, 31, None).unwrap();
            let max_range = rep.seeds.iter().map(|s| s.range_last_half).fold(0.0, f64::max);
            let tag = if alpha_star < 0.44 { "" } else { " (reported, not gated)" };
            parts.push(format!(
                "d={d} α*={alpha_star}: max range {max_range:.4}, no trend {}/32{tag}",
                rep.without_trend
            ));
            if alpha_star < 0.44 {
                pass &= rep.pass;
            }
        }
    }
    out.line(4, "stability", pass, format!("band {STABILITY_BAND}; {}", parts.join("; ")));
}

fn criterion6(out: &mut Outcome) {
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let compact: Vec<BuiltinTarget> = vec![
        BuiltinTarget::UniformBox(UniformBox::unit_interval()),
        BuiltinTarget::UniformBall(UniformBall::new(vec![0.0], 1.0).unwrap()),
        BuiltinTarget::UniformBall(UniformBall::new(vec![0.0, 0.0], 1.0).unwrap()),
    ];
    let alpha_star = 0.234;
    let mc = AccMethod::MonteCarlo { n: 20_000, seed: 6 };
    let upper_grid: Vec<f64> = (-4..=10).map(|k| (k as f64 * 0.5).ln_1p().max(-3.0) + k as f64 * 0.25).collect();
    let lower_grid: Vec<f64> = [1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3].iter().map(|t: &f64| t.ln()).collect();
    for (i, t) in compact.iter().enumerate() {
        let mut xs = pi_sample_points(t, 20, derive_seed(60, i as u64)).unwrap();
        xs.extend(boundary_probe_points(t, 8));
        let m = gaussian_model(t.dim());
        let up = check_upper_bound_compact(t, &m, alpha_star, &upper_grid, &xs, mc).unwrap();
        let lo = check_lower_bound_small_scale(t, &m, alpha_star, &lower_grid, &xs, mc).unwrap();
        let consistent = thresholds_consistent(&lo, &up);
        pass &= up.pass && lo.pass && consistent;
        parts.push(format!(
            "{}(d={}): upper pass {} (θ threshold {:.3}, theory θ {:.3}), lower pass {} (θ threshold {:.4}, min acc {:.4} ≥ {:.3}), thresholds ordered {consistent}",
            t.name(),
            t.dim(),
            up.pass,
            up.fitted_value("threshold_s").map(f64::exp).unwrap_or(f64::NAN),
            up.fitted_value("theory_threshold_s").map(f64::exp).unwrap_or(f64::NAN),
            lo.pass,
            lo.fitted_value("threshold_s").map(f64::exp).unwrap_or(f64::NAN),
            lo.values[0],
            lo.threshold.unwrap()
        ));
    }
    let eps = [0.3, 0.1, 0.05];
    let envelopes = [
        BuiltinTarget::Gaussian(Gaussian::standard(1)),
        BuiltinTarget::ExponentialPower(ExponentialPower::new(1, 4.0, 1.0).unwrap()),
        BuiltinTarget::Gaussian(Gaussian::standard(2)),
    ];
    for t in &envelopes {
        let d = t.dim();
        let xs: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 5.0]
            .iter()
            .map(|r| {
                let mut x = vec![0.0; d];
                x[0] = *r;
                x
            })
            .collect();
        let rep = check_acc_envelope(t, &gaussian_model(d), &eps, &xs, AccMethod::Quadrature, 1e4).unwrap();
        pass &= rep.pass;
        parts.push(format!("envelope {}(d={d}): c(ε) = {:?}", t.name(), rep.values));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    pass &= elapsed <= 300.0;
    out.line(6, "proposition bounds", pass, format!("{}; {elapsed:.1}s", parts.join("; ")));
}

fn criterion7(out: &mut Outcome) {
    let g = Gaussian::standard(1);
    let m = gaussian_model(1);
    let mut pass = true;
    let mut parts = Vec::new();
    let grid: Vec<Vec<f64>> = (-100..=100).map(|k| vec![k as f64 * 0.5]).collect();
    for theta in [0.5, 1.0, 2.0] {
        let rep = estimate_drift(&g, &m, f64::ln(theta), &grid, DriftMethod::Quadrature, None).unwrap();
        let tail_max = rep.grid.iter().zip(&rep.values).filter(|(r, _)| **r >= 5.0).map(|(_, v)| *v).fold(0.0, f64::max);
        let b = rep.fitted_value("b").unwrap_or(f64::INFINITY);
        let ok = rep.pass && tail_max < 1.0 && b.is_finite();
        pass &= ok;
        parts.push(format!("drift θ={theta}: max P V/V over |x| ≥ 5 = {tail_max:.5}, b = {b:.4}"));
    }
    for profile in [RadialProfile::Gaussian, RadialProfile::Student { gamma: 1.0 }] {
        for d in [1, 2] {
            let model = ProposalModel::new(profile, ShapeMatrix::identity(d), ScalingFunction::Exponential).unwrap();
            let pairs: Vec<(f64, f64)> = [(-1.0, -0.9), (0.0, 0.1), (0.0, 0.01), (1.0, 1.05)].to_vec();
            let rep = proposal_tv_lipschitz(&model, &pairs).unwrap();
            let worst = rep.std_errors.iter().copied().fold(0.0, f64::max);
            pass &= rep.pass;
            parts.push(format!("TV {profile:?} d={d}: max halving drift {worst:.4} ≤ 0.2"));
        }
    }
    for profile in [RadialProfile::Gaussian, RadialProfile::Student { gamma: 1.0 }] {
        let rep = check_profile_derivative_conditions(&profile, 1, &DEFAULT_EPS_GRID, (0.5, 1.5)).unwrap();
        pass &= rep.pass;
        parts.push(format!("derivative {profile:?}: c1 {:.4} pass {}", rep.fitted_c1, rep.pass));
    }
    out.line(7, "appendix checks", pass, parts.join("; "));
}

fn criterion8(out: &mut Outcome) {
    let targets: Vec<BuiltinTarget> = vec![
        BuiltinTarget::UniformBall(UniformBall::new(vec![0.0], 1.0).unwrap()),
        BuiltinTarget::UniformBall(UniformBall::new(vec![0.0, 0.0], 1.0).unwrap()),
        BuiltinTarget::SmoothBump(SmoothBump::new(vec![0.0], 1.0, 0.05).unwrap()),
        BuiltinTarget::SmoothBump(SmoothBump::new(vec![0.0, 0.0], 1.0, 0.05).unwrap()),
        BuiltinTarget::Gaussian(Gaussian::standard(1)),
        BuiltinTarget::Gaussian(Gaussian::from_covariance(vec![0.0, 0.0], &[1.0, 0.6, 0.6, 2.0]).unwrap()),
        BuiltinTarget::ExponentialPower(ExponentialPower::new(1, 4.0, 1.0).unwrap()),
        BuiltinTarget::ExponentialPower(ExponentialPower::new(2, 3.0, 1.0).unwrap()),
        BuiltinTarget::UniformBox(UniformBox::unit_interval()),
        BuiltinTarget::UniformBox(UniformBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut rng: ChainRng = seeded(8);
    for (i, t) in targets.iter().enumerate() {
        let xs = pi_sample_points(t, 20, derive_seed(80, i as u64)).unwrap();
        let pts: Vec<(Vec<f64>, f64)> = xs.into_iter().map(|x| (x, rng.random_range(-2.5..2.5))).collect();
        let rep = oracle_coherence(t, &gaussian_model(t.dim()), &pts, 10_000, derive_seed(81, i as u64)).unwrap();
        let worst = rep.values.iter().map(|z| z.abs()).fold(0.0, f64::max);
        pass &= rep.pass;
        parts.push(format!("{}(d={}) max |z| {worst:.2}", t.name(), t.dim()));
    }
    out.line(8, "oracle coherence", pass, parts.join("; "));
}

fn main() {
    let mut out = Outcome { failures: Vec::new() };
    criterion1(&mut out);
    criterion2(&mut out);
    criterion3_and_5(&mut out);
    criterion4(&mut out);
    criterion6(&mut out);
    criterion7(&mut out);
    criterion8(&mut out);
    if out.failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {:?}", out.failures);
        std::process::exit(1);
    }
}
