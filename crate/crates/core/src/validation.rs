//! Property suites over the gallery: equilibria, comparison, invariance,
//! equivariance, moment identities and speed orderings.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::field::GridField;
use crate::gallery;
use crate::kernel::{Atom, Kernel};
use crate::linear_ops::{apply_atomic, exp_series_measure};
use crate::reaction::ReactionFn;
use crate::semiflow::EvolutionProblem;
use crate::speeds;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn new(checks: Vec<CheckOutcome>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

/// Run `body` and time it; an error counts as a failure.
pub fn timed(name: &str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = match body() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn gallery_kernel(id: &str) -> Kernel {
    gallery::kernel(id).expect("gallery id")
}

/// Closed form of `u' = u (1 - u)`.
pub fn logistic(u0: f64, t: f64) -> f64 {
    u0 / (u0 + (1.0 - u0) * (-t).exp())
}

/// Constants: 0 and 1 fixed to 1e-12, 0.5 follows the logistic curve to 1e-6.
pub fn equilibria() -> CheckOutcome {
    timed("equilibria", || {
        let mut worst_fixed = 0.0f64;
        let mut worst_logistic = 0.0f64;
        for (_, k) in gallery::light_tailed_kernels() {
            let p = EvolutionProblem::new(k.discretize(0.1, 1e-10)?, ReactionFn::kpp());
            for c in [0.0, 1.0] {
                let u = p.evolve(&GridField::constant(-10.0, 0.1, 201, c)?, 1.0)?;
                let err = u.values().iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
                worst_fixed = worst_fixed.max(err);
            }
            let u = p.evolve(&GridField::constant(-10.0, 0.1, 201, 0.5)?, 1.0)?;
            let target = logistic(0.5, 1.0);
            let err = u
                .values()
                .iter()
                .chain([u.left_limit(), u.right_limit()].iter())
                .map(|v| (v - target).abs())
                .fold(0.0, f64::max);
            worst_logistic = worst_logistic.max(err);
        }
        Ok((
            worst_fixed <= 1e-12 && worst_logistic <= 1e-6,
            format!("fixed-point drift {worst_fixed:.2e}, logistic error {worst_logistic:.2e}"),
        ))
    })
}

/// Constants in (0, 1) strictly increase under the time-1 map.
pub fn monostability() -> CheckOutcome {
    timed("monostability", || {
        let mut ok = true;
        for (_, k) in gallery::light_tailed_kernels() {
            for (_, f) in gallery::reactions() {
                let q = EvolutionProblem::new(k.discretize(0.2, 1e-10)?, f).time_map(1.0)?;
                for a in [0.1, 0.5, 0.9] {
                    let u = q.apply(&GridField::constant(-5.0, 0.2, 51, a)?)?;
                    ok &= u.min_value() > a;
                }
            }
        }
        Ok((ok, "constants 0.1, 0.5, 0.9 on every light-tailed kernel and reaction".into()))
    })
}

/// Random nondecreasing field on the grid: a sum of up to six ramps with
/// random positions, widths and heights adding to 1.
pub fn random_monotone(rng: &mut impl Rng, x_min: f64, h: f64, n: usize, span: f64) -> Result<GridField> {
    let parts = rng.gen_range(1..=6);
    let heights: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = heights.iter().sum();
    let mut values = vec![0.0; n];
    for hgt in heights {
        let x0 = rng.gen_range(-span..span);
        let width = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..4.0) };
        let ramp = GridField::ramp_profile(x_min, h, n, x0, width)?;
        for (v, r) in values.iter_mut().zip(ramp.values()) {
            *v += hgt / total * r;
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    GridField::new(x_min, h, values, 0.0, 1.0)
}

/// Summary of [`comparison_pairs`].
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonStats {
    pub pairs: usize,
    pub checks: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Evolve `pairs` seeded ordered monotone pairs `u1 <= u2` and record how often
/// the order fails at the given times (beyond `tol`).
pub fn comparison_pairs(kernel: &Kernel, pairs: usize, times: &[f64], seed: u64, tol: f64) -> Result<ComparisonStats> {
    let (x_min, h, n) = (-40.0, 0.1, 801);
    let problem = EvolutionProblem::new(kernel.discretize(h, 1e-10)?, ReactionFn::kpp());
    let results: Vec<Result<(usize, f64)>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let v = random_monotone(&mut rng, x_min, h, n, 10.0)?;
            let w = random_monotone(&mut rng, x_min, h, n, 10.0)?;
            let (mut u1, mut u2) = (v.min_with(&w)?, v.max_with(&w)?);
            let mut t = 0.0;
            let mut bad = 0;
            let mut worst = f64::NEG_INFINITY;
            for &target in times {
                u1 = problem.evolve(&u1, target - t)?;
                u2 = problem.evolve(&u2, target - t)?;
                t = target;
                let excess = u1.max_excess_over(&u2)?;
                worst = worst.max(excess);
                if excess > tol {
                    bad += 1;
                }
            }
            Ok((bad, worst))
        })
        .collect();
    let mut stats = ComparisonStats {
        pairs,
        checks: pairs * times.len(),
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    for r in results {
        let (bad, worst) = r?;
        stats.violations += bad;
        stats.worst_excess = stats.worst_excess.max(worst);
    }
    Ok(stats)
}

pub fn comparison(kernel_ids: &[&str], pairs: usize, t_end: f64, seed: u64) -> CheckOutcome {
    timed("comparison", || {
        let mut times: Vec<f64> = [0.5, 1.0, t_end].into_iter().filter(|t| *t <= t_end).collect();
        times.dedup();
        let mut details = Vec::new();
        let mut ok = true;
        for id in kernel_ids {
            let s = comparison_pairs(&gallery_kernel(id), pairs, &times, seed, 1e-8)?;
            ok &= s.violations == 0;
            details.push(format!("{id}: {} violations, worst excess {:.2e}", s.violations, s.worst_excess));
        }
        Ok((ok, details.join("; ")))
    })
}

/// Largest range excursion and monotonicity defect over a ramp run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvarianceStats {
    pub min_value: f64,
    pub max_value: f64,
    pub worst_backstep: f64,
}

pub fn invariance_run(kernel: &Kernel, reaction: &ReactionFn, h: f64, t_end: f64) -> Result<InvarianceStats> {
    let cutoff = gallery::default_cutoff(kernel);
    let problem = EvolutionProblem::new(kernel.discretize(h, cutoff)?, reaction.clone());
    let (x_min, x_max) = (-150.0, 150.0);
    let n = ((x_max - x_min) / h).round() as usize + 1;
    let u0 = GridField::ramp_profile(x_min, h, n, 50.0, 1.0)?;
    let mut stats = InvarianceStats {
        min_value: 0.0,
        max_value: 1.0,
        worst_backstep: 0.0,
    };
    problem.evolve_observed(&u0, t_end, 1.0, |_, u| {
        stats.min_value = stats.min_value.min(u.min_value());
        stats.max_value = stats.max_value.max(u.max_value());
        let back = u
            .values()
            .windows(2)
            .map(|w| w[0] - w[1])
            .chain([u.left_limit() - u.values()[0], u.values()[u.len() - 1] - u.right_limit()])
            .fold(0.0, f64::max);
        stats.worst_backstep = stats.worst_backstep.max(back);
        Ok(true)
    })?;
    Ok(stats)
}

/// Ramp runs over every gallery kernel and reaction stay in `[-1e-9, 1 + 1e-9]`
/// and nondecreasing to `1e-10` between neighbours.
pub fn invariance(t_end: f64) -> CheckOutcome {
    timed("invariance", || {
        let cases: Vec<(&str, Kernel, &str, ReactionFn)> = gallery::kernels()
            .into_iter()
            .flat_map(|(kid, k)| gallery::reactions().into_iter().map(move |(rid, f)| (kid, k.clone(), rid, f)))
            .collect();
        let results: Vec<Result<(String, InvarianceStats, f64)>> = cases
            .par_iter()
            .map(|(kid, k, rid, f)| {
                let h = if k.has_finite_mgf_somewhere() { 0.1 } else { 0.5 };
                Ok((format!("{kid}/{rid}"), invariance_run(k, f, h, t_end)?, h))
            })
            .collect();
        let mut ok = true;
        let mut bad = Vec::new();
        let mut worst = (0.0f64, 0.0f64);
        for r in results {
            let (name, s, _) = r?;
            let pass = s.min_value >= -1e-9 && s.max_value <= 1.0 + 1e-9 && s.worst_backstep <= 1e-10;
            worst.0 = worst.0.max((-s.min_value).max(s.max_value - 1.0));
            worst.1 = worst.1.max(s.worst_backstep);
            if !pass {
                ok = false;
                bad.push(name);
            }
        }
        Ok((
            ok,
            format!(
                "{} runs to T = {t_end}; worst range excursion {:.2e}, worst backstep {:.2e}{}",
                cases.len(),
                worst.0,
                worst.1,
                if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
            ),
        ))
    })
}

/// Shifting by whole cells commutes with evolution on interior nodes.
pub fn translation_equivariance() -> CheckOutcome {
    timed("translation_equivariance", || {
        let (x_min, h, n) = (-40.0, 0.1, 801);
        let t = 2.0;
        let mut worst = 0.0f64;
        for id in ["two_atom", "gaussian", "atom_gaussian_mix"] {
            let p = EvolutionProblem::new(gallery_kernel(id).discretize(h, 1e-10)?, ReactionFn::kpp());
            let u0 = GridField::ramp_profile(x_min, h, n, -3.0, 2.5)?;
            let k = 17;
            let a = p.evolve(&u0.shift_cells(k), t)?;
            let b = p.evolve(&u0, t)?.shift_cells(k);
            let steps = (t / p.dt()).ceil() as usize;
            // each RK4 step applies the stencil four times
            let margin = 4 * p.weights().radius() * steps + k as usize;
            for i in margin..n.saturating_sub(margin) {
                worst = worst.max((a.values()[i] - b.values()[i]).abs());
            }
        }
        Ok((worst == 0.0, format!("largest interior difference {worst:e}")))
    })
}

/// Moment, reflection and discretization properties of the gallery kernels.
pub fn kernel_properties() -> CheckOutcome {
    timed("kernel_properties", || {
        let mut worst_quad = 0.0f64;
        let mut ok = true;
        for (_, k) in gallery::light_tailed_kernels() {
            for l in [0.25, 0.5, 1.0, 1.5] {
                let closed = k.exp_moment(-l);
                let quad = k.exp_moment_quadrature(-l);
                worst_quad = worst_quad.max(((closed - quad) / closed).abs());
            }
            ok &= k.reflect().reflect() == k;
            let w = k.discretize(0.05, 1e-10)?;
            ok &= w.mass() == k.total_mass() && w.weights().iter().all(|v| *v >= 0.0);
        }
        for id in ["two_atom", "uniform_centered", "gaussian", "laplace"] {
            let k = gallery_kernel(id);
            ok &= [0.01, 0.5, 1.0, 1.9].iter().all(|l| k.mgf(*l).is_ok_and(|m| m >= 1.0));
        }
        ok &= worst_quad <= 1e-8;
        Ok((ok, format!("worst quadrature/closed-form gap {worst_quad:.2e}")))
    })
}

/// Stored reaction constants against finite differences and dense sampling.
pub fn reaction_properties() -> CheckOutcome {
    timed("reaction_properties", || {
        let mut ok = true;
        let mut notes = Vec::new();
        for (id, f) in gallery::reactions() {
            let d = 1e-8;
            let fd = f.eval(d) / d;
            let fd_ok = (fd - f.fprime0()).abs() <= 1e-6;
            let sampled = (1..=300_000)
                .map(|k| {
                    let h = 1.5 * k as f64 / 300_000.0;
                    f.eval(h) / h
                })
                .fold(f64::NEG_INFINITY, f64::max)
                .max(f.fprime0());
            let sup_ok = (sampled - f.sup_ratio()).abs() <= 1e-6;
            // K bound for g(u) = -u + f(u): -(g(a) - g(b)) / (a - b) <= 1 + Lip f
            let k_ok = (0..=300).all(|i| {
                let a = -0.5 + (2.0 - 1e-3) * i as f64 / 300.0;
                let b = a + 1e-3;
                let g = |u: f64| -u + f.eval(u);
                -(g(b) - g(a)) / (b - a) <= 1.0 + f.lipschitz() + 1e-9
            });
            ok &= fd_ok && sup_ok && k_ok;
            notes.push(format!(
                "{id}: f'(0) {} (fd {fd_ok}), sup {} (sampled {sup_ok}), K {k_ok}",
                f.fprime0(),
                f.sup_ratio()
            ));
        }
        Ok((ok, notes.join("; ")))
    })
}

/// `c_lower < c_linear <= c_upper` for kpp-type pairs, with `c_upper = c_linear`
/// when `M(lambda*) >= 1`.
pub fn speed_ordering() -> CheckOutcome {
    timed("speed_ordering", || {
        let mut ok = true;
        let mut notes = Vec::new();
        for (kid, k) in gallery::light_tailed_kernels() {
            for (rid, f) in gallery::reactions() {
                if !(f.is_kpp_type() && f.fprime0() > 0.0) {
                    continue;
                }
                let lin = speeds::linear_speed(&k, &f);
                let up = speeds::upper_bound(&k, &f);
                let low = speeds::lower_bound(&k, &f)?;
                let order = low.value < lin.value && lin.value <= up.value + 1e-9;
                let tight = !lin.attained || k.mgf(lin.lambda)? < 1.0 || (up.value - lin.value).abs() <= 1e-6;
                if !(order && tight) {
                    ok = false;
                    notes.push(format!("{kid}/{rid}: {} {} {}", low.value, lin.value, up.value));
                }
            }
        }
        Ok((ok, if notes.is_empty() { "all kpp-type pairs ordered".into() } else { notes.join("; ") }))
    })
}

fn atomic_kernels() -> Vec<(&'static str, Kernel)> {
    let k = |atoms: Vec<Atom>| Kernel::from_atoms(atoms).expect("valid atoms");
    vec![
        ("two_atom", gallery_kernel("two_atom")),
        ("unit_shift", gallery_kernel("unit_shift")),
        ("origin", Kernel::dirac(0.0)),
        ("three_point", k(vec![Atom::new(-1.0, 0.25), Atom::new(0.0, 0.5), Atom::new(2.0, 0.25)])),
        ("skewed_pair", k(vec![Atom::new(-0.5, 0.3), Atom::new(1.5, 0.7)])),
    ]
}

/// `∫ e^{lambda y} d(series of mû) = e^{M(lambda)}` for atomic kernels.
pub fn series_identity(terms: usize) -> CheckOutcome {
    timed("series_identity", || {
        let mut worst = 0.0f64;
        for (_, k) in atomic_kernels() {
            let s = exp_series_measure(&k.reflect(), terms)?;
            for l in [0.5, 1.0, 2.0] {
                let exact = k.mgf(l)?.exp();
                worst = worst.max((s.result.exp_moment(l) - exact).abs() / exact);
            }
        }
        Ok((worst <= 1e-6, format!("worst relative error {worst:.2e} with {terms} terms")))
    })
}

/// `v + mû * v <= nu * v` on nonnegative ramps, `nu` the series measure of `mû`.
pub fn series_domination(terms: usize) -> CheckOutcome {
    timed("series_domination", || {
        let mut worst = f64::NEG_INFINITY;
        for (_, k) in atomic_kernels() {
            let mh = k.reflect();
            let nu = exp_series_measure(&mh, terms)?.result;
            for (x0, width) in [(0.0, 0.0), (-3.0, 2.0), (5.0, 7.5)] {
                let v = GridField::ramp_profile(-20.0, 0.25, 161, x0, width)?;
                let lhs = apply_atomic(&mh, &v)?;
                let rhs = apply_atomic(&nu, &v)?;
                for i in 0..v.len() {
                    worst = worst.max(v.values()[i] + lhs.values()[i] - rhs.values()[i]);
                }
            }
        }
        Ok((worst <= 1e-12, format!("largest (v + mû*v) - nu*v = {worst:.2e}")))
    })
}

/// The series measure applied to a field matches the time-1 map of `v_t = mû * v`.
pub fn series_vs_flow(terms: usize) -> CheckOutcome {
    timed("series_vs_flow", || {
        let mut worst_margin = f64::NEG_INFINITY;
        let mut worst_gap = 0.0f64;
        for id in ["two_atom", "unit_shift"] {
            let k = gallery_kernel(id);
            let mh = k.reflect();
            let s = exp_series_measure(&mh, terms)?;
            let h = 0.1;
            let v = GridField::ramp_profile(-30.0, h, 601, -2.0, 3.0)?;
            let flow = EvolutionProblem::linear(mh.discretize(h, 0.0)?, 0.0).with_dt(0.01)?.evolve(&v, 1.0)?;
            let series = apply_atomic(&s.result, &v)?;
            let gap = flow.max_abs_diff(&series)?;
            worst_gap = worst_gap.max(gap);
            worst_margin = worst_margin.max(gap - (1e-6 + s.tail_bound));
        }
        Ok((worst_margin <= 0.0, format!("largest gap {worst_gap:.2e}")))
    })
}

/// The lower bound agrees with its series-measure recomputation.
pub fn lower_bound_two_routes(terms: usize) -> CheckOutcome {
    timed("lower_bound_two_routes", || {
        let mut worst = 0.0f64;
        let mut ok = true;
        for (_, k) in atomic_kernels() {
            let f = ReactionFn::kpp();
            let direct = speeds::lower_bound(&k, &f)?;
            let (series, tail) = speeds::lower_bound_from_series(&k, &f, terms)?;
            let gap = (direct.value - series.value).abs();
            if direct.attained {
                worst = worst.max(gap);
                ok &= gap <= 1e-6 + tail;
            }
        }
        Ok((ok, format!("largest gap {worst:.2e}")))
    })
}

/// Every suite; `pairs` and the two horizons size the comparison and invariance runs.
pub fn run_suite(pairs: usize, comparison_t: f64, invariance_t: f64, seed: u64) -> ValidationReport {
    let checks = vec![
        equilibria(),
        monostability(),
        comparison(&["two_atom", "uniform_centered", "gaussian"], pairs, comparison_t, seed),
        invariance(invariance_t),
        translation_equivariance(),
        kernel_properties(),
        reaction_properties(),
        speed_ordering(),
        series_identity(30),
        series_domination(30),
        series_vs_flow(30),
        lower_bound_two_routes(40),
    ];
    ValidationReport::new(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fields_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_monotone(&mut rng, -20.0, 0.1, 401, 10.0).unwrap();
            assert!(u.is_nondecreasing(0.0));
            assert!(u.min_value() >= 0.0 && u.max_value() <= 1.0);
        }
    }

    #[test]
    fn cheap_suites_pass() {
        for c in [
            equilibria(),
            translation_equivariance(),
            kernel_properties(),
            reaction_properties(),
            speed_ordering(),
            series_identity(30),
            series_domination(30),
            series_vs_flow(30),
            lower_bound_two_routes(40),
        ] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
