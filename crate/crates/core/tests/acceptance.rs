//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use nonlocal_kpp::config::ExperimentConfig;
use nonlocal_kpp::experiment::{Experiment, FrontRun};
use nonlocal_kpp::field::GridField;
use nonlocal_kpp::fronts::{acceleration_test, track_fronts, AccelerationReport, TrackOptions};
use nonlocal_kpp::gallery;
use nonlocal_kpp::reaction::ReactionFn;
use nonlocal_kpp::semiflow::EvolutionProblem;
use nonlocal_kpp::speeds::{self, existence_verdict, Verdict};
use nonlocal_kpp::validation::{self, CheckOutcome};
use nonlocal_kpp::weinberger::{bisect_spreading_speed, RecursionConfig};
use nonlocal_kpp::Result;

const TWO_ATOM_SPEED: f64 = 1.508_879_561_538_32;
const SEED: u64 = 20_240_611;

struct Criterion {
    id: usize,
    title: &'static str,
    budget_s: Option<f64>,
    passed: bool,
    detail: String,
    seconds: f64,
}

fn criterion(id: usize, title: &'static str, budget_s: Option<f64>, body: impl FnOnce() -> Result<(bool, String)>) -> Criterion {
    let start = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    let seconds = start.elapsed().as_secs_f64();
    let in_budget = budget_s.is_none_or(|b| seconds < b);
    Criterion {
        id,
        title,
        budget_s,
        passed: passed && in_budget,
        detail: if in_budget { detail } else { format!("{detail}; over the {}s budget", budget_s.unwrap()) },
        seconds,
    }
}

fn from_checks(checks: &[CheckOutcome]) -> (bool, String) {
    let passed = checks.iter().all(|c| c.passed);
    let detail = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join(" | ");
    (passed, detail)
}

/// Ramp at x0 = 50 on [-150, 150], tracked to T = 40, fitted on [20, 40].
fn front_run(kernel_id: &str, reaction_id: &str, h: f64) -> Result<FrontRun> {
    let mut cfg = ExperimentConfig::for_gallery(kernel_id);
    cfg.reaction = gallery::reaction(reaction_id).expect("gallery reaction").family().clone();
    cfg.grid.h = h;
    Experiment::new(cfg)?.fronts()
}

fn level_spread(run: &FrontRun) -> f64 {
    let cs: Vec<f64> = run.fits.iter().flatten().map(|f| f.c_measured).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(*c), b.max(*c)));
    (hi - lo) / hi
}

fn quantitative(run: &FrontRun, oracle: f64) -> (bool, String) {
    match run.c_measured() {
        Some(c) => {
            let rel = (c - oracle).abs() / oracle;
            (
                rel <= 0.05,
                format!(
                    "c_measured {c:.5} vs {oracle:.5} (rel {:.2}%); level speeds spread {:.2}%",
                    100.0 * rel,
                    100.0 * level_spread(run)
                ),
            )
        }
        None => (false, "no fitted speed".into()),
    }
}

/// Heavy-tail protocol: h = 0.5 on [-2500, 800], ramp near the right edge, T = 60.
fn acceleration_run(kernel_id: &str) -> Result<(AccelerationReport, Verdict)> {
    let (x_min, x_max, h) = (-2500.0, 800.0, 0.5);
    let n = ((x_max - x_min) / h) as usize + 1;
    let k = gallery::kernel(kernel_id).expect("gallery kernel");
    let f = ReactionFn::kpp();
    let weights = k.discretize(h, gallery::default_cutoff(&k))?;
    let reach = weights.radius() as f64 * h;
    let problem = EvolutionProblem::new(weights, f.clone());
    let u0 = GridField::ramp_profile(x_min, h, n, x_max - reach - 20.0, 1.0)?;
    let opts = TrackOptions {
        levels: vec![0.5],
        t_end: 60.0,
        snap_dt: 0.5,
        ..TrackOptions::default()
    };
    let trace = track_fronts(&problem, &u0, &opts)?.remove(0);
    Ok((acceleration_test(&trace)?, existence_verdict(&k, &f)))
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut shared: Vec<(&str, Option<FrontRun>)> = Vec::new();

    results.push(criterion(1, "equilibria and logistic reduction", Some(1.0), || {
        Ok(from_checks(&[validation::equilibria()]))
    }));

    results.push(criterion(2, "comparison principle on 100 seeded ordered pairs", Some(60.0), || {
        Ok(from_checks(&[validation::comparison(
            &["two_atom", "uniform_centered", "gaussian"],
            100,
            5.0,
            SEED,
        )]))
    }));

    results.push(criterion(3, "monotone preservation and [0,1] invariance to T = 40", None, || {
        Ok(from_checks(&[validation::invariance(40.0)]))
    }));

    results.push(criterion(4, "two-atom kpp speed within 5%", Some(120.0), || {
        let run = front_run("two_atom", "kpp", 0.05)?;
        let out = quantitative(&run, TWO_ATOM_SPEED);
        shared.push(("two_atom", Some(run)));
        Ok(out)
    }));

    results.push(criterion(5, "gaussian kpp speed within 5%", None, || {
        let run = front_run("gaussian", "kpp", 0.05)?;
        let out = quantitative(&run, 0.5f64.exp());
        shared.push(("gaussian", Some(run)));
        Ok(out)
    }));

    results.push(criterion(6, "sandwich c_lower - 0.02 <= c_measured <= c_upper + 0.02", None, || {
        let mut ok = true;
        let mut notes = Vec::new();
        for (kid, k) in gallery::light_tailed_kernels() {
            for (rid, f) in gallery::reactions() {
                let c = front_run(kid, rid, 0.1)?.c_measured();
                let lin = speeds::linear_speed(&k, &f);
                let up = speeds::upper_bound(&k, &f);
                let low = speeds::lower_bound(&k, &f).ok();
                let Some(c) = c else {
                    ok = false;
                    notes.push(format!("{kid}/{rid}: no fitted speed"));
                    continue;
                };
                let lower_ok = low.is_none_or(|l| l.value - 0.02 <= c);
                let upper_ok = c <= up.value + 0.02;
                let tight_needed = f.is_kpp_type() && lin.attained && k.mgf(lin.lambda)? >= 1.0;
                let tight_ok = !tight_needed || (up.value - lin.value).abs() <= 1e-6;
                if !(lower_ok && upper_ok && tight_ok) {
                    ok = false;
                }
                notes.push(format!(
                    "{kid}/{rid}: {} <= {c:.4} <= {:.4}{}",
                    low.map_or("-".to_string(), |l| format!("{:.4}", l.value)),
                    up.value,
                    if lower_ok && upper_ok && tight_ok { "" } else { " VIOLATED" }
                ));
            }
        }
        Ok((ok, notes.join("; ")))
    }));

    results.push(criterion(7, "recursion bracket for two-atom and gaussian", Some(600.0), || {
        let mut ok = true;
        let mut notes = Vec::new();
        for id in ["two_atom", "gaussian"] {
            let k = gallery::kernel(id).expect("gallery kernel");
            let f = ReactionFn::kpp();
            let c_lin = speeds::linear_speed(&k, &f).value;
            let c_low = speeds::lower_bound(&k, &f)?.value;
            let b = bisect_spreading_speed(&k, &f, RecursionConfig::default())?;
            let width_ok = b.hi - b.lo <= 0.05 + 1e-12;
            let near = b.lo <= 1.1 * c_lin && b.hi >= 0.9 * c_lin;
            let chain_ok = b.worst_chain_drop() <= 1e-8;
            let low_ok = c_low <= b.hi;
            let monotone = b.history_is_monotone();
            ok &= width_ok && near && chain_ok && low_ok && monotone;
            notes.push(format!(
                "{id}: [{:.4}, {:.4}] c_linear {c_lin:.4} c_lower {c_low:.4}, worst chain drop {:.1e}, monotone history {monotone}",
                b.lo,
                b.hi,
                b.worst_chain_drop()
            ));
        }
        Ok((ok, notes.join("; ")))
    }));

    results.push(criterion(8, "series measure identity, domination and time-1 agreement", None, || {
        Ok(from_checks(&[
            validation::series_identity(30),
            validation::series_domination(30),
            validation::series_vs_flow(30),
        ]))
    }));

    results.push(criterion(9, "cauchy acceleration with gaussian control", Some(300.0), || {
        let (cauchy, verdict) = acceleration_run("cauchy")?;
        let (control, _) = acceleration_run("gaussian")?;
        let ok = cauchy.superlinear && cauchy.ratio >= 1.5 && verdict == Verdict::NoWaves && !control.superlinear;
        Ok((
            ok,
            format!(
                "cauchy ratio {:.2} (v {:.2} -> {:.2}, censored at {:?}) verdict {verdict}; gaussian ratio {:.2} superlinear {}",
                cauchy.ratio, cauchy.v_early, cauchy.v_late, cauchy.censored_at, control.ratio, control.superlinear
            ),
        ))
    }));

    results.push(criterion(10, "refinement h 0.1 -> 0.05 changes c_measured by < 1%", None, || {
        let mut ok = true;
        let mut notes = Vec::new();
        for id in ["two_atom", "gaussian"] {
            let fine = match shared.iter().find(|(k, _)| *k == id).and_then(|(_, r)| r.clone()) {
                Some(r) => r,
                None => front_run(id, "kpp", 0.05)?,
            };
            let coarse = front_run(id, "kpp", 0.1)?;
            match (coarse.c_measured(), fine.c_measured()) {
                (Some(a), Some(b)) => {
                    let rel = (a - b).abs() / b;
                    ok &= rel < 0.01;
                    notes.push(format!("{id}: {a:.5} -> {b:.5} ({:.3}%)", 100.0 * rel));
                }
                _ => {
                    ok = false;
                    notes.push(format!("{id}: missing fit"));
                }
            }
        }
        Ok((ok, notes.join("; ")))
    }));

    let mut all = true;
    for r in &results {
        all &= r.passed;
        println!(
            "{} criterion {:>2}: {} [{:.1}s{}] {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.title,
            r.seconds,
            r.budget_s.map_or(String::new(), |b| format!(" / {b}s")),
            r.detail
        );
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
