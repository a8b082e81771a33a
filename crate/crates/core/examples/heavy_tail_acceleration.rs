//! A Cauchy kernel has no exponential moments, so no traveling wave exists and
//! the front accelerates. A Gaussian kernel run on the same grid is the control.

use std::time::Instant;

use nonlocal_kpp::field::GridField;
use nonlocal_kpp::fronts::{acceleration_test, track_fronts, TrackOptions};
use nonlocal_kpp::gallery;
use nonlocal_kpp::reaction::ReactionFn;
use nonlocal_kpp::semiflow::EvolutionProblem;
use nonlocal_kpp::speeds::existence_verdict;

fn main() -> nonlocal_kpp::Result<()> {
    let (x_min, x_max, h) = (-2500.0, 800.0, 0.5);
    let n = ((x_max - x_min) / h) as usize + 1;
    let f = ReactionFn::kpp();
    for id in ["cauchy", "gaussian"] {
        let started = Instant::now();
        let k = gallery::kernel(id).expect("gallery kernel");
        let weights = k.discretize(h, gallery::default_cutoff(&k))?;
        let truncated = weights.truncated_mass();
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
        let report = acceleration_test(&trace)?;
        println!(
            "{id}: verdict {}, truncated mass {truncated:.1e}, v_early {:.3}, v_late {:.3}, ratio {:.2}, superlinear {}, censored at {:?} ({:.1?})",
            existence_verdict(&k, &f),
            report.v_early,
            report.v_late,
            report.ratio,
            report.superlinear,
            report.censored_at,
            started.elapsed(),
        );
    }
    Ok(())
}
