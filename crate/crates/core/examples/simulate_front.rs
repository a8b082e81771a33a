//! Evolve a ramp under the two-atom kernel and watch the 0.5 level set move.

use nonlocal_kpp::config::ExperimentConfig;
use nonlocal_kpp::experiment::Experiment;
use nonlocal_kpp::fronts::level_position;

fn main() -> nonlocal_kpp::Result<()> {
    let mut cfg = ExperimentConfig::for_gallery("two_atom");
    cfg.grid.h = 0.1;
    let exp = Experiment::new(cfg)?;
    let problem = exp.problem()?;
    let u0 = exp.initial_state()?;
    println!("dt = {:.4}, {} nodes", problem.dt(), u0.len());
    problem.evolve_observed(&u0, 40.0, 5.0, |t, u| {
        println!("t = {t:>4}: X_0.5 = {:>9.3}", level_position(u, 0.5)?);
        Ok(true)
    })?;

    let run = exp.fronts()?;
    for (tr, fit) in run.traces.iter().zip(&run.fits) {
        if let Some(f) = fit {
            println!("level {}: c = {:.4} (stderr {:.1e})", tr.level, f.c_measured, f.stderr);
        }
    }
    Ok(())
}
