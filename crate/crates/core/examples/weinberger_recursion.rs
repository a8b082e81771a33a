//! Bisect the recursion for the spreading speed of two kernels and compare the
//! bracket with the formula bounds.

use std::time::Instant;

use nonlocal_kpp::kernel::{Atom, DensityFamily, Kernel};
use nonlocal_kpp::reaction::ReactionFn;
use nonlocal_kpp::speeds::SpeedReport;
use nonlocal_kpp::weinberger::{bisect_spreading_speed, RecursionConfig};

fn main() -> nonlocal_kpp::Result<()> {
    let kernels = [
        ("two_atom", Kernel::from_atoms(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)])?),
        ("gaussian", Kernel::from_density(DensityFamily::Gaussian { sigma: 1.0 })?),
    ];
    let f = ReactionFn::kpp();
    for (name, k) in &kernels {
        let started = Instant::now();
        let report = SpeedReport::compute(k, &f);
        let bracket = bisect_spreading_speed(k, &f, RecursionConfig::default())?;
        println!(
            "{name}: bracket [{:.4}, {:.4}] after {} runs ({:.1?}); c_lower {:.4}, c_linear {:.4}",
            bracket.lo,
            bracket.hi,
            bracket.history.len(),
            started.elapsed(),
            report.c_lower.unwrap_or(f64::NAN),
            report.c_linear,
        );
        for run in &bracket.history {
            println!("  c = {:.4}: {:?} after {} steps", run.c, run.class, run.steps);
        }
    }
    Ok(())
}
