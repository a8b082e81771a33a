//! Exponential moments of the gallery kernels: closed form against quadrature,
//! and what discretization keeps of each one. The truncated Cauchy stencil
//! has finite moments even though the kernel has none.

use nonlocal_kpp::gallery;

fn main() -> nonlocal_kpp::Result<()> {
    println!("{:<18} {:>6} {:>14} {:>14} {:>12} {:>9}", "kernel", "lambda", "M(lambda)", "quadrature", "grid", "dropped");
    for (id, k) in gallery::kernels() {
        let w = k.discretize(0.1, gallery::default_cutoff(&k))?;
        for lambda in [0.5, 1.0, 2.0] {
            let m = k.mgf(lambda)?;
            println!(
                "{id:<18} {lambda:>6} {m:>14.8} {:>14.8} {:>12.6e} {:>9.1e}",
                k.exp_moment_quadrature(-lambda),
                w.mgf(lambda),
                w.truncated_mass()
            );
        }
    }
    Ok(())
}
