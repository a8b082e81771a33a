//! The exponential series of an atomic kernel is the time-1 map of the linear
//! flow, and it gives the same lower bound as the direct formula.

use nonlocal_kpp::gallery;
use nonlocal_kpp::linear_ops::exp_series_measure;
use nonlocal_kpp::reaction::ReactionFn;
use nonlocal_kpp::speeds::{lower_bound, lower_bound_from_series};

fn main() -> nonlocal_kpp::Result<()> {
    let k = gallery::kernel("two_atom").expect("gallery kernel");
    let series = exp_series_measure(&k, 30)?;
    println!(
        "{} atoms, mass {:.12} (e^1 = {:.12}), tail bound {:.1e}",
        series.result.atoms().len(),
        series.result.total_mass(),
        1f64.exp(),
        series.tail_bound
    );
    for lambda in [0.5, 1.0, 2.0] {
        println!(
            "lambda {lambda}: series {:.12}, exp(M) = {:.12}",
            series.result.mgf(lambda)?,
            k.mgf(lambda)?.exp()
        );
    }

    let f = ReactionFn::kpp();
    let direct = lower_bound(&k, &f)?;
    let (via_series, tail) = lower_bound_from_series(&k, &f, 30)?;
    println!("c_lower direct {:.10} at lambda {:.6}", direct.value, direct.lambda);
    println!("c_lower series {:.10} at lambda {:.6} (tail {tail:.1e})", via_series.value, via_series.lambda);
    Ok(())
}
