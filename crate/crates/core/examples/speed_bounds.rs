//! Formula speeds for every gallery pair, with the existence verdict.

use nonlocal_kpp::gallery;
use nonlocal_kpp::speeds::{fmt_extended, SpeedReport};

fn short(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else if v.is_nan() {
        "-".into()
    } else {
        fmt_extended(v)
    }
}

fn main() {
    println!(
        "{:<18} {:<12} {:>10} {:>10} {:>10} {:>9}  verdict",
        "kernel", "reaction", "c_lower", "c_linear", "c_upper", "lambda*"
    );
    for (kid, k) in gallery::kernels() {
        for (rid, f) in gallery::reactions() {
            let r = SpeedReport::compute(&k, &f);
            println!(
                "{kid:<18} {rid:<12} {:>10} {:>10} {:>10} {:>9}  {}{}",
                r.c_lower.map_or("-".into(), short),
                short(r.c_linear),
                short(r.c_upper),
                short(r.lambda_star),
                r.verdict,
                if r.linear_attained { "" } else { " (infimum at the search edge)" }
            );
        }
    }
}
