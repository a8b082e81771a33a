//! A small parameter sweep written to stdout in the results.csv layout.

use nonlocal_kpp::config::ExperimentConfig;
use nonlocal_kpp::experiment::{sweep, write_results_csv};

fn main() -> nonlocal_kpp::Result<()> {
    let mut cfg = ExperimentConfig::for_gallery("two_atom");
    cfg.time.t_end = 30.0;
    cfg.front.fit_window = [15.0, 30.0];
    cfg.sweep.kernels = vec!["two_atom".into(), "gaussian".into(), "laplace".into()];
    cfg.sweep.reactions = vec!["kpp".into(), "scaled2_kpp".into()];
    cfg.sweep.h = vec![0.2, 0.1];
    let rows = sweep(&cfg, None)?;
    write_results_csv(std::io::stdout().lock(), &rows, &cfg.sha256())
}
