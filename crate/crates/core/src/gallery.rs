//! Named kernels and reactions used by the examples, sweeps and validation suite.

use crate::kernel::{Atom, Density, DensityFamily, Kernel};
use crate::reaction::{ReactionFamily, ReactionFn};

/// Every gallery kernel id, light-tailed first.
pub const KERNEL_IDS: &[&str] = &[
    "two_atom",
    "uniform_centered",
    "gaussian",
    "laplace",
    "unit_shift",
    "uniform_forward",
    "atom_gaussian_mix",
    "cauchy",
];

pub const REACTION_IDS: &[&str] = &["kpp", "power_kpp2", "scaled2_kpp"];

/// Kernel by gallery id.
pub fn kernel(id: &str) -> Option<Kernel> {
    let k = match id {
        // 1/2 (delta_{-1} + delta_{+1})
        "two_atom" => Kernel::from_atoms(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)]),
        "uniform_centered" => Kernel::from_density(DensityFamily::Uniform { a: -0.5, b: 0.5 }),
        "gaussian" => Kernel::from_density(DensityFamily::Gaussian { sigma: 1.0 }),
        "laplace" => Kernel::from_density(DensityFamily::Laplace { b: 0.5 }),
        // u(x - 1) - u(x): the lattice equation
        "unit_shift" => Ok(Kernel::dirac(1.0)),
        // ∫_0^1 u(x - y) dy - u(x)
        "uniform_forward" => Kernel::from_density(DensityFamily::Uniform { a: 0.0, b: 1.0 }),
        "atom_gaussian_mix" => Kernel::new(
            vec![Atom::new(0.5, 0.5)],
            Some(Density {
                family: DensityFamily::Gaussian { sigma: 1.0 },
                weight: 0.5,
            }),
        ),
        "cauchy" => Kernel::from_density(DensityFamily::Cauchy { s: 1.0 }),
        _ => return None,
    };
    Some(k.expect("gallery kernels are valid"))
}

/// Reaction by gallery id.
pub fn reaction(id: &str) -> Option<ReactionFn> {
    let f = match id {
        "kpp" => Ok(ReactionFn::kpp()),
        "power_kpp2" => ReactionFn::power_kpp(2.0),
        "scaled2_kpp" => ReactionFn::scaled(2.0, ReactionFamily::Kpp),
        _ => return None,
    };
    Some(f.expect("gallery reactions are valid"))
}

pub fn kernels() -> Vec<(&'static str, Kernel)> {
    KERNEL_IDS.iter().map(|id| (*id, kernel(id).expect("listed id"))).collect()
}

pub fn reactions() -> Vec<(&'static str, ReactionFn)> {
    REACTION_IDS.iter().map(|id| (*id, reaction(id).expect("listed id"))).collect()
}

/// Gallery kernels with `M(lambda) < inf` for some `lambda > 0`.
pub fn light_tailed_kernels() -> Vec<(&'static str, Kernel)> {
    kernels().into_iter().filter(|(_, k)| k.has_finite_mgf_somewhere()).collect()
}

/// Cutoff mass suited to a gallery kernel: heavy tails need an explicit, larger cutoff.
pub fn default_cutoff(kernel: &Kernel) -> f64 {
    if kernel.has_finite_mgf_somewhere() {
        1e-10
    } else {
        1e-3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_resolves() {
        assert_eq!(kernels().len(), KERNEL_IDS.len());
        assert_eq!(reactions().len(), REACTION_IDS.len());
        assert!(kernel("nope").is_none() && reaction("nope").is_none());
        for (_, k) in kernels() {
            assert!((k.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn only_cauchy_is_heavy() {
        let light: Vec<_> = light_tailed_kernels().into_iter().map(|(id, _)| id).collect();
        assert_eq!(light.len(), KERNEL_IDS.len() - 1);
        assert!(!light.contains(&"cauchy"));
    }

    #[test]
    fn symmetric_kernels_have_mgf_at_least_one() {
        for id in ["two_atom", "uniform_centered", "gaussian", "laplace"] {
            let k = kernel(id).unwrap();
            for l in [0.01, 0.3, 1.0, 1.9] {
                assert!(k.mgf(l).unwrap() >= 1.0 - 1e-15, "{id} at {l}");
            }
        }
    }
}
