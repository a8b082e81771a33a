//! Convolution powers of atomic measures and the exponential series
//! `Σ_k mû^{*k} / k!`, which is the time-1 map of `v_t = mû * v` written as
//! a single convolution measure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::kernel::{Atom, Kernel};

/// Upper bound on the atom count of any intermediate measure.
pub const ATOM_CAP: usize = 200_000;

fn require_atomic(k: &Kernel) -> Result<()> {
    if k.is_atomic() {
        Ok(())
    } else {
        Err(Error::Domain("convolution powers are only built for atoms-only kernels".into()))
    }
}

/// Sort by location and merge atoms closer than `1e-12 * max(1, |y|)`.
fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match merged.last_mut() {
            Some(last) if (a.location - last.location).abs() <= 1e-12 * last.location.abs().max(1.0) => {
                last.mass += a.mass;
            }
            _ => merged.push(a),
        }
    }
    merged
}

fn convolve_atoms(a: &[Atom], b: &[Atom]) -> Result<Vec<Atom>> {
    let count = a.len() * b.len();
    if count > ATOM_CAP * 16 {
        return Err(Error::AtomExplosion { count, cap: ATOM_CAP });
    }
    let raw: Vec<Atom> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| Atom::new(x.location + y.location, x.mass * y.mass)))
        .collect();
    let merged = merge_atoms(raw);
    if merged.len() > ATOM_CAP {
        return Err(Error::AtomExplosion {
            count: merged.len(),
            cap: ATOM_CAP,
        });
    }
    Ok(merged)
}

/// `k^{*n}`; `n = 0` is the unit point mass at the origin.
pub fn convolution_power(k: &Kernel, n: usize) -> Result<Kernel> {
    require_atomic(k)?;
    let base = merge_atoms(k.atoms().to_vec());
    let mut acc = vec![Atom::new(0.0, 1.0)];
    for _ in 0..n {
        acc = convolve_atoms(&acc, &base)?;
    }
    Kernel::from_atoms(acc)
}

/// Truncated exponential series of an atomic measure.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesMeasure {
    pub base: Kernel,
    pub terms: usize,
    pub result: Kernel,
    /// `Σ_{k > N} m^k / k!` for base mass `m`: the mass the truncation drops.
    pub tail_bound: f64,
}

/// `Σ_{k=0}^{N} k^{*k} / k!` for an atoms-only kernel.
pub fn exp_series_measure(k: &Kernel, terms: usize) -> Result<SeriesMeasure> {
    require_atomic(k)?;
    if terms < 1 {
        return Err(Error::Domain("exponential series needs at least one term".into()));
    }
    let base = merge_atoms(k.atoms().to_vec());
    let mut power = vec![Atom::new(0.0, 1.0)];
    let mut all = power.clone();
    let mut factorial = 1.0;
    for n in 1..=terms {
        power = convolve_atoms(&power, &base)?;
        factorial *= n as f64;
        all.extend(power.iter().map(|a| Atom::new(a.location, a.mass / factorial)));
        all = merge_atoms(all);
    }
    let mass = k.total_mass();
    let mut tail = 0.0;
    let mut term = mass.powi(terms as i32) / factorial;
    let mut n = terms;
    loop {
        n += 1;
        term *= mass / n as f64;
        tail += term;
        if term <= tail * 1e-17 || n > terms + 10_000 {
            break;
        }
    }
    Ok(SeriesMeasure {
        base: k.clone(),
        terms,
        result: Kernel::from_atoms(all)?,
        tail_bound: tail,
    })
}

/// `(k * u)(x) = Σ m u(x - y)` on the nodes of `u`, interpolating off-grid
/// arguments. The limits map to `k(R) * limit`.
pub fn apply_atomic(k: &Kernel, u: &GridField) -> Result<GridField> {
    require_atomic(k)?;
    let values = (0..u.len())
        .map(|i| {
            let x = u.x(i);
            k.atoms().iter().map(|a| a.mass * u.value_at(x - a.location)).sum()
        })
        .collect();
    let mass = k.total_mass();
    GridField::new(u.x_min(), u.h(), values, mass * u.left_limit(), mass * u.right_limit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_atom() -> Kernel {
        Kernel::from_atoms(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)]).unwrap()
    }

    #[test]
    fn powers_of_a_shift() {
        let p = convolution_power(&Kernel::dirac(1.0), 3).unwrap();
        assert_eq!(p.atoms(), &[Atom::new(3.0, 1.0)]);
    }

    #[test]
    fn binomial_square() {
        let p = convolution_power(&two_atom(), 2).unwrap();
        assert_eq!(p.atoms(), &[Atom::new(-2.0, 0.25), Atom::new(0.0, 0.5), Atom::new(2.0, 0.25)]);
    }

    #[test]
    fn zeroth_power_is_identity() {
        for k in [two_atom(), Kernel::dirac(3.5)] {
            assert_eq!(convolution_power(&k, 0).unwrap().atoms(), &[Atom::new(0.0, 1.0)]);
        }
    }

    #[test]
    fn densities_are_rejected() {
        let g = Kernel::from_density(crate::kernel::DensityFamily::Gaussian { sigma: 1.0 }).unwrap();
        assert!(matches!(convolution_power(&g, 2), Err(Error::Domain(_))));
        assert!(exp_series_measure(&g, 4).is_err());
    }

    #[test]
    fn irrational_atoms_hit_the_cap() {
        let k = Kernel::from_atoms(vec![
            Atom::new(0.0, 0.2),
            Atom::new(1.0, 0.2),
            Atom::new(std::f64::consts::SQRT_2, 0.2),
            Atom::new(std::f64::consts::PI, 0.2),
            Atom::new(std::f64::consts::E, 0.2),
        ])
        .unwrap();
        assert!(matches!(convolution_power(&k, 60), Err(Error::AtomExplosion { .. })));
    }

    #[test]
    fn series_of_the_origin_is_e() {
        let s = exp_series_measure(&Kernel::dirac(0.0), 20).unwrap();
        assert_eq!(s.result.atoms().len(), 1);
        assert_relative_eq!(s.result.total_mass(), std::f64::consts::E, max_relative = 1e-12);
        assert!(s.tail_bound > 0.0 && s.tail_bound < 1e-18);
    }

    #[test]
    fn series_mgf_is_exp_of_mgf() {
        let s = exp_series_measure(&two_atom(), 20).unwrap();
        // ∫ e^{λ y} dν̂ = exp(cosh λ); independent value at λ = 1 from mpmath
        assert_relative_eq!(s.result.exp_moment(1.0), 4.678_982_327_128_294, max_relative = 1e-9);
    }

    #[test]
    fn apply_atomic_on_grid() {
        let u = GridField::ramp_profile(-5.0, 0.5, 21, -1.0, 2.0).unwrap();
        let out = apply_atomic(&Kernel::dirac(1.0), &u).unwrap();
        for i in 2..u.len() {
            assert_eq!(out.values()[i], u.values()[i - 2]);
        }
    }
}
