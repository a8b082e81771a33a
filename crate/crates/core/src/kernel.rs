//! The dispersal measure `mu`: a finite list of atoms plus an optional
//! density from a named family.
//!
//! The exponential moment used throughout is `M(lambda) = ∫ e^{-lambda y} dmu(y)`.
//! Convolution follows `(mu * u)(x) = ∫ u(x - y) dmu(y)`, so an atom at
//! `y > 0` transports values rightwards.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_line, QuadOptions};

/// A point mass of the measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(location: f64, mass: f64) -> Self {
        Self { location, mass }
    }
}

/// Unit-mass density families.
///
/// `Tabulated` holds samples of a piecewise-linear density on a uniform grid
/// spanning `[x_start, x_end]`; it is zero outside that interval. Samples are
/// rescaled to unit integral when the owning [`Kernel`] is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DensityFamily {
    Uniform { a: f64, b: f64 },
    Gaussian { sigma: f64 },
    Laplace { b: f64 },
    Cauchy { s: f64 },
    ExpPower { alpha: f64, beta: f64 },
    Tabulated { x_start: f64, x_end: f64, values: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DensityFamily {
    fn validated(self) -> Result<Self> {
        match &self {
            DensityFamily::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidKernel(format!("uniform needs a < b, got ({a}, {b})")));
                }
            }
            DensityFamily::Gaussian { sigma } => positive("gaussian sigma", *sigma)?,
            DensityFamily::Laplace { b } => positive("laplace b", *b)?,
            DensityFamily::Cauchy { s } => positive("cauchy s", *s)?,
            DensityFamily::ExpPower { alpha, beta } => {
                positive("exp_power alpha", *alpha)?;
                positive("exp_power beta", *beta)?;
            }
            DensityFamily::Tabulated { x_start, x_end, values } => {
                if !(x_start.is_finite() && x_end.is_finite() && x_start < x_end) {
                    return Err(Error::InvalidKernel("tabulated density needs x_start < x_end".into()));
                }
                if values.len() < 2 {
                    return Err(Error::InvalidKernel("tabulated density needs at least 2 samples".into()));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidKernel("tabulated samples must be finite and nonnegative".into()));
                }
                let dx = (x_end - x_start) / (values.len() - 1) as f64;
                let integral: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum();
                if integral <= 0.0 {
                    return Err(Error::InvalidKernel("tabulated density has zero integral".into()));
                }
                let values = values.iter().map(|v| v / integral).collect();
                return Ok(DensityFamily::Tabulated {
                    x_start: *x_start,
                    x_end: *x_end,
                    values,
                });
            }
        }
        Ok(self)
    }

    fn exp_power_norm(alpha: f64, beta: f64) -> f64 {
        // ∫ exp(-beta |y|^alpha) dy = 2 Γ(1 + 1/alpha) / beta^{1/alpha}
        2.0 * (ln_gamma(1.0 + 1.0 / alpha)).exp() / beta.powf(1.0 / alpha)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match self {
            DensityFamily::Uniform { a, b } => {
                if y >= *a && y <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            DensityFamily::Gaussian { sigma } => {
                let z = y / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            DensityFamily::Laplace { b } => (-y.abs() / b).exp() / (2.0 * b),
            DensityFamily::Cauchy { s } => s / (std::f64::consts::PI * (s * s + y * y)),
            DensityFamily::ExpPower { alpha, beta } => {
                (-beta * y.abs().powf(*alpha)).exp() / Self::exp_power_norm(*alpha, *beta)
            }
            DensityFamily::Tabulated { x_start, x_end, values } => {
                if y < *x_start || y > *x_end {
                    return 0.0;
                }
                let dx = (x_end - x_start) / (values.len() - 1) as f64;
                let pos = (y - x_start) / dx;
                let i = (pos.floor() as usize).min(values.len() - 2);
                let t = pos - i as f64;
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Mass of `(-inf, y]`.
    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            DensityFamily::Uniform { a, b } => ((y - a) / (b - a)).clamp(0.0, 1.0),
            DensityFamily::Gaussian { sigma } => 0.5 * erfc(-y / (sigma * std::f64::consts::SQRT_2)),
            DensityFamily::Laplace { b } => {
                if y < 0.0 {
                    0.5 * (y / b).exp()
                } else {
                    1.0 - 0.5 * (-y / b).exp()
                }
            }
            DensityFamily::Cauchy { s } => {
                if y < 0.0 {
                    (s / -y).atan() / std::f64::consts::PI
                } else {
                    0.5 + (y / s).atan() / std::f64::consts::PI
                }
            }
            DensityFamily::ExpPower { alpha, beta } => {
                let half_tail = 0.5 * gamma_ur(1.0 / alpha, beta * y.abs().powf(*alpha));
                if y < 0.0 {
                    half_tail
                } else {
                    1.0 - half_tail
                }
            }
            DensityFamily::Tabulated { x_start, x_end, values } => {
                if y <= *x_start {
                    return 0.0;
                }
                if y >= *x_end {
                    return 1.0;
                }
                let dx = (x_end - x_start) / (values.len() - 1) as f64;
                let pos = (y - x_start) / dx;
                let i = (pos.floor() as usize).min(values.len() - 2);
                let full: f64 = values[..=i].windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum();
                let t = pos - i as f64;
                let at_t = values[i] * (1.0 - t) + values[i + 1] * t;
                full + 0.5 * (values[i] + at_t) * t * dx
            }
        }
    }

    /// Mass of `(y, +inf)`, evaluated without cancellation in the right tail.
    pub fn sf(&self, y: f64) -> f64 {
        match self {
            DensityFamily::Gaussian { sigma } => 0.5 * erfc(y / (sigma * std::f64::consts::SQRT_2)),
            DensityFamily::Laplace { b } if y > 0.0 => 0.5 * (-y / b).exp(),
            DensityFamily::Cauchy { s } if y > 0.0 => (s / y).atan() / std::f64::consts::PI,
            DensityFamily::ExpPower { alpha, beta } if y > 0.0 => {
                0.5 * gamma_ur(1.0 / alpha, beta * y.powf(*alpha))
            }
            _ => 1.0 - self.cdf(y),
        }
    }

    /// Mass of the interval `(a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let m = if a >= 0.0 {
            self.sf(a) - self.sf(b)
        } else if b <= 0.0 {
            self.cdf(b) - self.cdf(a)
        } else {
            (self.cdf(0.0) - self.cdf(a)) + (self.sf(0.0) - self.sf(b))
        };
        m.max(0.0)
    }

    /// Mass outside `[-r, r]`.
    pub fn tail_outside(&self, r: f64) -> f64 {
        self.cdf(-r) + self.sf(r)
    }

    /// True when `∫ e^{s y} p(y) dy` diverges, decided from the family's tail class.
    pub fn exp_moment_diverges(&self, s: f64) -> bool {
        if s == 0.0 {
            return false;
        }
        match self {
            DensityFamily::Uniform { .. } | DensityFamily::Gaussian { .. } | DensityFamily::Tabulated { .. } => false,
            DensityFamily::Laplace { b } => s.abs() * b >= 1.0,
            DensityFamily::Cauchy { .. } => true,
            DensityFamily::ExpPower { alpha, beta } => {
                if *alpha < 1.0 {
                    true
                } else if *alpha == 1.0 {
                    s.abs() >= *beta
                } else {
                    false
                }
            }
        }
    }

    /// True when the exponential moment is finite for some nonzero exponent.
    pub fn has_light_tail(&self) -> bool {
        match self {
            DensityFamily::Cauchy { .. } => false,
            DensityFamily::ExpPower { alpha, .. } => *alpha >= 1.0,
            _ => true,
        }
    }

    /// Closed-form `∫ e^{s y} p(y) dy`, when the family has one.
    pub fn exp_moment_closed(&self, s: f64) -> Option<f64> {
        if self.exp_moment_diverges(s) {
            return Some(f64::INFINITY);
        }
        match self {
            DensityFamily::Uniform { a, b } => {
                let w = s * (b - a);
                if w == 0.0 {
                    Some(1.0)
                } else {
                    Some((s * a).exp() * w.exp_m1() / w)
                }
            }
            DensityFamily::Gaussian { sigma } => Some((0.5 * s * s * sigma * sigma).exp()),
            DensityFamily::Laplace { b } => Some(1.0 / (1.0 - s * s * b * b)),
            DensityFamily::Cauchy { .. } => Some(1.0),
            DensityFamily::ExpPower { alpha, beta } if *alpha == 1.0 => Some(1.0 / (1.0 - s * s / (beta * beta))),
            _ => None,
        }
    }

    /// `∫ e^{s y} p(y) dy` by adaptive quadrature, ignoring any closed form.
    pub fn exp_moment_quadrature(&self, s: f64) -> f64 {
        if self.exp_moment_diverges(s) {
            return f64::INFINITY;
        }
        let opts = QuadOptions::default();
        match self {
            DensityFamily::Uniform { a, b } => {
                crate::quadrature::integrate(|y| (s * y).exp() * self.pdf(y), *a, *b, opts).value
            }
            DensityFamily::Tabulated { x_start, x_end, values } => {
                let n = values.len() - 1;
                let dx = (x_end - x_start) / n as f64;
                (0..n)
                    .map(|i| {
                        let lo = x_start + i as f64 * dx;
                        let hi = if i + 1 == n { *x_end } else { lo + dx };
                        crate::quadrature::integrate(|y| (s * y).exp() * self.pdf(y), lo, hi, opts).value
                    })
                    .sum()
            }
            _ => {
                // Integrate e^{s y - shift} p(y) around the integrand's peak to avoid overflow.
                let peak = self.integrand_peak(s);
                let shift = s * peak + self.pdf(peak).ln();
                let shift = if shift.is_finite() { shift } else { 0.0 };
                let r = integrate_line(
                    |y| {
                        let p = self.pdf(y);
                        if p == 0.0 {
                            0.0
                        } else {
                            (s * y + p.ln() - shift).exp()
                        }
                    },
                    &[0.0, peak],
                    opts,
                );
                r.value * shift.exp()
            }
        }
    }

    fn integrand_peak(&self, s: f64) -> f64 {
        match self {
            DensityFamily::Gaussian { sigma } => s * sigma * sigma,
            DensityFamily::ExpPower { alpha, beta } if *alpha > 1.0 && s != 0.0 => {
                s.signum() * (s.abs() / (alpha * beta)).powf(1.0 / (alpha - 1.0))
            }
            _ => 0.0,
        }
    }

    pub fn reflect(&self) -> Self {
        match self {
            DensityFamily::Uniform { a, b } => DensityFamily::Uniform { a: -b, b: -a },
            DensityFamily::Tabulated { x_start, x_end, values } => DensityFamily::Tabulated {
                x_start: -x_end,
                x_end: -x_start,
                values: values.iter().rev().copied().collect(),
            },
            other => other.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityFamily::Uniform { .. } => "uniform",
            DensityFamily::Gaussian { .. } => "gaussian",
            DensityFamily::Laplace { .. } => "laplace",
            DensityFamily::Cauchy { .. } => "cauchy",
            DensityFamily::ExpPower { .. } => "exp_power",
            DensityFamily::Tabulated { .. } => "tabulated",
        }
    }
}

/// A density family together with the mass it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    #[serde(flatten)]
    pub family: DensityFamily,
    pub weight: f64,
}

/// A finite Borel measure on the line made of atoms plus an optional density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    atoms: Vec<Atom>,
    density: Option<Density>,
}

impl Kernel {
    pub fn new(atoms: Vec<Atom>, density: Option<Density>) -> Result<Self> {
        for a in &atoms {
            if !a.location.is_finite() {
                return Err(Error::InvalidKernel(format!("atom location {} is not finite", a.location)));
            }
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::InvalidKernel(format!("atom mass {} must be positive", a.mass)));
            }
        }
        let density = match density {
            Some(d) => {
                positive("density weight", d.weight)?;
                Some(Density {
                    family: d.family.validated()?,
                    weight: d.weight,
                })
            }
            None => None,
        };
        if atoms.is_empty() && density.is_none() {
            return Err(Error::InvalidKernel("kernel has neither atoms nor density".into()));
        }
        Ok(Self { atoms, density })
    }

    /// Unit point mass at `location`.
    pub fn dirac(location: f64) -> Self {
        Self::new(vec![Atom::new(location, 1.0)], None).expect("finite location")
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, None)
    }

    /// Unit-mass kernel with only a density part.
    pub fn from_density(family: DensityFamily) -> Result<Self> {
        Self::new(vec![], Some(Density { family, weight: 1.0 }))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn is_atomic(&self) -> bool {
        self.density.is_none()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.as_ref().map_or(0.0, |d| d.weight)
    }

    /// Rescale every mass by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        positive("scale factor", factor)?;
        Ok(Self {
            atoms: self.atoms.iter().map(|a| Atom::new(a.location, a.mass * factor)).collect(),
            density: self.density.as_ref().map(|d| Density {
                family: d.family.clone(),
                weight: d.weight * factor,
            }),
        })
    }

    /// Rescale so the total mass is 1.
    pub fn normalized(&self) -> Self {
        let total = self.total_mass();
        self.scaled(1.0 / total).expect("total mass is positive")
    }

    /// The reflected measure: `mû((-inf, y)) = mu((-y, +inf))`.
    pub fn reflect(&self) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| Atom::new(-a.location, a.mass)).collect(),
            density: self.density.as_ref().map(|d| Density {
                family: d.family.reflect(),
                weight: d.weight,
            }),
        }
    }

    /// `∫ e^{s y} dmu(y)` for any real `s`; `+inf` when it diverges.
    pub fn exp_moment(&self, s: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass * (s * a.location).exp()).sum();
        let dens = self.density.as_ref().map_or(0.0, |d| {
            let m = d.family.exp_moment_closed(s).unwrap_or_else(|| d.family.exp_moment_quadrature(s));
            d.weight * m
        });
        atoms + dens
    }

    /// Same as [`Kernel::exp_moment`] but always integrating the density numerically.
    pub fn exp_moment_quadrature(&self, s: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass * (s * a.location).exp()).sum();
        let dens = self
            .density
            .as_ref()
            .map_or(0.0, |d| d.weight * d.family.exp_moment_quadrature(s));
        atoms + dens
    }

    /// `M(lambda) = ∫ e^{-lambda y} dmu(y)` for `lambda > 0`.
    pub fn mgf(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("mgf needs lambda > 0, got {lambda}")));
        }
        Ok(self.exp_moment(-lambda))
    }

    /// Whether `M(lambda)` is finite for some `lambda > 0`, by tail class.
    pub fn has_finite_mgf_somewhere(&self) -> bool {
        self.density.as_ref().is_none_or(|d| d.family.has_light_tail())
    }

    pub fn discretize(&self, h: f64, cutoff_mass: f64) -> Result<DiscreteWeights> {
        self.discretize_with(
            h,
            DiscretizeOptions {
                cutoff_mass,
                ..DiscretizeOptions::default()
            },
        )
    }

    /// Convolution weights on a grid of spacing `h`.
    ///
    /// Atoms are split linearly between their two neighbouring nodes; the
    /// density contributes its exact mass on each cell `((j - 1/2) h, (j + 1/2) h]`.
    pub fn discretize_with(&self, h: f64, opts: DiscretizeOptions) -> Result<DiscreteWeights> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!("grid spacing must be positive, got {h}")));
        }
        let total = self.total_mass();
        if !(opts.cutoff_mass >= 0.0 && opts.cutoff_mass < total) {
            return Err(Error::Domain(format!(
                "cutoff_mass must lie in [0, {total}), got {}",
                opts.cutoff_mass
            )));
        }

        let atom_radius = self
            .atoms
            .iter()
            .map(|a| (a.location.abs() / h).ceil() as usize)
            .max()
            .unwrap_or(0);
        let density_radius = match &self.density {
            None => 0,
            Some(d) => {
                let tail = |r: usize| d.weight * d.family.tail_outside((r as f64 + 0.5) * h);
                let mut hi = 1usize;
                while tail(hi) > opts.cutoff_mass {
                    if hi >= opts.max_radius {
                        return Err(Error::CutoffUnreachable {
                            cutoff: opts.cutoff_mass,
                            max_radius: opts.max_radius,
                            achieved: tail(opts.max_radius),
                        });
                    }
                    hi = (hi * 2).min(opts.max_radius);
                }
                let mut lo = 0usize;
                if tail(0) <= opts.cutoff_mass {
                    hi = 0;
                }
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if tail(mid) <= opts.cutoff_mass {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        };
        let radius = atom_radius.max(density_radius);
        let r = radius as isize;
        let mut weights = vec![0.0; 2 * radius + 1];

        if let Some(d) = &self.density {
            for j in -r..=r {
                let lo = (j as f64 - 0.5) * h;
                let hi = (j as f64 + 0.5) * h;
                weights[(j + r) as usize] += d.weight * d.family.mass_between(lo, hi);
            }
        }
        for a in &self.atoms {
            let pos = a.location / h;
            let nearest = pos.round();
            if (pos - nearest).abs() <= 1e-10 * nearest.abs().max(1.0) {
                weights[(nearest as isize + r) as usize] += a.mass;
            } else {
                let left = pos.floor();
                let frac = pos - left;
                let j = left as isize;
                weights[(j + r) as usize] += a.mass * (1.0 - frac);
                weights[(j + 1 + r) as usize] += a.mass * frac;
            }
        }

        let mut dw = DiscreteWeights::from_dense(h, weights, total, 0.0);
        let raw = dw.mass();
        dw.truncated_mass = (total - raw).max(0.0);
        if opts.renormalize && raw > 0.0 {
            dw.renormalize_to(total);
        }
        Ok(dw)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiscretizeOptions {
    /// Mass allowed to fall outside the stencil.
    pub cutoff_mass: f64,
    /// Rescale weights so they sum to the kernel's total mass exactly.
    pub renormalize: bool,
    /// Hard limit on the stencil radius, in grid cells.
    pub max_radius: usize,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        Self {
            cutoff_mass: 1e-10,
            renormalize: true,
            max_radius: 1 << 20,
        }
    }
}

/// Convolution weights `w_j` for offsets `j` in `[-R, R]` on a grid of spacing `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteWeights {
    h: f64,
    radius: usize,
    weights: Vec<f64>,
    #[serde(skip)]
    nonzero: Vec<(isize, f64)>,
    total_mass: f64,
    truncated_mass: f64,
}

impl DiscreteWeights {
    /// Build from a dense stencil of odd length `2R + 1` centred on offset 0.
    pub fn from_dense(h: f64, weights: Vec<f64>, total_mass: f64, truncated_mass: f64) -> Self {
        assert!(weights.len() % 2 == 1, "stencil length must be odd");
        let radius = weights.len() / 2;
        let nonzero = Self::collect_nonzero(&weights, radius);
        Self {
            h,
            radius,
            weights,
            nonzero,
            total_mass,
            truncated_mass,
        }
    }

    fn collect_nonzero(weights: &[f64], radius: usize) -> Vec<(isize, f64)> {
        weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i as isize - radius as isize, *w))
            .collect()
    }

    fn renormalize_to(&mut self, total: f64) {
        let raw = self.mass();
        let scale = total / raw;
        for w in &mut self.weights {
            *w *= scale;
        }
        self.nonzero = Self::collect_nonzero(&self.weights, self.radius);
        // Absorb the rounding residue into the largest weight until the
        // ordered sum reproduces `total` exactly.
        for _ in 0..16 {
            let residue = total - self.mass();
            if residue == 0.0 {
                break;
            }
            let (k, _) = self
                .nonzero
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .expect("nonempty stencil");
            self.nonzero[k].1 += residue;
            let (offset, w) = self.nonzero[k];
            self.weights[(offset + self.radius as isize) as usize] = w;
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Dense weights, index `j + R` for offset `j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, offset: isize) -> f64 {
        let idx = offset + self.radius as isize;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    /// Nonzero `(offset, weight)` pairs in increasing offset order.
    pub fn nonzero(&self) -> &[(isize, f64)] {
        &self.nonzero
    }

    /// Sum of the weights, accumulated in increasing offset order.
    pub fn mass(&self) -> f64 {
        self.nonzero.iter().fold(0.0, |acc, (_, w)| acc + w)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Exponential moment of the discrete measure, `Σ w_j e^{-lambda j h}`.
    pub fn mgf(&self, lambda: f64) -> f64 {
        self.nonzero
            .iter()
            .map(|(j, w)| w * (-lambda * *j as f64 * self.h).exp())
            .sum()
    }
}
