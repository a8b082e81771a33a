//! Speed formulas obtained by minimizing over the decay rate `lambda`.
//!
//! With `M(lambda) = ∫ e^{-lambda y} dmu(y)`:
//!
//! * linearized speed: `inf (M - 1 + f'(0)) / lambda`
//! * super-solution bound: `inf (max{M, mu(R)} - 1 + sup f(h)/h) / lambda`
//! * recursion lower bound: `inf (M - 1 + f'(0)/2) / lambda`

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linear_ops::exp_series_measure;
use crate::reaction::ReactionFn;

/// Search interval for `lambda`.
pub const LAMBDA_MIN: f64 = 1e-3;
pub const LAMBDA_MAX: f64 = 50.0;
pub const LAMBDA_GRID_POINTS: usize = 400;
/// Relative width at which golden-section refinement stops.
pub const GOLDEN_REL_TOL: f64 = 1e-8;

/// Infimum of a function of `lambda` over the search interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaMin {
    #[serde(serialize_with = "extended")]
    pub value: f64,
    pub lambda: f64,
    /// `false` when the smallest grid value sits on an end of the interval,
    /// so the infimum may be approached but not reached.
    pub attained: bool,
}

/// Write infinities as the strings `"inf"` / `"-inf"` and NaN as `null`.
pub fn extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_nan() {
        s.serialize_none()
    } else if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn extended_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => extended(x, s),
        None => s.serialize_none(),
    }
}

fn lambda_grid() -> impl Iterator<Item = f64> {
    let (a, b) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    let n = LAMBDA_GRID_POINTS;
    (0..n).map(move |i| match i {
        0 => LAMBDA_MIN,
        i if i == n - 1 => LAMBDA_MAX,
        _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
    })
}

/// Log-grid scan of `g` followed by golden-section refinement around the best node.
pub fn minimize_over_lambda<G: Fn(f64) -> f64>(g: G) -> LambdaMin {
    minimize_with_tol(g, GOLDEN_REL_TOL)
}

pub fn minimize_with_tol<G: Fn(f64) -> f64>(g: G, rel_tol: f64) -> LambdaMin {
    let grid: Vec<f64> = lambda_grid().collect();
    let vals: Vec<f64> = grid.iter().map(|l| g(*l)).collect();
    let (best, _) = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold((usize::MAX, f64::INFINITY), |(bi, bv), (i, v)| if *v < bv { (i, *v) } else { (bi, bv) });
    if best == usize::MAX {
        return LambdaMin {
            value: f64::INFINITY,
            lambda: f64::NAN,
            attained: false,
        };
    }
    if best == 0 || best == grid.len() - 1 {
        return LambdaMin {
            value: vals[best],
            lambda: grid[best],
            attained: false,
        };
    }
    let (lambda, value) = golden_section(&g, grid[best - 1], grid[best + 1], rel_tol);
    let (lambda, value) = if value <= vals[best] { (lambda, value) } else { (grid[best], vals[best]) };
    LambdaMin {
        value,
        lambda,
        attained: true,
    }
}

fn golden_section<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    while b - a > rel_tol * 0.5 * (a + b) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = g(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn mgf_or_inf(kernel: &Kernel, lambda: f64) -> f64 {
    kernel.mgf(lambda).unwrap_or(f64::INFINITY)
}

fn heavy_tail_result() -> LambdaMin {
    LambdaMin {
        value: f64::INFINITY,
        lambda: f64::NAN,
        attained: false,
    }
}

/// Linearized speed `inf (M(lambda) - 1 + f'(0)) / lambda` and its minimizer.
pub fn linear_speed(kernel: &Kernel, reaction: &ReactionFn) -> LambdaMin {
    if !kernel.has_finite_mgf_somewhere() {
        return heavy_tail_result();
    }
    let r = reaction.fprime0();
    minimize_over_lambda(|l| (mgf_or_inf(kernel, l) - 1.0 + r) / l)
}

/// Super-solution bound `inf (max{M(lambda), mu(R)} - 1 + sup f(h)/h) / lambda`.
pub fn upper_bound(kernel: &Kernel, reaction: &ReactionFn) -> LambdaMin {
    if !kernel.has_finite_mgf_somewhere() {
        return heavy_tail_result();
    }
    let mass = kernel.total_mass();
    let s = reaction.sup_ratio();
    minimize_over_lambda(|l| (mgf_or_inf(kernel, l).max(mass) - 1.0 + s) / l)
}

/// Recursion lower bound `inf (M(lambda) - 1 + f'(0)/2) / lambda`.
pub fn lower_bound(kernel: &Kernel, reaction: &ReactionFn) -> Result<LambdaMin> {
    if !(reaction.fprime0() > 0.0) {
        return Err(Error::Domain(format!(
            "the lower bound needs f'(0) > 0, got {}",
            reaction.fprime0()
        )));
    }
    if !kernel.has_finite_mgf_somewhere() {
        return Ok(heavy_tail_result());
    }
    let r = 0.5 * reaction.fprime0();
    Ok(minimize_over_lambda(|l| (mgf_or_inf(kernel, l) - 1.0 + r) / l))
}

/// The lower bound recomputed from the truncated series measure of the
/// reflected kernel: `inf (1/lambda) (ln ∫ e^{lambda y} dnu_N - 1 + f'(0)/2)`.
///
/// Only atoms-only kernels are supported. Returns the minimum and the series
/// tail bound.
pub fn lower_bound_from_series(kernel: &Kernel, reaction: &ReactionFn, terms: usize) -> Result<(LambdaMin, f64)> {
    if !(reaction.fprime0() > 0.0) {
        return Err(Error::Domain("the lower bound needs f'(0) > 0".into()));
    }
    let series = exp_series_measure(&kernel.reflect(), terms)?;
    let r = 0.5 * reaction.fprime0();
    let m = minimize_over_lambda(|l| (series.result.exp_moment(l).ln() - 1.0 + r) / l);
    Ok((m, series.tail_bound))
}

/// Which existence theorem applies to a (kernel, reaction) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `M(lambda)` is finite for some `lambda > 0`: monotone waves exist.
    WavesExist,
    /// `M` diverges for every `lambda > 0` and `f'(0) > 0`: no traveling waves.
    NoWaves,
    /// `M` diverges everywhere but `f'(0) = 0`: neither result applies.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::WavesExist => "waves_exist",
            Verdict::NoWaves => "no_waves",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn existence_verdict(kernel: &Kernel, reaction: &ReactionFn) -> Verdict {
    if kernel.has_finite_mgf_somewhere() {
        Verdict::WavesExist
    } else if reaction.fprime0() > 0.0 {
        Verdict::NoWaves
    } else {
        Verdict::Inconclusive
    }
}

/// Formula bounds for one (kernel, reaction) pair plus optional measurements.
///
/// Speeds are positive for fronts invading the 0-state leftward.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedReport {
    pub kernel: String,
    pub reaction: String,
    pub verdict: Verdict,
    /// Linearized speed; a diagnostic, not a bound.
    #[serde(serialize_with = "extended")]
    pub c_linear: f64,
    #[serde(serialize_with = "extended")]
    pub lambda_star: f64,
    pub linear_attained: bool,
    #[serde(serialize_with = "extended")]
    pub c_upper: f64,
    #[serde(serialize_with = "extended")]
    pub lambda_upper: f64,
    pub upper_attained: bool,
    /// `None` when `f'(0) = 0`.
    #[serde(serialize_with = "extended_opt")]
    pub c_lower: Option<f64>,
    #[serde(serialize_with = "extended_opt")]
    pub lambda_lower: Option<f64>,
    pub lower_attained: Option<bool>,
    #[serde(serialize_with = "extended_opt")]
    pub c_measured: Option<f64>,
    pub c_recursion: Option<(f64, f64)>,
    #[serde(serialize_with = "extended_opt")]
    pub truncated_mass: Option<f64>,
}

impl SpeedReport {
    pub fn compute(kernel: &Kernel, reaction: &ReactionFn) -> Self {
        let lin = linear_speed(kernel, reaction);
        let up = upper_bound(kernel, reaction);
        let low = lower_bound(kernel, reaction).ok();
        Self {
            kernel: kernel_label(kernel),
            reaction: reaction.name(),
            verdict: existence_verdict(kernel, reaction),
            c_linear: lin.value,
            lambda_star: lin.lambda,
            linear_attained: lin.attained,
            c_upper: up.value,
            lambda_upper: up.lambda,
            upper_attained: up.attained,
            c_lower: low.map(|m| m.value),
            lambda_lower: low.map(|m| m.lambda),
            lower_attained: low.map(|m| m.attained),
            c_measured: None,
            c_recursion: None,
            truncated_mass: None,
        }
    }

    /// `c_lower - tol <= c_measured <= c_upper + tol`; `None` without a measurement.
    pub fn sandwich_holds(&self, tol: f64) -> Option<bool> {
        let c = self.c_measured?;
        let lower_ok = self.c_lower.is_none_or(|lo| lo - tol <= c);
        Some(lower_ok && c <= self.c_upper + tol)
    }

    /// One CSV row in the `results.csv` column order.
    pub fn csv_row(&self, h: f64, t_end: f64) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt_extended);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kernel,
            self.reaction,
            h,
            t_end,
            opt(self.c_measured),
            fmt_extended(self.c_linear),
            fmt_extended(self.c_upper),
            opt(self.c_lower),
            opt(self.c_recursion.map(|b| b.0)),
            opt(self.c_recursion.map(|b| b.1)),
            self.verdict,
            self.truncated_mass.map_or(String::new(), |m| format!("{m:e}")),
        )
    }
}

/// Header matching [`SpeedReport::csv_row`].
pub const RESULTS_HEADER: &str =
    "kernel_id,reaction_id,h,T,c_measured,c_linear,c_upper,c_lower,c_recursion_lo,c_recursion_hi,verdict,truncated_mass";

pub fn fmt_extended(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn kernel_label(k: &Kernel) -> String {
    let mut parts: Vec<String> = k.atoms().iter().map(|a| format!("{}@{}", a.mass, a.location)).collect();
    if let Some(d) = k.density() {
        parts.push(format!("{}*{}", d.weight, d.family.name()));
    }
    parts.join("+")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Atom, DensityFamily};
    use crate::reaction::ReactionFamily;
    use approx::assert_relative_eq;

    fn two_atom() -> Kernel {
        Kernel::from_atoms(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)]).unwrap()
    }

    fn gaussian() -> Kernel {
        Kernel::from_density(DensityFamily::Gaussian { sigma: 1.0 }).unwrap()
    }

    fn cauchy() -> Kernel {
        Kernel::from_density(DensityFamily::Cauchy { s: 1.0 }).unwrap()
    }

    #[test]
    fn two_atom_speeds() {
        let f = ReactionFn::kpp();
        let lin = linear_speed(&two_atom(), &f);
        assert!(lin.attained);
        assert_relative_eq!(lin.value, 1.508_879_561_538_32, max_relative = 1e-9);
        assert_relative_eq!(lin.lambda, 1.199_678_640_257_73, max_relative = 1e-6);
        let up = upper_bound(&two_atom(), &f);
        assert!((up.value - lin.value).abs() < 1e-9);
        let low = lower_bound(&two_atom(), &f).unwrap();
        assert_relative_eq!(low.value, 1.036_722_342_102_67, max_relative = 1e-9);
        assert_relative_eq!(low.lambda, 0.907_103_293_576_29, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_speeds() {
        let f = ReactionFn::kpp();
        let lin = linear_speed(&gaussian(), &f);
        assert_relative_eq!(lin.value, 0.5f64.exp(), max_relative = 1e-9);
        assert_relative_eq!(lin.lambda, 1.0, max_relative = 1e-6);
        assert!((upper_bound(&gaussian(), &f).value - lin.value).abs() < 1e-9);
        let low = lower_bound(&gaussian(), &f).unwrap();
        assert_relative_eq!(low.value, 1.096_401_920_301_59, max_relative = 1e-9);
        assert!(low.value < lin.value);
    }

    #[test]
    fn heavy_tails_give_infinite_speeds() {
        let f = ReactionFn::kpp();
        let r = SpeedReport::compute(&cauchy(), &f);
        assert_eq!(r.verdict, Verdict::NoWaves);
        assert!(r.c_linear.is_infinite() && r.c_upper.is_infinite());
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["c_upper"], "inf");
        assert_eq!(json["verdict"], "no_waves");
    }

    #[test]
    fn verdicts() {
        let p2 = ReactionFn::power_kpp(2.0).unwrap();
        assert_eq!(existence_verdict(&gaussian(), &ReactionFn::kpp()), Verdict::WavesExist);
        assert_eq!(existence_verdict(&cauchy(), &p2), Verdict::Inconclusive);
        assert!(matches!(lower_bound(&gaussian(), &p2), Err(Error::Domain(_))));
    }

    #[test]
    fn shift_kernel_infimum_is_flagged() {
        let up = upper_bound(&Kernel::dirac(1.0), &ReactionFn::kpp());
        assert!(!up.attained);
        assert_eq!(up.lambda, LAMBDA_MAX);
        assert_relative_eq!(up.value, 1.0 / LAMBDA_MAX, max_relative = 1e-12);
    }

    #[test]
    fn minimizer_is_tolerance_stable() {
        let f = ReactionFn::scaled(2.0, ReactionFamily::Kpp).unwrap();
        for k in [two_atom(), gaussian()] {
            let g = |l: f64| (k.mgf(l).unwrap() - 1.0 + f.fprime0()) / l;
            let a = minimize_with_tol(g, GOLDEN_REL_TOL);
            let b = minimize_with_tol(g, GOLDEN_REL_TOL / 2.0);
            assert!((a.value - b.value).abs() < 1e-6);
        }
    }

    #[test]
    fn series_route_matches_lower_bound() {
        let f = ReactionFn::kpp();
        let direct = lower_bound(&two_atom(), &f).unwrap();
        let (series, tail) = lower_bound_from_series(&two_atom(), &f, 30).unwrap();
        assert!((series.value - direct.value).abs() < 1e-6 + tail);
    }

    #[test]
    fn csv_row_has_twelve_columns() {
        let r = SpeedReport::compute(&two_atom(), &ReactionFn::kpp());
        assert_eq!(r.csv_row(0.05, 40.0).split(',').count(), RESULTS_HEADER.split(',').count());
    }
}
