//! Monostable nonlinearities `f` with `f(0) = f(1) = 0` and `f > 0` on `(0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named reaction families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ReactionFamily {
    /// `u (1 - u)`
    Kpp,
    /// `u^p (1 - u)`, `p >= 1`
    PowerKpp { p: f64 },
    /// `r * base(u)`
    Scaled { r: f64, base: Box<ReactionFamily> },
    /// Piecewise-linear interpolation of samples on a uniform grid of `[0, 1]`,
    /// extended linearly beyond the end segments.
    Tabulated { values: Vec<f64> },
}

impl ReactionFamily {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ReactionFamily::Kpp => u * (1.0 - u),
            ReactionFamily::PowerKpp { p } => power(u, *p) * (1.0 - u),
            ReactionFamily::Scaled { r, base } => r * base.eval(u),
            ReactionFamily::Tabulated { values } => {
                let n = values.len() - 1;
                let du = 1.0 / n as f64;
                let pos = u * n as f64;
                let i = if pos < 0.0 { 0 } else { (pos.floor() as usize).min(n - 1) };
                let t = (u - i as f64 * du) / du;
                values[i] + (values[i + 1] - values[i]) * t
            }
        }
    }

    fn fprime0(&self) -> f64 {
        match self {
            ReactionFamily::Kpp => 1.0,
            ReactionFamily::PowerKpp { p } => {
                if *p == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ReactionFamily::Scaled { r, base } => r * base.fprime0(),
            ReactionFamily::Tabulated { values } => (values[1] - values[0]) * (values.len() - 1) as f64,
        }
    }

    /// Lipschitz constant on `[-0.5, 1.5]`.
    fn lipschitz(&self) -> f64 {
        match self {
            // |1 - 2u| <= 2 on [-0.5, 1.5]
            ReactionFamily::Kpp => 2.0,
            ReactionFamily::PowerKpp { p } => {
                let deriv = |u: f64| (p * power(u, p - 1.0) * (1.0 - u) - power(u, *p)).abs();
                let mut candidates = vec![-0.5, 0.0, (p - 1.0) / (p + 1.0), 1.5];
                candidates.extend((0..=20_000).map(|k| -0.5 + 2.0 * k as f64 / 20_000.0));
                candidates.into_iter().map(deriv).fold(0.0, f64::max)
            }
            ReactionFamily::Scaled { r, base } => r.abs() * base.lipschitz(),
            ReactionFamily::Tabulated { values } => {
                let n = (values.len() - 1) as f64;
                values.windows(2).map(|w| ((w[1] - w[0]) * n).abs()).fold(0.0, f64::max)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ReactionFamily::Kpp => Ok(()),
            ReactionFamily::PowerKpp { p } => {
                if p.is_finite() && *p >= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidReaction(format!("power_kpp needs p >= 1, got {p}")))
                }
            }
            ReactionFamily::Scaled { r, base } => {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(Error::InvalidReaction(format!("scaled needs r > 0, got {r}")));
                }
                base.validate()
            }
            ReactionFamily::Tabulated { values } => {
                if values.len() < 3 {
                    return Err(Error::InvalidReaction("tabulated reaction needs at least 3 samples".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidReaction("tabulated samples must be finite".into()));
                }
                if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
                    return Err(Error::InvalidReaction("tabulated reaction must vanish at 0 and 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            ReactionFamily::Kpp => "kpp".into(),
            ReactionFamily::PowerKpp { p } => format!("power_kpp({p})"),
            ReactionFamily::Scaled { r, base } => format!("scaled({r},{})", base.name()),
            ReactionFamily::Tabulated { values } => format!("tabulated({})", values.len()),
        }
    }
}

fn power(u: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        u.powi(p as i32)
    } else {
        u.signum() * u.abs().powf(p)
    }
}

/// A monostable nonlinearity together with the constants the speed formulas need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionFn {
    family: ReactionFamily,
    fprime0: f64,
    lipschitz: f64,
    sup_ratio: f64,
}

/// Points sampled in `(0, 1)` to check positivity.
const POSITIVITY_SAMPLES: usize = 10_000;
/// Points sampled in `(0, 1.5]` for `sup f(h)/h`.
const SUP_SAMPLES: usize = 150_000;

impl ReactionFn {
    pub fn new(family: ReactionFamily) -> Result<Self> {
        family.validate()?;
        if family.eval(0.0) != 0.0 || family.eval(1.0) != 0.0 {
            return Err(Error::InvalidReaction(format!("{} does not vanish at 0 and 1", family.name())));
        }
        for k in 1..POSITIVITY_SAMPLES {
            let u = k as f64 / POSITIVITY_SAMPLES as f64;
            if !(family.eval(u) > 0.0) {
                return Err(Error::InvalidReaction(format!("{} is not positive at u = {u}", family.name())));
            }
        }
        let fprime0 = family.fprime0();
        if fprime0 < 0.0 {
            return Err(Error::InvalidReaction(format!("negative f'(0) = {fprime0}")));
        }
        let lipschitz = family.lipschitz();
        let sampled = (1..=SUP_SAMPLES)
            .map(|k| {
                let h = 1.5 * k as f64 / SUP_SAMPLES as f64;
                family.eval(h) / h
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let sup_ratio = sampled.max(fprime0);
        Ok(Self {
            family,
            fprime0,
            lipschitz,
            sup_ratio,
        })
    }

    pub fn kpp() -> Self {
        Self::new(ReactionFamily::Kpp).expect("kpp is monostable")
    }

    pub fn power_kpp(p: f64) -> Result<Self> {
        Self::new(ReactionFamily::PowerKpp { p })
    }

    pub fn scaled(r: f64, base: ReactionFamily) -> Result<Self> {
        Self::new(ReactionFamily::Scaled { r, base: Box::new(base) })
    }

    pub fn family(&self) -> &ReactionFamily {
        &self.family
    }

    pub fn name(&self) -> String {
        self.family.name()
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.family.eval(u)
    }

    /// `f'(0)`.
    pub fn fprime0(&self) -> f64 {
        self.fprime0
    }

    /// Lipschitz constant of `f` on `[-0.5, 1.5]`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `sup_{h > 0} f(h) / h`.
    pub fn sup_ratio(&self) -> f64 {
        self.sup_ratio
    }

    /// Whether `f(u) <= f'(0) u` holds on the sampled range.
    pub fn is_kpp_type(&self) -> bool {
        self.sup_ratio <= self.fprime0
    }

    /// Largest `eps` (up to scan resolution) with `(f'(0)/2) h <= f(h)` on
    /// `[0, (1 + e^{f'(0)/2}) eps]`, the smallness window on which the
    /// half-rate linear flow is a sub-solution of the nonlinear one.
    pub fn half_linear_epsilon(&self) -> Result<HalfLinearWindow> {
        if !(self.fprime0 > 0.0) {
            return Err(Error::Domain(format!(
                "half-linear window needs f'(0) > 0, got {}",
                self.fprime0
            )));
        }
        let rate = 0.5 * self.fprime0;
        // (1 + e^{mû(R) + gamma}) with mû(R) = 1 and gamma = f'(0)/2 - 1
        let factor = 1.0 + rate.exp();
        const STEP: f64 = 1e-5;
        const SCAN_MAX: f64 = 1.5;
        let steps = (SCAN_MAX / STEP).round() as usize;
        let mut h_max = SCAN_MAX;
        let mut first_violation = None;
        for k in 1..=steps {
            let h = k as f64 * STEP;
            if rate * h > self.eval(h) {
                h_max = (k - 1) as f64 * STEP;
                first_violation = Some(h);
                break;
            }
        }
        if h_max <= 0.0 {
            return Err(Error::Domain("no positive window satisfies the half-linear bound".into()));
        }
        Ok(HalfLinearWindow {
            epsilon: h_max / factor,
            h_max,
            factor,
            first_violation,
        })
    }
}

/// Result of [`ReactionFn::half_linear_epsilon`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfLinearWindow {
    pub epsilon: f64,
    /// Right end of the certified interval, `factor * epsilon`.
    pub h_max: f64,
    pub factor: f64,
    /// First scanned `h` where the bound fails; `None` if it held on the whole scan.
    pub first_violation: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn families() -> Vec<ReactionFn> {
        vec![
            ReactionFn::kpp(),
            ReactionFn::power_kpp(2.0).unwrap(),
            ReactionFn::power_kpp(1.5).unwrap(),
            ReactionFn::scaled(2.0, ReactionFamily::Kpp).unwrap(),
            ReactionFn::new(ReactionFamily::Tabulated {
                values: vec![0.0, 0.2, 0.3, 0.2, 0.0],
            })
            .unwrap(),
        ]
    }

    #[test]
    fn evaluations() {
        let kpp = ReactionFn::kpp();
        assert_eq!(kpp.eval(0.0), 0.0);
        assert_eq!(kpp.eval(0.5), 0.25);
        assert_eq!(ReactionFn::power_kpp(2.0).unwrap().eval(0.5), 0.125);
    }

    #[test]
    fn kpp_constants() {
        let kpp = ReactionFn::kpp();
        assert_eq!(kpp.fprime0(), 1.0);
        assert_eq!(kpp.sup_ratio(), 1.0);
        assert_eq!(kpp.lipschitz(), 2.0);
        assert!(kpp.is_kpp_type());
    }

    #[test]
    fn fprime0_matches_finite_differences() {
        for f in families() {
            let d = 1e-13;
            let fd = f.eval(d) / d;
            assert!((fd - f.fprime0()).abs() < 1e-6, "{}: {fd} vs {}", f.name(), f.fprime0());
        }
    }

    #[test]
    fn sup_ratio_matches_dense_sampling() {
        for f in families() {
            let n = 1_000_000;
            let dense = (1..=n).map(|k| 1.5 * k as f64 / n as f64).map(|h| f.eval(h) / h).fold(f64::MIN, f64::max);
            let expected = dense.max(f.fprime0());
            assert!((f.sup_ratio() - expected).abs() < 1e-6, "{}", f.name());
            assert!(f.fprime0() <= f.sup_ratio());
        }
    }

    #[test]
    fn increment_ratio_is_bounded_by_one_plus_lipschitz() {
        // g(u) = -u + f(u): -(g(a) - g(b)) / (a - b) <= 1 + L on [-0.5, 1.5]
        for f in families() {
            let g = |u: f64| -u + f.eval(u);
            let n = 4000;
            let mut worst = f64::NEG_INFINITY;
            for i in 0..n {
                let a = -0.5 + 2.0 * i as f64 / n as f64;
                let b = a + 2.0 / n as f64;
                worst = worst.max(-(g(b) - g(a)) / (b - a));
            }
            assert!(worst <= 1.0 + f.lipschitz() + 1e-9, "{}: {worst}", f.name());
        }
    }

    #[test]
    fn rejects_non_monostable() {
        assert!(ReactionFn::power_kpp(0.5).is_err());
        assert!(ReactionFn::new(ReactionFamily::Tabulated { values: vec![0.0, -0.1, 0.0] }).is_err());
        assert!(ReactionFn::new(ReactionFamily::Tabulated { values: vec![0.1, 0.2, 0.0] }).is_err());
    }

    #[test]
    fn half_linear_window_kpp() {
        // u (1 - u) >= u / 2  iff  u <= 1/2
        let w = ReactionFn::kpp().half_linear_epsilon().unwrap();
        assert_relative_eq!(w.h_max, 0.5, max_relative = 1e-12);
        assert_relative_eq!(w.epsilon, 0.188_770_334_399_073, max_relative = 1e-9);
        assert!(w.first_violation.unwrap() > 0.5);
        for k in 0..=1000 {
            let h = w.h_max * k as f64 / 1000.0;
            assert!(0.5 * h <= ReactionFn::kpp().eval(h) + 1e-15);
        }
    }

    #[test]
    fn half_linear_window_scaled() {
        // 2u(1 - u) >= u  iff  u <= 1/2, factor 1 + e
        let w = ReactionFn::scaled(2.0, ReactionFamily::Kpp).unwrap().half_linear_epsilon().unwrap();
        assert_relative_eq!(w.h_max, 0.5, max_relative = 1e-12);
        assert_relative_eq!(w.epsilon, 0.134_470_710_684_998, max_relative = 1e-9);
    }

    #[test]
    fn half_linear_window_needs_positive_slope() {
        let f = ReactionFn::power_kpp(2.0).unwrap();
        assert!(matches!(f.half_linear_epsilon(), Err(Error::Domain(_))));
    }
}
