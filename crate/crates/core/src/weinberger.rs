//! Spreading-speed estimate from the recursion
//! `a_{n+1}(x) = max{ Q[a_n](x + c), phi(x) }`,
//! where `Q` is the time-1 map of `u_t = mû * u - u + f(u)` with the reflected
//! kernel `mû`. Functions here are nonincreasing in `x` (1 on the left, 0 on
//! the right); `c` spreads when the iterates fill the whole line.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::kernel::Kernel;
use crate::reaction::ReactionFn;
use crate::semiflow::{EvolutionProblem, TimeMap};
use crate::speeds;

/// `phi(x) = alpha * clamp(-x / ramp, 0, 1)` on the grid `x_min + i h`.
pub fn make_phi(alpha: f64, ramp: f64, x_min: f64, h: f64, n: usize) -> Result<GridField> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("phi needs alpha in (0, 1), got {alpha}")));
    }
    if !(ramp > 0.0) {
        return Err(Error::Domain(format!("phi needs a positive ramp, got {ramp}")));
    }
    let values = (0..n)
        .map(|i| {
            let x = x_min + i as f64 * h;
            alpha * (-x / ramp).clamp(0.0, 1.0)
        })
        .collect();
    GridField::new(x_min, h, values, alpha, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecursionConfig {
    pub alpha: f64,
    pub ramp: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub x_probe: f64,
    pub n_max: usize,
    /// Sup-norm increment below which a non-spreading sequence counts as settled.
    pub tol: f64,
    pub spread_threshold: f64,
    pub stall_threshold: f64,
    /// Slack allowed in the monotone-in-`n`, range and shape checks.
    pub invariant_tol: f64,
    pub cutoff_mass: f64,
    /// Target bracket width for the bisection.
    pub tol_c: f64,
    /// Bracket expansions allowed when seeding fails.
    pub max_expansions: usize,
}

impl Default for RecursionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            ramp: 1.0,
            x_min: -60.0,
            x_max: 60.0,
            h: 0.2,
            x_probe: 20.0,
            n_max: 4000,
            tol: 1e-6,
            spread_threshold: 0.9,
            stall_threshold: 0.5,
            invariant_tol: 1e-8,
            cutoff_mass: 1e-10,
            tol_c: 0.05,
            max_expansions: 8,
        }
    }
}

impl RecursionConfig {
    fn nodes(&self) -> usize {
        ((self.x_max - self.x_min) / self.h).round() as usize + 1
    }
}

/// One iterate of the recursion.
#[derive(Debug, Clone)]
pub struct RecursionState {
    pub c: f64,
    pub n: usize,
    pub a: GridField,
    pub phi: GridField,
}

impl RecursionState {
    pub fn start(c: f64, phi: GridField) -> Self {
        Self {
            c,
            n: 0,
            a: phi.clone(),
            phi,
        }
    }
}

/// `a_{n+1} = max{ Q[a_n](. + c), phi }`, checking `a_n <= a_{n+1}`, the
/// range `[0, 1]` and monotonicity. Returns the new state and the sup increment.
pub fn recursion_step(state: &RecursionState, q: &TimeMap, invariant_tol: f64) -> Result<(RecursionState, f64)> {
    let moved = q.apply(&state.a)?.advanced_by(state.c);
    let next = moved.max_with(&state.phi)?;
    let drop = state.a.max_excess_over(&next)?;
    if drop > invariant_tol {
        return Err(Error::Invariant(format!(
            "iterate decreased by {drop} at step {} for c = {}",
            state.n + 1,
            state.c
        )));
    }
    if next.min_value() < -invariant_tol || next.max_value() > 1.0 + invariant_tol {
        return Err(Error::Invariant(format!(
            "iterate left [0, 1] at step {}: range [{}, {}]",
            state.n + 1,
            next.min_value(),
            next.max_value()
        )));
    }
    if !next.is_nonincreasing(invariant_tol) {
        return Err(Error::Invariant(format!("iterate not nonincreasing at step {}", state.n + 1)));
    }
    let increment = next.max_excess_over(&state.a)?;
    Ok((
        RecursionState {
            c: state.c,
            n: state.n + 1,
            a: next,
            phi: state.phi.clone(),
        },
        increment,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Spreading,
    NotSpreading,
    Undecided,
}

/// Classify a recorded sequence from its probe values `a_n(x_probe)` and sup
/// increments `|a_n - a_{n-1}|` (`increments[k]` belongs to `probes[k + 1]`).
pub fn classify(probes: &[f64], increments: &[f64], cfg: &RecursionConfig) -> Classification {
    for (n, p) in probes.iter().enumerate().take(cfg.n_max + 1) {
        if *p > cfg.spread_threshold {
            return Classification::Spreading;
        }
        if n > 0 && increments.get(n - 1).is_some_and(|d| *d < cfg.tol) && *p < cfg.stall_threshold {
            return Classification::NotSpreading;
        }
    }
    Classification::Undecided
}

/// Outcome of running the recursion at one speed.
#[derive(Debug, Clone, Serialize)]
pub struct RecursionRun {
    pub c: f64,
    pub class: Classification,
    pub steps: usize,
    pub probes: Vec<f64>,
    pub increments: Vec<f64>,
    /// Largest `a_n - a_{n+1}` seen; the chain `a_n <= a_{n+1}` allows at most `invariant_tol`.
    pub worst_chain_drop: f64,
}

/// Iterates the recursion for one kernel and reaction at several speeds.
#[derive(Debug, Clone)]
pub struct Recursion {
    cfg: RecursionConfig,
    map: TimeMap,
    phi: GridField,
    truncated_mass: f64,
}

impl Recursion {
    pub fn new(kernel: &Kernel, reaction: &ReactionFn, cfg: RecursionConfig) -> Result<Self> {
        if !(cfg.x_probe > 0.0 && cfg.x_probe < cfg.x_max) {
            return Err(Error::Domain(format!(
                "probe {} must lie in (0, {})",
                cfg.x_probe, cfg.x_max
            )));
        }
        let weights = kernel.reflect().discretize(cfg.h, cfg.cutoff_mass)?;
        let truncated_mass = weights.truncated_mass();
        let map = EvolutionProblem::new(weights, reaction.clone()).time_map(1.0)?;
        let phi = make_phi(cfg.alpha, cfg.ramp, cfg.x_min, cfg.h, cfg.nodes())?;
        Ok(Self {
            cfg,
            map,
            phi,
            truncated_mass,
        })
    }

    pub fn config(&self) -> &RecursionConfig {
        &self.cfg
    }

    pub fn phi(&self) -> &GridField {
        &self.phi
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Iterate at speed `c` until classified or `n_max` steps are spent.
    pub fn run(&self, c: f64) -> Result<RecursionRun> {
        let cfg = &self.cfg;
        let mut state = RecursionState::start(c, self.phi.clone());
        let mut probes = vec![state.a.value_at(cfg.x_probe)];
        let mut increments = Vec::new();
        let mut worst_drop = 0.0f64;
        let mut class = classify(&probes, &increments, cfg);
        while class == Classification::Undecided && state.n < cfg.n_max {
            let prev = state.a.clone();
            let (next, inc) = recursion_step(&state, &self.map, cfg.invariant_tol)?;
            worst_drop = worst_drop.max(prev.max_excess_over(&next.a)?);
            state = next;
            probes.push(state.a.value_at(cfg.x_probe));
            increments.push(inc);
            class = classify(&probes, &increments, cfg);
        }
        Ok(RecursionRun {
            c,
            class,
            steps: state.n,
            probes,
            increments,
            worst_chain_drop: worst_drop,
        })
    }

    /// Bisection for `sup{c : spreading}` between seeds, expanding them when
    /// they are misclassified. Undecided speeds are kept out of the bracket.
    pub fn bisect(&self, c_lo: f64, c_hi: f64) -> Result<SpreadingBracket> {
        let tol_c = self.cfg.tol_c;
        let mut history: Vec<RecursionRun> = Vec::new();
        let eval = |c: f64, history: &mut Vec<RecursionRun>| -> Result<Classification> {
            let r = self.run(c)?;
            let class = r.class;
            history.push(r);
            Ok(class)
        };

        let (mut lo, mut hi) = (c_lo.min(c_hi), c_lo.max(c_hi));
        let mut step = (hi - lo).max(0.25);
        let mut lo_class = eval(lo, &mut history)?;
        let mut expansions = 0;
        while lo_class != Classification::Spreading && expansions < self.cfg.max_expansions {
            lo -= step;
            step *= 2.0;
            expansions += 1;
            lo_class = eval(lo, &mut history)?;
        }
        let mut step = (hi - lo).max(0.25);
        let mut hi_class = eval(hi, &mut history)?;
        expansions = 0;
        while hi_class != Classification::NotSpreading && expansions < self.cfg.max_expansions {
            hi += step;
            step *= 2.0;
            expansions += 1;
            hi_class = eval(hi, &mut history)?;
        }
        if lo_class != Classification::Spreading || hi_class != Classification::NotSpreading {
            return Err(Error::BracketSeeding {
                c_lo: lo,
                lo_class: format!("{lo_class:?}"),
                c_hi: hi,
                hi_class: format!("{hi_class:?}"),
            });
        }

        // undecided zone [u_lo, u_hi] once one is found
        let mut zone: Option<(f64, f64)> = None;
        while hi - lo > tol_c {
            match zone {
                None => {
                    let mid = 0.5 * (lo + hi);
                    match eval(mid, &mut history)? {
                        Classification::Spreading => lo = mid,
                        Classification::NotSpreading => hi = mid,
                        Classification::Undecided => zone = Some((mid, mid)),
                    }
                }
                Some((u_lo, u_hi)) => {
                    let lower_open = u_lo - lo > 0.5 * tol_c;
                    let upper_open = hi - u_hi > 0.5 * tol_c;
                    if !lower_open && !upper_open {
                        break;
                    }
                    if lower_open {
                        let mid = 0.5 * (lo + u_lo);
                        match eval(mid, &mut history)? {
                            Classification::Spreading => lo = mid,
                            Classification::NotSpreading => {
                                hi = mid;
                                zone = None;
                                continue;
                            }
                            Classification::Undecided => zone = Some((mid, u_hi)),
                        }
                    }
                    if upper_open {
                        let (u_lo, u_hi) = zone.expect("zone set");
                        let mid = 0.5 * (u_hi + hi);
                        match eval(mid, &mut history)? {
                            Classification::NotSpreading => hi = mid,
                            Classification::Spreading => {
                                lo = mid;
                                zone = None;
                            }
                            Classification::Undecided => zone = Some((u_lo, mid)),
                        }
                    }
                }
            }
        }
        Ok(SpreadingBracket {
            lo,
            hi,
            estimate: 0.5 * (lo + hi),
            width_met: hi - lo <= tol_c * (1.0 + 1e-12),
            undecided_zone: zone,
            truncated_mass: self.truncated_mass,
            history,
        })
    }
}

/// Result of [`Recursion::bisect`]: the largest speed seen spreading and the
/// smallest seen not spreading.
#[derive(Debug, Clone, Serialize)]
pub struct SpreadingBracket {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub width_met: bool,
    pub undecided_zone: Option<(f64, f64)>,
    pub truncated_mass: f64,
    #[serde(skip)]
    pub history: Vec<RecursionRun>,
}

impl SpreadingBracket {
    /// Every spreading speed in the history lies below every non-spreading one.
    pub fn history_is_monotone(&self) -> bool {
        let max_spread = self
            .history
            .iter()
            .filter(|r| r.class == Classification::Spreading)
            .map(|r| r.c)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_stop = self
            .history
            .iter()
            .filter(|r| r.class == Classification::NotSpreading)
            .map(|r| r.c)
            .fold(f64::INFINITY, f64::min);
        max_spread < min_stop
    }

    pub fn worst_chain_drop(&self) -> f64 {
        self.history.iter().map(|r| r.worst_chain_drop).fold(0.0, f64::max)
    }

    /// Rows `c,n,a_probe` for every run, in evaluation order.
    pub fn write_probe_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "c,n,a_probe")?;
        for r in &self.history {
            for (n, p) in r.probes.iter().enumerate() {
                writeln!(w, "{},{n},{p}", r.c)?;
            }
        }
        Ok(())
    }
}

/// Bisection seeded from the formula bounds: the lower bound when it exists
/// (else the linear speed minus one) and the super-solution bound.
pub fn bisect_spreading_speed(kernel: &Kernel, reaction: &ReactionFn, cfg: RecursionConfig) -> Result<SpreadingBracket> {
    let upper = speeds::upper_bound(kernel, reaction).value;
    if !upper.is_finite() {
        return Err(Error::Domain("the recursion needs a finite super-solution bound to seed its bracket".into()));
    }
    let lower = speeds::lower_bound(kernel, reaction)
        .map(|m| m.value)
        .unwrap_or(speeds::linear_speed(kernel, reaction).value - 1.0);
    let rec = Recursion::new(kernel, reaction, cfg)?;
    rec.bisect(lower, upper + 0.05)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Atom;

    fn two_atom() -> Kernel {
        Kernel::from_atoms(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)]).unwrap()
    }

    fn small_cfg() -> RecursionConfig {
        RecursionConfig {
            x_min: -30.0,
            x_max: 30.0,
            h: 0.25,
            x_probe: 10.0,
            n_max: 60,
            ..RecursionConfig::default()
        }
    }

    #[test]
    fn phi_shape() {
        let phi = make_phi(0.5, 1.0, -10.0, 0.25, 81).unwrap();
        assert_eq!(phi.value_at(-10.0), 0.5);
        assert_eq!(phi.value_at(0.0), 0.0);
        assert_eq!(phi.value_at(-0.5), 0.25);
        assert_eq!((phi.left_limit(), phi.right_limit()), (0.5, 0.0));
        assert!(make_phi(1.0, 1.0, -10.0, 0.25, 81).is_err());
        assert!(make_phi(0.0, 1.0, -10.0, 0.25, 81).is_err());
    }

    #[test]
    fn first_step_dominates_phi() {
        let rec = Recursion::new(&two_atom(), &ReactionFn::kpp(), small_cfg()).unwrap();
        let s0 = RecursionState::start(0.7, rec.phi().clone());
        let (s1, _) = recursion_step(&s0, &rec.map, 1e-8).unwrap();
        assert!(s0.a.is_ordered_below(&s1.a, 0.0).unwrap());
    }

    #[test]
    fn favorable_speed_spreads() {
        let rec = Recursion::new(&two_atom(), &ReactionFn::kpp(), small_cfg()).unwrap();
        let run = rec.run(-10.0).unwrap();
        assert_eq!(run.class, Classification::Spreading);
        assert!(run.probes.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn fast_speed_stays_contained() {
        let cfg = RecursionConfig {
            n_max: 50,
            tol: 0.0,
            ..small_cfg()
        };
        let rec = Recursion::new(&two_atom(), &ReactionFn::kpp(), cfg).unwrap();
        let run = rec.run(10.0).unwrap();
        assert_eq!(run.steps, 50);
        assert!(run.probes.iter().all(|p| *p <= 0.5 + 0.1));
        assert!(run.worst_chain_drop <= 1e-8);
    }

    #[test]
    fn classification_contract() {
        let cfg = RecursionConfig {
            n_max: 10,
            ..RecursionConfig::default()
        };
        let rising: Vec<f64> = (0..8).map(|n| 1.0 - 0.5f64.powi(n)).collect();
        assert_eq!(classify(&rising, &[0.1; 7], &cfg), Classification::Spreading);
        assert_eq!(classify(&[0.0, 0.0, 0.0], &[0.0, 0.0], &cfg), Classification::NotSpreading);
        let crawl: Vec<f64> = (0..=10).map(|n| 0.01 * n as f64).collect();
        assert_eq!(classify(&crawl, &[0.01; 10], &cfg), Classification::Undecided);
    }
}
