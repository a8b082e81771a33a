//! Level-set tracking of monotone fronts and speed regression.
//!
//! Fronts connect 0 at `-inf` to 1 at `+inf` and invade the 0-state by moving
//! left, so a travelling wave `psi(x + c t)` has level positions
//! `X(t) = const - c t`. Measured speeds are reported as `c = -slope`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::semiflow::EvolutionProblem;

/// Minimum number of samples a speed fit accepts.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Leftmost `x` where the interpolated field reaches `level`.
pub fn level_position(u: &GridField, level: f64) -> Result<f64> {
    let not_attained = || Error::LevelNotAttained {
        level,
        x_min: u.x_min(),
        x_max: u.x_max(),
    };
    let (lo, hi) = (u.left_limit().min(u.right_limit()), u.left_limit().max(u.right_limit()));
    if !(level > lo && level < hi) {
        return Err(not_attained());
    }
    let vals = u.values();
    let i = vals.iter().position(|v| *v >= level).ok_or_else(not_attained)?;
    if vals[i] == level {
        return Ok(u.x(i));
    }
    if i == 0 {
        // crossing lies between the left limit and the first node, outside the window
        return Err(not_attained());
    }
    let (a, b) = (vals[i - 1], vals[i]);
    Ok(u.x(i - 1) + u.h() * (level - a) / (b - a))
}

/// Time series of level positions.
#[derive(Debug, Clone, Serialize)]
pub struct FrontTrace {
    pub level: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Grid spacing of the tracked field.
    pub grid_h: f64,
    /// Time at which the level left the trusted window, if it did.
    pub censored_at: Option<f64>,
    pub window_warnings: Vec<String>,
}

impl FrontTrace {
    pub fn new(level: f64, grid_h: f64) -> Self {
        Self {
            level,
            times: Vec::new(),
            positions: Vec::new(),
            grid_h,
            censored_at: None,
            window_warnings: Vec::new(),
        }
    }

    /// Build from explicit samples.
    pub fn from_samples(level: f64, grid_h: f64, times: Vec<f64>, positions: Vec<f64>) -> Self {
        Self {
            level,
            times,
            positions,
            grid_h,
            censored_at: None,
            window_warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV rows `t,X_theta,theta`.
    pub fn write_csv<W: Write>(&self, mut w: W, with_header: bool) -> Result<()> {
        if with_header {
            writeln!(w, "t,X_theta,theta")?;
        }
        for (t, x) in self.times.iter().zip(&self.positions) {
            writeln!(w, "{t},{x},{}", self.level)?;
        }
        Ok(())
    }
}

/// Least-squares line through `(t, X(t))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpeedFit {
    /// `-slope`: positive for leftward invasion of the 0-state.
    pub c_measured: f64,
    pub raw_slope: f64,
    pub stderr: f64,
    pub fit_window: (f64, f64),
    pub residual_max: f64,
    pub samples: usize,
}

struct Line {
    slope: f64,
    stderr: f64,
    residual_max: f64,
}

fn least_squares(t: &[f64], x: &[f64]) -> Line {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(x).map(|(ti, xi)| (ti - tm) * (xi - xm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = xm - slope * tm;
    let residuals: Vec<f64> = t.iter().zip(x).map(|(ti, xi)| xi - (intercept + slope * ti)).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = if t.len() > 2 && sxx > 0.0 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let residual_max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Line {
        slope,
        stderr,
        residual_max,
    }
}

fn window_samples(trace: &FrontTrace, t_a: f64, t_b: f64) -> (Vec<f64>, Vec<f64>) {
    let eps = 1e-9 * (t_b - t_a).abs().max(1.0);
    trace
        .times
        .iter()
        .zip(&trace.positions)
        .filter(|(t, _)| **t >= t_a - eps && **t <= t_b + eps)
        .map(|(t, x)| (*t, *x))
        .unzip()
}

/// Fit the front speed on `[t_a, t_b]`.
pub fn fit_speed(trace: &FrontTrace, t_a: f64, t_b: f64) -> Result<SpeedFit> {
    let (t, x) = window_samples(trace, t_a, t_b);
    if t.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            got: t.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    let line = least_squares(&t, &x);
    Ok(SpeedFit {
        c_measured: -line.slope,
        raw_slope: line.slope,
        stderr: line.stderr,
        fit_window: (t_a, t_b),
        residual_max: line.residual_max,
        samples: t.len(),
    })
}

/// Outcome of [`acceleration_test`].
#[derive(Debug, Clone, Serialize)]
pub struct AccelerationReport {
    pub v_early: f64,
    pub v_late: f64,
    pub ratio: f64,
    pub superlinear: bool,
    /// Largest residual of a single linear fit over the whole trace.
    pub residual_max: f64,
    pub span: (f64, f64),
    pub censored_at: Option<f64>,
}

/// Late/early speed ratio that flags acceleration.
pub const ACCELERATION_RATIO: f64 = 1.5;
/// Global-fit residual, in grid cells, that flags a non-constant speed.
pub const ACCELERATION_RESIDUAL_CELLS: f64 = 5.0;

/// Compare fitted speeds on the first and last thirds of the recorded trace.
///
/// A censored trace is analysed over the samples recorded before the exit.
pub fn acceleration_test(trace: &FrontTrace) -> Result<AccelerationReport> {
    const MIN_PER_WINDOW: usize = 3;
    if trace.len() < 3 * MIN_PER_WINDOW {
        return Err(Error::TooFewSamples {
            got: trace.len(),
            need: 3 * MIN_PER_WINDOW,
        });
    }
    let t0 = trace.times[0];
    let t1 = *trace.times.last().expect("nonempty");
    let third = (t1 - t0) / 3.0;
    let (te, xe) = window_samples(trace, t0, t0 + third);
    let (tl, xl) = window_samples(trace, t1 - third, t1);
    if te.len() < MIN_PER_WINDOW || tl.len() < MIN_PER_WINDOW {
        return Err(Error::TooFewSamples {
            got: te.len().min(tl.len()),
            need: MIN_PER_WINDOW,
        });
    }
    let v_early = -least_squares(&te, &xe).slope;
    let v_late = -least_squares(&tl, &xl).slope;
    let global = least_squares(&trace.times, &trace.positions);
    let scale = v_early.abs().max(v_late.abs());
    let ratio = if scale <= 1e-12 {
        1.0
    } else if v_early <= 0.0 {
        f64::INFINITY
    } else {
        v_late / v_early
    };
    let superlinear =
        ratio >= ACCELERATION_RATIO && global.residual_max > ACCELERATION_RESIDUAL_CELLS * trace.grid_h;
    Ok(AccelerationReport {
        v_early,
        v_late,
        ratio,
        superlinear,
        residual_max: global.residual_max,
        span: (t0, t1),
        censored_at: trace.censored_at,
    })
}

/// Options for [`track_fronts`].
#[derive(Debug, Clone)]
pub struct TrackOptions {
    pub levels: Vec<f64>,
    pub t_end: f64,
    pub snap_dt: f64,
    /// Distance from either window edge inside which positions are not trusted.
    /// `None` uses the stencil reach of the problem.
    pub edge_margin: Option<f64>,
    /// Stop integrating once every level has been censored.
    pub stop_when_censored: bool,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            levels: vec![0.5],
            t_end: 40.0,
            snap_dt: 0.5,
            edge_margin: None,
            stop_when_censored: true,
        }
    }
}

/// Evolve `u0` and record the level positions at every snapshot.
pub fn track_fronts(problem: &EvolutionProblem, u0: &GridField, opts: &TrackOptions) -> Result<Vec<FrontTrace>> {
    let margin = opts.edge_margin.unwrap_or_else(|| problem.stencil_reach());
    let lo = u0.x_min() + margin;
    let hi = u0.x_max() - margin;
    let mut traces: Vec<FrontTrace> = opts.levels.iter().map(|l| FrontTrace::new(*l, u0.h())).collect();
    problem.evolve_observed(u0, opts.t_end, opts.snap_dt, |t, u| {
        for tr in traces.iter_mut().filter(|tr| tr.censored_at.is_none()) {
            match level_position(u, tr.level) {
                Ok(x) if x >= lo && x <= hi => {
                    tr.times.push(t);
                    tr.positions.push(x);
                }
                Ok(x) => {
                    tr.window_warnings.push(format!(
                        "t = {t}: level {} at x = {x} entered the boundary zone outside [{lo}, {hi}]",
                        tr.level
                    ));
                    tr.censored_at = Some(t);
                }
                Err(e) => {
                    tr.window_warnings.push(format!("t = {t}: {e}"));
                    tr.censored_at = Some(t);
                }
            }
        }
        Ok(!(opts.stop_when_censored && traces.iter().all(|tr| tr.censored_at.is_some())))
    })?;
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_positions() {
        let ramp = GridField::ramp_profile(-10.0, 0.25, 81, 0.0, 2.0).unwrap();
        assert_eq!(level_position(&ramp, 0.5).unwrap(), 1.0);
        let step = GridField::ramp_profile(-10.0, 0.25, 81, 0.0, 0.0).unwrap();
        assert_eq!(level_position(&step, 0.5).unwrap(), 0.0);
        let shifted = GridField::ramp_profile(-10.0, 0.25, 81, 3.0, 2.0).unwrap();
        assert_eq!(level_position(&shifted, 0.5).unwrap(), 4.0);
    }

    #[test]
    fn unattained_levels_carry_the_window() {
        let ramp = GridField::ramp_profile(-10.0, 0.25, 81, 0.0, 2.0).unwrap();
        match level_position(&ramp, 1.0) {
            Err(Error::LevelNotAttained { x_min, x_max, .. }) => assert_eq!((x_min, x_max), (-10.0, 10.0)),
            other => panic!("{other:?}"),
        }
        let full = GridField::new(0.0, 1.0, vec![0.9, 1.0], 0.0, 1.0).unwrap();
        assert!(level_position(&full, 0.5).is_err());
    }

    fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> FrontTrace {
        let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let positions = times.iter().map(|t| f(*t)).collect();
        FrontTrace::from_samples(0.5, 0.1, times, positions)
    }

    #[test]
    fn fit_of_exact_lines() {
        let tr = synthetic(|t| 5.0 - 2.0 * t, 10.0, 20);
        let fit = fit_speed(&tr, 0.0, 10.0).unwrap();
        assert!((fit.c_measured - 2.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert_eq!(fit.raw_slope, -fit.c_measured);
        let flat = synthetic(|_| 3.0, 10.0, 20);
        assert_eq!(fit_speed(&flat, 0.0, 10.0).unwrap().c_measured, 0.0);
    }

    #[test]
    fn fit_needs_samples() {
        let tr = synthetic(|t| t, 10.0, 20);
        assert!(matches!(fit_speed(&tr, 0.0, 3.0), Err(Error::TooFewSamples { got: 7, .. })));
    }

    #[test]
    fn acceleration_of_lines_and_parabolas() {
        let line = acceleration_test(&synthetic(|t| 4.0 - 1.5 * t, 30.0, 60)).unwrap();
        assert!(!line.superlinear);
        assert!((line.ratio - 1.0).abs() < 1e-12);
        let parabola = acceleration_test(&synthetic(|t| -t * t, 30.0, 60)).unwrap();
        assert!(parabola.superlinear);
        assert!((parabola.ratio - 5.0).abs() < 1e-9);
    }
}
