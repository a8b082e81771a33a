//! Config-driven runs and their output files.
//!
//! Every CSV starts with a `# config_sha256=... truncated_mass=...` line and
//! every JSON output carries the same two fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, KernelSpec};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::fronts::{fit_speed, track_fronts, FrontTrace, SpeedFit, TrackOptions};
use crate::gallery;
use crate::kernel::{DiscreteWeights, DiscretizeOptions, Kernel};
use crate::reaction::ReactionFn;
use crate::semiflow::EvolutionProblem;
use crate::speeds::{self, SpeedReport, RESULTS_HEADER};
use crate::weinberger::{bisect_spreading_speed, SpreadingBracket};

/// Level whose fitted speed is reported as `c_measured`.
pub const REPORTED_LEVEL: f64 = 0.5;

pub fn provenance_line(config_sha256: &str, truncated_mass: f64) -> String {
    format!("# config_sha256={config_sha256} truncated_mass={truncated_mass:e}")
}

/// A validated configuration with its kernel and reaction built.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: ExperimentConfig,
    kernel: Kernel,
    reaction: ReactionFn,
    sha256: String,
}

/// Level traces and their fitted speeds from one front run.
#[derive(Debug, Clone, Serialize)]
pub struct FrontRun {
    pub traces: Vec<FrontTrace>,
    /// One entry per level; `None` when too few samples fell in the fit window.
    pub fits: Vec<Option<SpeedFit>>,
    pub truncated_mass: f64,
    pub dt: f64,
}

impl FrontRun {
    /// Fitted speed at [`REPORTED_LEVEL`], or at the middle level when it is not tracked.
    pub fn c_measured(&self) -> Option<f64> {
        let i = self
            .traces
            .iter()
            .position(|t| t.level == REPORTED_LEVEL)
            .unwrap_or(self.traces.len() / 2);
        self.fits.get(i).copied().flatten().map(|f| f.c_measured)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    /// `t,x,u` rows.
    Csv,
    /// Little-endian: `u64 n`, `f64 h`, `f64 x_min`, then per snapshot `f64 t` and `n` values.
    Binary,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta {
    pub format: &'static str,
    pub n: usize,
    pub h: f64,
    pub x_min: f64,
    pub times: Vec<f64>,
    pub left_limits: Vec<f64>,
    pub right_limits: Vec<f64>,
    pub dt: f64,
    pub config_sha256: String,
    pub truncated_mass: f64,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let kernel = cfg.build_kernel()?;
        let reaction = cfg.build_reaction()?;
        let sha256 = cfg.sha256();
        Ok(Self {
            cfg,
            kernel,
            reaction,
            sha256,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn reaction(&self) -> &ReactionFn {
        &self.reaction
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn warnings(&self) -> Vec<String> {
        self.cfg.window_warnings(&self.kernel, &self.reaction)
    }

    pub fn weights(&self) -> Result<DiscreteWeights> {
        self.kernel.discretize_with(
            self.cfg.grid.h,
            DiscretizeOptions {
                cutoff_mass: self.cfg.cutoff_mass(&self.kernel)?,
                renormalize: self.cfg.discretize.renormalize,
                ..DiscretizeOptions::default()
            },
        )
    }

    pub fn problem(&self) -> Result<EvolutionProblem> {
        let p = EvolutionProblem::new(self.weights()?, self.reaction.clone());
        match self.cfg.time.dt {
            Some(dt) => p.with_dt(dt),
            None => Ok(p),
        }
    }

    /// Ramp from 0 to 1 starting at `front.x0`.
    pub fn initial_state(&self) -> Result<GridField> {
        let g = &self.cfg.grid;
        GridField::ramp_profile(g.x_min, g.h, g.nodes(), self.cfg.front.x0, self.cfg.front.width)
    }

    /// Evolve and write the trajectory into `out`; returns the written paths.
    pub fn simulate(&self, out: &Path, format: TrajectoryFormat) -> Result<Vec<PathBuf>> {
        let problem = self.problem()?;
        let truncated = problem.weights().truncated_mass();
        let u0 = self.initial_state()?;
        let data_path = out.join(match format {
            TrajectoryFormat::Csv => "trajectory.csv",
            TrajectoryFormat::Binary => "trajectory.bin",
        });
        let mut w = BufWriter::new(File::create(&data_path)?);
        match format {
            TrajectoryFormat::Csv => {
                writeln!(w, "{}", provenance_line(&self.sha256, truncated))?;
                writeln!(w, "t,x,u")?;
            }
            TrajectoryFormat::Binary => {
                w.write_all(&(u0.len() as u64).to_le_bytes())?;
                w.write_all(&u0.h().to_le_bytes())?;
                w.write_all(&u0.x_min().to_le_bytes())?;
            }
        }
        let mut meta = TrajectoryMeta {
            format: match format {
                TrajectoryFormat::Csv => "csv",
                TrajectoryFormat::Binary => "f64-le",
            },
            n: u0.len(),
            h: u0.h(),
            x_min: u0.x_min(),
            times: Vec::new(),
            left_limits: Vec::new(),
            right_limits: Vec::new(),
            dt: problem.dt(),
            config_sha256: self.sha256.clone(),
            truncated_mass: truncated,
        };
        problem.evolve_observed(&u0, self.cfg.time.t_end, self.cfg.time.snap_dt, |t, u| {
            match format {
                TrajectoryFormat::Csv => {
                    for (i, v) in u.values().iter().enumerate() {
                        writeln!(w, "{t},{},{v}", u.x(i))?;
                    }
                }
                TrajectoryFormat::Binary => {
                    w.write_all(&t.to_le_bytes())?;
                    for v in u.values() {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
            meta.times.push(t);
            meta.left_limits.push(u.left_limit());
            meta.right_limits.push(u.right_limit());
            Ok(true)
        })?;
        w.flush()?;
        let meta_path = out.join("trajectory.json");
        write_json(&meta_path, &meta)?;
        Ok(vec![data_path, meta_path])
    }

    /// Track the configured levels and fit their speeds.
    pub fn fronts(&self) -> Result<FrontRun> {
        let problem = self.problem()?;
        let u0 = self.initial_state()?;
        let opts = TrackOptions {
            levels: self.cfg.front.levels.clone(),
            t_end: self.cfg.time.t_end,
            snap_dt: self.cfg.time.snap_dt,
            edge_margin: None,
            stop_when_censored: true,
        };
        let traces = track_fronts(&problem, &u0, &opts)?;
        let [a, b] = self.cfg.front.fit_window;
        let fits = traces.iter().map(|tr| fit_speed(tr, a, b).ok()).collect();
        Ok(FrontRun {
            traces,
            fits,
            truncated_mass: problem.weights().truncated_mass(),
            dt: problem.dt(),
        })
    }

    /// Formula bounds labelled with the config's ids and truncation.
    pub fn bounds(&self) -> Result<SpeedReport> {
        let mut r = SpeedReport::compute(&self.kernel, &self.reaction);
        r.kernel = self.cfg.kernel.label();
        r.truncated_mass = Some(self.weights()?.truncated_mass());
        Ok(r)
    }

    pub fn weinberger(&self) -> Result<SpreadingBracket> {
        let mut cfg = self.cfg.weinberger.clone();
        if let Some(c) = self.cfg.discretize.cutoff_mass {
            cfg.cutoff_mass = c;
        }
        bisect_spreading_speed(&self.kernel, &self.reaction, cfg)
    }

    /// Write `front_<level>.csv` per level and `speed.json`; returns the merged report.
    pub fn write_speed(&self, run: &FrontRun, out: &Path) -> Result<SpeedReport> {
        for tr in &run.traces {
            let path = out.join(format!("front_{}.csv", tr.level));
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{}", provenance_line(&self.sha256, run.truncated_mass))?;
            writeln!(w, "# c_measured = -slope; positive values invade the 0-state leftward")?;
            tr.write_csv(&mut w, true)?;
            w.flush()?;
        }
        let mut report = self.bounds()?;
        report.c_measured = run.c_measured();
        #[derive(Serialize)]
        struct SpeedOut<'a> {
            config_sha256: &'a str,
            truncated_mass: f64,
            levels: Vec<LevelOut<'a>>,
            report: &'a SpeedReport,
            sandwich_holds: Option<bool>,
        }
        #[derive(Serialize)]
        struct LevelOut<'a> {
            level: f64,
            fit: Option<&'a SpeedFit>,
            censored_at: Option<f64>,
            window_warnings: &'a [String],
        }
        let levels = run
            .traces
            .iter()
            .zip(&run.fits)
            .map(|(tr, fit)| LevelOut {
                level: tr.level,
                fit: fit.as_ref(),
                censored_at: tr.censored_at,
                window_warnings: &tr.window_warnings,
            })
            .collect();
        write_json(
            &out.join("speed.json"),
            &SpeedOut {
                config_sha256: &self.sha256,
                truncated_mass: run.truncated_mass,
                levels,
                report: &report,
                sandwich_holds: report.sandwich_holds(0.02),
            },
        )?;
        Ok(report)
    }

    /// Write `bounds.json` and `bounds.csv`. A `speed.json` already in `out`
    /// from the same config contributes its measured speed.
    pub fn write_bounds(&self, out: &Path) -> Result<SpeedReport> {
        let mut report = self.bounds()?;
        if let Some(c) = self.measured_from(out) {
            report.c_measured = Some(c);
        }
        let truncated = report.truncated_mass.unwrap_or(0.0);
        write_json(
            &out.join("bounds.json"),
            &serde_json::json!({
                "config_sha256": self.sha256,
                "truncated_mass": truncated,
                "report": report,
                "sandwich_holds": report.sandwich_holds(0.02),
            }),
        )?;
        let mut w = BufWriter::new(File::create(out.join("bounds.csv"))?);
        writeln!(w, "{}", provenance_line(&self.sha256, truncated))?;
        writeln!(w, "{RESULTS_HEADER}")?;
        writeln!(w, "{}", report.csv_row(self.cfg.grid.h, self.cfg.time.t_end))?;
        w.flush()?;
        Ok(report)
    }

    fn measured_from(&self, out: &Path) -> Option<f64> {
        let text = std::fs::read_to_string(out.join("speed.json")).ok()?;
        let v: serde_json::Value = serde_json::from_str(&text).ok()?;
        if v["config_sha256"] != self.sha256.as_str() {
            return None;
        }
        v["report"]["c_measured"].as_f64()
    }

    /// Write `probes.csv` and `bracket.json`.
    pub fn write_weinberger(&self, bracket: &SpreadingBracket, out: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(out.join("probes.csv"))?);
        writeln!(w, "{}", provenance_line(&self.sha256, bracket.truncated_mass))?;
        bracket.write_probe_csv(&mut w)?;
        w.flush()?;
        #[derive(Serialize)]
        struct Run {
            c: f64,
            class: crate::weinberger::Classification,
            steps: usize,
            worst_chain_drop: f64,
        }
        let runs: Vec<Run> = bracket
            .history
            .iter()
            .map(|r| Run {
                c: r.c,
                class: r.class,
                steps: r.steps,
                worst_chain_drop: r.worst_chain_drop,
            })
            .collect();
        write_json(
            &out.join("bracket.json"),
            &serde_json::json!({
                "config_sha256": self.sha256,
                "truncated_mass": bracket.truncated_mass,
                "bracket": bracket,
                "history_monotone": bracket.history_is_monotone(),
                "runs": runs,
            }),
        )
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// One line of `results.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub t_end: f64,
    pub report: SpeedReport,
}

/// Run every (kernel, reaction, h) combination of the sweep section on a pool
/// of `jobs` threads. Rows come back in grid order.
pub fn sweep(base: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    let mut cases = Vec::new();
    for k in &base.sweep.kernels {
        for r in &base.sweep.reactions {
            for h in &base.sweep.h {
                cases.push((k.clone(), r.clone(), *h));
            }
        }
    }
    let run = |(k, r, h): &(String, String, f64)| -> Result<SweepRow> {
        let mut cfg = base.clone();
        cfg.kernel = KernelSpec::gallery(k);
        cfg.reaction = gallery::reaction(r)
            .ok_or_else(|| Error::InvalidReaction(format!("unknown gallery reaction `{r}`")))?
            .family()
            .clone();
        cfg.grid.h = *h;
        cfg.discretize.cutoff_mass = None;
        let exp = Experiment::new(cfg)?;
        let mut report = exp.bounds()?;
        report.reaction = r.clone();
        report.c_measured = exp.fronts()?.c_measured();
        if base.sweep.recursion
            && exp.kernel().has_finite_mgf_somewhere()
            && speeds::upper_bound(exp.kernel(), exp.reaction()).value.is_finite()
        {
            let b = exp.weinberger()?;
            report.c_recursion = Some((b.lo, b.hi));
        }
        Ok(SweepRow {
            h: *h,
            t_end: base.time.t_end,
            report,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| cases.par_iter().map(run).collect())
}

pub fn write_results_csv<W: Write>(mut w: W, rows: &[SweepRow], config_sha256: &str) -> Result<()> {
    let truncated = rows
        .iter()
        .filter_map(|r| r.report.truncated_mass)
        .fold(0.0, f64::max);
    writeln!(w, "{}", provenance_line(config_sha256, truncated))?;
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.report.csv_row(r.h, r.t_end))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kernel: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_gallery(kernel);
        cfg.grid.x_min = -40.0;
        cfg.grid.x_max = 40.0;
        cfg.grid.h = 0.1;
        cfg.time.t_end = 12.0;
        cfg.front.x0 = 20.0;
        cfg.front.fit_window = [4.0, 12.0];
        cfg
    }

    #[test]
    fn two_atom_front_is_near_its_linear_speed() {
        let exp = Experiment::new(small("two_atom")).unwrap();
        let run = exp.fronts().unwrap();
        let c = run.c_measured().unwrap();
        assert!(c > 1.3 && c < 1.55, "{c}");
        assert!(run.traces.iter().all(|t| t.censored_at.is_none()));
    }

    #[test]
    fn binary_trajectory_layout() {
        let mut cfg = small("two_atom");
        cfg.time.t_end = 1.0;
        cfg.time.snap_dt = 0.5;
        let exp = Experiment::new(cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("nlkpp-traj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        exp.simulate(&dir, TrajectoryFormat::Binary).unwrap();
        let bytes = std::fs::read(dir.join("trajectory.bin")).unwrap();
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        assert_eq!(n, 801);
        assert_eq!(bytes.len(), 24 + 3 * 8 * (n + 1));
        let t1 = f64::from_le_bytes(bytes[24 + 8 * (n + 1)..32 + 8 * (n + 1)].try_into().unwrap());
        assert_eq!(t1, 0.5);
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("trajectory.json")).unwrap()).unwrap();
        assert_eq!(meta["config_sha256"], exp.sha256());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn sweep_rows_are_ordered_and_deterministic() {
        let mut cfg = small("two_atom");
        cfg.time.t_end = 6.0;
        cfg.front.fit_window = [2.0, 6.0];
        cfg.sweep.kernels = vec!["two_atom".into(), "unit_shift".into()];
        cfg.sweep.reactions = vec!["kpp".into()];
        cfg.sweep.h = vec![0.1, 0.2];
        let a = sweep(&cfg, Some(2)).unwrap();
        let b = sweep(&cfg, Some(1)).unwrap();
        let render = |rows: &[SweepRow]| {
            let mut buf = Vec::new();
            write_results_csv(&mut buf, rows, &cfg.sha256()).unwrap();
            String::from_utf8(buf).unwrap()
        };
        assert_eq!(render(&a), render(&b));
        assert_eq!(a.len(), 4);
        assert_eq!(a[1].report.kernel, "two_atom");
        assert_eq!(a[1].h, 0.2);
        assert_eq!(a[2].report.kernel, "unit_shift");
    }
}
