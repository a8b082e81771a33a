//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "kernel": { "atoms": [[-1, 0.5], [1, 0.5]] },
//!   "reaction": { "family": "kpp" },
//!   "grid": { "x_min": -150, "x_max": 150, "h": 0.05 },
//!   "time": { "t_end": 40, "snap_dt": 0.25 },
//!   "front": { "levels": [0.1, 0.5, 0.9], "fit_window": [20, 40], "x0": 50, "width": 1 }
//! }
//! ```
//!
//! Every section except `kernel` has defaults. A kernel is either a gallery id
//! (`{"gallery": "gaussian"}`) or atoms plus an optional density
//! (`{"family": "gaussian", "params": {"sigma": 1}, "weight": 1}`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gallery;
use crate::kernel::{Atom, Density, Kernel};
use crate::reaction::{ReactionFamily, ReactionFn};
use crate::speeds;
use crate::weinberger::RecursionConfig;

pub const HEAVY_TAIL_MIN_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gallery: Option<String>,
    /// Label used in result tables; defaults to the gallery id or `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// `[location, mass]` pairs.
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub density: Option<Density>,
    /// Rescale to total mass 1.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

impl KernelSpec {
    pub fn gallery(id: &str) -> Self {
        Self {
            gallery: Some(id.to_string()),
            id: None,
            atoms: Vec::new(),
            density: None,
            normalize: true,
        }
    }

    pub fn label(&self) -> String {
        self.id
            .clone()
            .or_else(|| self.gallery.clone())
            .unwrap_or_else(|| "custom".into())
    }

    pub fn build(&self) -> Result<Kernel> {
        let kernel = match &self.gallery {
            Some(id) => {
                if !self.atoms.is_empty() || self.density.is_some() {
                    return Err(Error::InvalidKernel(
                        "a gallery kernel cannot also list atoms or a density".into(),
                    ));
                }
                gallery::kernel(id).ok_or_else(|| Error::InvalidKernel(format!("unknown gallery kernel `{id}`")))?
            }
            None => {
                let atoms = self.atoms.iter().map(|[y, m]| Atom::new(*y, *m)).collect();
                Kernel::new(atoms, self.density.clone())?
            }
        };
        Ok(if self.normalize { kernel.normalized() } else { kernel })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: -150.0,
            x_max: 150.0,
            h: 0.05,
        }
    }
}

impl GridSpec {
    pub fn nodes(&self) -> usize {
        ((self.x_max - self.x_min) / self.h).round() as usize + 1
    }

    fn check(&self) -> Result<()> {
        if !(self.h > 0.0 && self.x_max > self.x_min) {
            return Err(Error::Domain(format!(
                "grid needs h > 0 and x_max > x_min, got h = {}, [{}, {}]",
                self.h, self.x_min, self.x_max
            )));
        }
        let cells = (self.x_max - self.x_min) / self.h;
        if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) {
            return Err(Error::Domain(format!(
                "window length {} is not a whole number of cells of width {}",
                self.x_max - self.x_min,
                self.h
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(alias = "T")]
    pub t_end: f64,
    /// RK4 step; chosen from the stability budget when absent.
    pub dt: Option<f64>,
    pub snap_dt: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            t_end: 40.0,
            dt: None,
            snap_dt: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontSpec {
    pub levels: Vec<f64>,
    pub fit_window: [f64; 2],
    /// Initial ramp: 0 left of `x0`, 1 right of `x0 + width`.
    pub x0: f64,
    pub width: f64,
}

impl Default for FrontSpec {
    fn default() -> Self {
        Self {
            levels: vec![0.1, 0.5, 0.9],
            fit_window: [20.0, 40.0],
            x0: 50.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizeSpec {
    /// Omitted tail mass; defaults to 1e-10 for light tails and 1e-3 for heavy ones.
    pub cutoff_mass: Option<f64>,
    pub renormalize: bool,
}

impl Default for DiscretizeSpec {
    fn default() -> Self {
        Self {
            cutoff_mass: None,
            renormalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub kernels: Vec<String>,
    pub reactions: Vec<String>,
    pub h: Vec<f64>,
    /// Also bisect the recursion for every light-tailed row.
    pub recursion: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kernels: gallery::KERNEL_IDS.iter().map(|s| s.to_string()).collect(),
            reactions: vec!["kpp".into()],
            h: vec![0.1],
            recursion: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSpec {
    /// Ordered pairs per kernel in the comparison suite.
    pub pairs: usize,
    pub comparison_t: f64,
    pub invariance_t: f64,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self {
            pairs: 20,
            comparison_t: 5.0,
            invariance_t: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    #[serde(default = "kpp")]
    pub reaction: ReactionFamily,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub front: FrontSpec,
    #[serde(default)]
    pub weinberger: RecursionConfig,
    #[serde(default)]
    pub discretize: DiscretizeSpec,
    #[serde(default)]
    pub validate: ValidateSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub seed: u64,
}

fn kpp() -> ReactionFamily {
    ReactionFamily::Kpp
}

impl ExperimentConfig {
    /// Defaults around one gallery kernel.
    pub fn for_gallery(kernel_id: &str) -> Self {
        Self {
            kernel: KernelSpec::gallery(kernel_id),
            reaction: ReactionFamily::Kpp,
            grid: GridSpec::default(),
            time: TimeSpec::default(),
            front: FrontSpec::default(),
            weinberger: RecursionConfig::default(),
            discretize: DiscretizeSpec::default(),
            validate: ValidateSpec::default(),
            sweep: SweepSpec::default(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: format!("at `{}`: {}", e.path(), e.inner()),
        })?;
        cfg.check().map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn check(&self) -> Result<()> {
        self.grid.check()?;
        if !(self.time.t_end >= 0.0 && self.time.snap_dt > 0.0) {
            return Err(Error::Domain("time needs t_end >= 0 and snap_dt > 0".into()));
        }
        if self.front.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Domain("front levels must lie in (0, 1)".into()));
        }
        let [a, b] = self.front.fit_window;
        if !(a < b) {
            return Err(Error::Domain(format!("fit window [{a}, {b}] is empty")));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_kernel(&self) -> Result<Kernel> {
        self.kernel.build()
    }

    pub fn build_reaction(&self) -> Result<ReactionFn> {
        ReactionFn::new(self.reaction.clone())
    }

    /// Heavy tails below [`HEAVY_TAIL_MIN_CUTOFF`] would need a stencil far wider than any window.
    pub fn cutoff_mass(&self, kernel: &Kernel) -> Result<f64> {
        match self.discretize.cutoff_mass {
            None => Ok(gallery::default_cutoff(kernel)),
            Some(c) if !kernel.has_finite_mgf_somewhere() && c < HEAVY_TAIL_MIN_CUTOFF => Err(Error::Domain(format!(
                "heavy-tailed kernels need discretize.cutoff_mass >= {HEAVY_TAIL_MIN_CUTOFF:e}, got {c:e}"
            ))),
            Some(c) => Ok(c),
        }
    }

    /// Warnings about a window too small for the predicted front travel.
    pub fn window_warnings(&self, kernel: &Kernel, reaction: &ReactionFn) -> Vec<String> {
        let c = speeds::upper_bound(kernel, reaction).value;
        let travel_end = self.front.x0 - c * self.time.t_end;
        if !c.is_finite() {
            vec!["the kernel has a heavy tail: fronts accelerate and will leave any window; traces are censored".into()]
        } else if travel_end < self.grid.x_min + 0.1 * (self.grid.x_max - self.grid.x_min) {
            vec![format!(
                "a front moving at the upper bound {c:.4} reaches x = {travel_end:.2} by t = {}, near or past the left edge {}",
                self.time.t_end, self.grid.x_min
            )]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::DensityFamily;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"kernel": {"gallery": "two_atom"}}"#, "inline").unwrap();
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.reaction, ReactionFamily::Kpp);
        assert_eq!(cfg.build_kernel().unwrap().atoms().len(), 2);
    }

    #[test]
    fn atoms_and_density() {
        let text = r#"{
            "kernel": {"atoms": [[0.5, 1]], "density": {"family": "gaussian", "params": {"sigma": 1}, "weight": 1}},
            "reaction": {"family": "power_kpp", "params": {"p": 2}}
        }"#;
        let cfg = ExperimentConfig::from_json(text, "inline").unwrap();
        let k = cfg.build_kernel().unwrap();
        assert!((k.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(k.density().unwrap().family, DensityFamily::Gaussian { sigma: 1.0 });
        assert_eq!(k.atoms()[0].mass, 0.5);
        assert_eq!(cfg.build_reaction().unwrap().fprime0(), 0.0);
    }

    #[test]
    fn unnormalized_kernels_keep_their_mass() {
        let text = r#"{"kernel": {"atoms": [[0, 2]], "normalize": false}}"#;
        let cfg = ExperimentConfig::from_json(text, "inline").unwrap();
        assert_eq!(cfg.build_kernel().unwrap().total_mass(), 2.0);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"kernel": {"gallery": "x"}, "grid": {"h": "a"}}"#, "c.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("grid.h"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"kernel": {}, "time": {"tend": 3}}"#, "c.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("time"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::for_gallery("gaussian");
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.seed = 1;
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }

    #[test]
    fn heavy_tail_warns() {
        let mut cfg = ExperimentConfig::for_gallery("cauchy");
        let k = cfg.build_kernel().unwrap();
        assert_eq!(cfg.cutoff_mass(&k).unwrap(), 1e-3);
        cfg.discretize.cutoff_mass = Some(1e-8);
        assert!(cfg.cutoff_mass(&k).is_err());
        assert_eq!(cfg.window_warnings(&k, &ReactionFn::kpp()).len(), 1);
        let ok = ExperimentConfig::for_gallery("two_atom");
        assert!(ok.window_warnings(&ok.build_kernel().unwrap(), &ReactionFn::kpp()).is_empty());
    }
}
