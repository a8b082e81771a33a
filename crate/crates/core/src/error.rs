use thiserror::Error;

/// Errors raised by kernel construction, evolution and front analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid reaction: {0}")]
    InvalidReaction(String),

    #[error(
        "truncation cutoff {cutoff:e} unreachable within {max_radius} offsets \
         (achieved tail mass {achieved:e}); heavy-tailed kernels need an explicit larger cutoff_mass"
    )]
    CutoffUnreachable {
        cutoff: f64,
        max_radius: usize,
        achieved: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("window [{x_min}, {x_max}] does not contain [{lo}, {hi}]")]
    Window {
        x_min: f64,
        x_max: f64,
        lo: f64,
        hi: f64,
    },

    #[error("level {level} not attained inside window [{x_min}, {x_max}]")]
    LevelNotAttained { level: f64, x_min: f64, x_max: f64 },

    #[error("time step {dt} violates the explicit stability budget: dt * {rate} = {product} > 0.5")]
    Unstable { dt: f64, rate: f64, product: f64 },

    #[error("non-finite state at t = {t} ({detail}); check dt or the kernel configuration")]
    NonFinite { t: f64, detail: String },

    #[error("too few samples: {got} available, {need} required")]
    TooFewSamples { got: usize, need: usize },

    #[error("atom count {count} exceeds cap {cap}; use coarser location merging or fewer terms")]
    AtomExplosion { count: usize, cap: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("bracket seeding failed: c_lo = {c_lo} classified {lo_class}, c_hi = {c_hi} classified {hi_class}")]
    BracketSeeding {
        c_lo: f64,
        lo_class: String,
        c_hi: f64,
        hi_class: String,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
