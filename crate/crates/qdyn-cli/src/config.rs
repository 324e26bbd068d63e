//! Subcommand parameter sets: built-in defaults, overridden by a JSON
//! config file (`--config`), overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use qdyn::grid::{potentials, Grid, PotentialGrid, WaveFunction};
use qdyn::{Error, TimeMode};

/// Named potential (with parameters) or a tabulated `x,value` CSV.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Harmonic {
        #[serde(default = "one")]
        k: f64,
    },
    DoubleWell {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    Free,
    Table {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    /// Maps a `--potential` flag value: a builtin name or a CSV path.
    pub fn from_flag(value: &str) -> Self {
        match value {
            "harmonic" => PotentialSpec::Harmonic { k: 1.0 },
            "double_well" => PotentialSpec::DoubleWell { a: 1.0, b: 1.0 },
            "free" => PotentialSpec::Free,
            path => PotentialSpec::Table {
                path: PathBuf::from(path),
            },
        }
    }

    pub fn build(&self, grid: &Grid) -> Result<PotentialGrid, Error> {
        match self {
            PotentialSpec::Harmonic { k } => PotentialGrid::from_fn(grid, potentials::harmonic(*k)),
            PotentialSpec::DoubleWell { a, b } => {
                PotentialGrid::from_fn(grid, potentials::double_well(*a, *b))
            }
            PotentialSpec::Free => PotentialGrid::from_fn(grid, potentials::free()),
            PotentialSpec::Table { path } => build_table(grid, path),
        }
    }
}

/// Loads `x,value` rows (optional header) and linearly interpolates them
/// onto the grid. The table must cover the full domain.
fn build_table(grid: &Grid, path: &Path) -> Result<PotentialGrid, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read potential table {path:?}: {e}")))?;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let a = parts.next().unwrap_or("");
        let b = parts.next().unwrap_or("");
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(v)) => rows.push((x, v)),
            _ if lineno == 0 => continue, // header
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "potential table {path:?}: bad row at line {}",
                    lineno + 1
                )))
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "potential table {path:?} needs at least two rows"
        )));
    }
    rows.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite abscissae"));
    let (x_lo, x_hi) = (rows[0].0, rows[rows.len() - 1].0);
    if grid.x_min() < x_lo || grid.x_max() > x_hi {
        return Err(Error::InvalidConfig(format!(
            "potential table covers [{x_lo}, {x_hi}] but the grid spans [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    PotentialGrid::from_fn(grid, move |x| {
        let idx = rows.partition_point(|p| p.0 < x).min(rows.len() - 1).max(1);
        let (x0, v0) = rows[idx - 1];
        let (x1, v1) = rows[idx];
        if x1 == x0 {
            v0
        } else {
            v0 + (v1 - v0) * (x - x0) / (x1 - x0)
        }
    })
}

/// Initial wave function.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Normalized Gaussian with density width `sigma` around `center`.
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// Normalized flat profile over the interior.
    Constant,
    /// Discrete point source of unit mass (`1/dx` at one node).
    Point {
        #[serde(default)]
        center: f64,
    },
}

fn default_sigma() -> f64 {
    0.8
}

impl InitialSpec {
    pub fn build(&self, grid: &Grid) -> WaveFunction {
        match self {
            InitialSpec::Gaussian { center, sigma } => {
                WaveFunction::gaussian(grid, *center, *sigma)
            }
            InitialSpec::Constant => WaveFunction::flat(grid),
            InitialSpec::Point { center } => WaveFunction::point_source(grid, *center),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub mode: TimeMode,
    pub potential: PotentialSpec,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub d: f64,
    pub dt: f64,
    pub steps: usize,
    pub renormalize: Option<bool>,
    pub sample_every: usize,
    pub initial: InitialSpec,
}

impl Default for EvolveParams {
    fn default() -> Self {
        EvolveParams {
            mode: TimeMode::Imaginary,
            potential: PotentialSpec::Harmonic { k: 1.0 },
            x_min: -10.0,
            x_max: 10.0,
            n_points: 2001,
            d: 1.0,
            dt: 1e-3,
            steps: 1000,
            renormalize: None,
            sample_every: 0,
            initial: InitialSpec::Gaussian {
                center: 0.0,
                sigma: 0.8,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub potential: PotentialSpec,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub d: f64,
    pub levels: usize,
    /// Write one `state_NNN.csv` per eigenstate.
    pub states: bool,
    /// `(tau_max, k)` for the occupation-trace CSV.
    pub softmax_trace: Option<(f64, usize)>,
    pub trace_rows: usize,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            potential: PotentialSpec::Harmonic { k: 1.0 },
            x_min: -10.0,
            x_max: 10.0,
            n_points: 2001,
            d: 1.0,
            levels: 16,
            states: false,
            softmax_trace: None,
            trace_rows: 101,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeParams {
    pub objective: String,
    pub dim: usize,
    pub mode: qdyn::SamplerMode,
    pub seed: u64,
    pub n_walkers: usize,
    pub target_walkers: Option<usize>,
    pub dtau: f64,
    pub eref_gain: f64,
    pub fd_offset_factor: f64,
    pub max_evaluations: usize,
    pub reseed_around_best: bool,
    pub d_initial: Option<f64>,
    pub d_min: Option<f64>,
    pub decay: f64,
    pub inner_steps: usize,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        let base = qdyn::sampler::OptimizerConfig::default();
        OptimizeParams {
            objective: "sphere".into(),
            dim: 2,
            mode: qdyn::SamplerMode::Drift,
            seed: base.seed,
            n_walkers: base.n_walkers,
            target_walkers: None,
            dtau: base.dtau,
            eref_gain: base.eref_gain,
            fd_offset_factor: base.fd_offset_factor,
            max_evaluations: base.max_evaluations,
            reseed_around_best: false,
            d_initial: None,
            d_min: None,
            decay: 0.5,
            inner_steps: 50,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavepacketParams {
    pub sigma0: f64,
    pub d: f64,
    pub t_max: f64,
    pub dt: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub samples: usize,
}

impl Default for WavepacketParams {
    fn default() -> Self {
        WavepacketParams {
            sigma0: 1.0,
            d: 1.0,
            t_max: 3.0,
            dt: 2e-3,
            x_min: -40.0,
            x_max: 40.0,
            n_points: 2001,
            samples: 50,
        }
    }
}

/// Parses a JSON config file into the given parameter type, reporting
/// line/column diagnostics on malformed input.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {path:?}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| {
        format!(
            "config {path:?}: {} (line {}, column {})",
            e,
            e.line(),
            e.column()
        )
    })
}
