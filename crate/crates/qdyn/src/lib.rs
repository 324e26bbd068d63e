//! Quantum-dynamics optimization toolkit.
//!
//! The crate treats an objective function as the potential term of a
//! Schrödinger-type generator `H = -D d2/dx2 + V(x)` and exposes three
//! coordinated views of the same dynamics:
//!
//! - [`grid`]/[`evolve`]: a 1-D grid solver evolving wave functions in
//!   real time (unitary, dispersive) and imaginary time (diffusive,
//!   relaxing onto the lowest mode),
//! - [`spectral`]: the eigen-decomposition of the discretized generator,
//!   from which spectral propagation, the ground-state limit, and the
//!   time-dependent softmax/sigmoid occupation laws follow,
//! - [`sampler`]: a d-dimensional population optimizer that realizes the
//!   same dynamics stochastically — Gaussian diffusion moves, gradient
//!   drift via double sampling, and diffusion-Monte-Carlo branching —
//!   wrapped in an outer annealing loop that lowers `D`.
//!
//! [`mod@bench`] supplies standard test objectives and a seeded experiment
//! harness; [`export`] writes the data-file formats used by the `qdyn`
//! command-line tool.
//!
//! ```
//! use qdyn::grid::{potentials, Grid, PotentialGrid};
//! use qdyn::spectral::eigensolve;
//!
//! let grid = Grid::new(-10.0, 10.0, 801)?;
//! let pot = PotentialGrid::from_fn(&grid, potentials::harmonic(1.0))?;
//! let spectrum = eigensolve(&pot, 1.0, 2)?;
//! // lowest two levels of -d2/dx2 + x^2 sit near 1 and 3
//! assert!((spectrum.energies()[0] - 1.0).abs() < 1e-3);
//! assert!((spectrum.energies()[1] - 3.0).abs() < 1e-3);
//! # Ok::<(), qdyn::Error>(())
//! ```

pub mod bench;
mod error;
pub mod evolve;
pub mod export;
pub mod grid;
mod linalg;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
pub use evolve::TimeMode;
pub use sampler::SamplerMode;
