//! Complex Langevin dynamics for one-variable complex actions, checked against
//! independent routes to the same moments.
//!
//! - [`actions`]: quartic and quadratic actions, drift, noise split, exact equilibrium moments.
//! - [`moments`]: exact integer short-time series of ⟨z^p⟩ by recursion and by the Langevin operator.
//! - [`borel`]: Borel transform of those series and its Laplace resummation M_p(t).
//! - [`langevin`]: reproducible trajectory ensembles, breakdown detection, histograms.
//! - [`spectral1d`]: sextic Fokker-Planck Hamiltonian, levels and spectral norms.
//! - [`spectral2d`]: two-variable Fokker-Planck operator, spectrum and ground state.
//! - [`harmonic`]: closed forms for the quadratic action.
//! - [`cli`]: the `complex-langevin` command line.
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```text
//! cargo run --release --example series_table
//! cargo run --release --example borel_transform
//! cargo run --release --example derived_moments
//! cargo run --release --example supertask
//! cargo run --release --example langevin_ensemble -- 20000 1.0 1e-4 0.5 1.0 20
//! cargo run --release --example breakdown_fit
//! cargo run --release --example spectrum_1d
//! cargo run --release --example spectrum_2d -- 1.0 50
//! cargo run --release --example harmonic_oscillator
//! cargo run --release --example cli_pipeline
//! ```

pub mod actions;
pub mod borel;
pub mod cli;
pub mod error;
pub mod harmonic;
pub mod hermite;
pub mod io;
pub mod langevin;
pub mod linalg;
pub mod moments;
pub mod spectral1d;
pub mod spectral2d;

pub use error::{Error, Result};
