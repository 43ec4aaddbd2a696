//! A gauge-symmetric hidden-angle model of CHSH games.
//!
//! Each emitted pair is labelled only by its angle relative to each
//! detector, `Δ_A` and `Δ_B`, both distributed with the same parity-symmetric
//! density `ρ` whatever the detectors' relative angle `θ`. The two angles are
//! tied together by the non-linear transformation law
//!
//! `Δ_A = Γ(Γ⁻¹(θ) - Γ⁻¹(Δ_B))`, with `Γ⁻¹(Δ) = 2π∫_0^Δ ρ`,
//!
//! and each detector reports the sign of its own angle. The resulting
//! correlation is `E(θ) = -1 + (2/π)|Γ⁻¹(θ)|`: linear for the uniform density,
//! `-cos θ` for `ρ = |sin Δ|/4`, which scores `2√2` in the CHSH game.
//!
//! Modules:
//!
//! - [`density`]: admissible densities, validation, JSON specs.
//! - [`gammamap`]: the tabulated map `Γ⁻¹` and its inverse `Γ`.
//! - [`engine`]: reproducible, sharded Monte Carlo simulation of game rounds.
//! - [`analytic`]: closed-form correlation, score, identity check, score maximization.
//! - [`holonomy`]: the geometric phase acquired around a cycle of settings.
//! - [`fisher`]: Fisher information about θ and the Cramér-Rao bound.
//!
//! ```
//! use chsh_gauge::{analytic, DensityModel, GameSettings, GammaMap};
//!
//! let map = GammaMap::with_defaults(&DensityModel::quantum())?;
//! let score = analytic::score(&map, &GameSettings::chsh_optimal());
//! assert!((score - 2.0 * 2f64.sqrt()).abs() < 1e-6);
//! # Ok::<(), chsh_gauge::Error>(())
//! ```

pub mod analytic;
pub mod angle;
pub mod density;
pub mod engine;
mod error;
pub mod fisher;
pub mod gammamap;
pub mod holonomy;
pub mod rng;
pub mod simplex;
pub mod stats;

pub use density::{Builtin, DensityModel, DensitySpec, ValidationReport};
pub use engine::{GameConfig, GameResult, GameSettings, Policy, Setting};
pub use error::{Error, Result};
pub use gammamap::GammaMap;

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/gamma-map.md")]
    mod gamma_map {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/correlations.md")]
    mod correlations {}
    #[doc = include_str!("../../../book/src/holonomy.md")]
    mod holonomy {}
    #[doc = include_str!("../../../book/src/fisher.md")]
    mod fisher {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
