//! Closed-form correlations and CHSH scores of the model.
//!
//! For a density ρ the correlation at relative angle θ is
//! `E(θ) = -1 + (2/π)|Γ⁻¹(θ)|`. It is even, satisfies `E(π - θ) = -E(θ)`,
//! and takes the calibration values `E(0) = -1`, `E(±π/2) = 0`, `E(±π) = 1`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{GameSettings, Setting};
use crate::error::{Error, Result};
use crate::gammamap::GammaMap;
use crate::simplex::{self, SearchOptions};

/// Default number of multi-starts for [`maximize_score`].
pub const DEFAULT_STARTS: usize = 64;

/// `E(θ) = -1 + (2/π)|Γ⁻¹(θ)|`.
pub fn correlation(map: &GammaMap, theta: f64) -> f64 {
    -1.0 + 2.0 / PI * map.ginv(theta).abs()
}

/// Correlations at the four settings, canonical order.
pub fn correlations(map: &GammaMap, settings: &GameSettings) -> [f64; 4] {
    settings.theta.map(|t| correlation(map, t))
}

/// `|E₁₁ + E₂₁ + E₂₂ - E₁₂|`.
pub fn score(map: &GammaMap, settings: &GameSettings) -> f64 {
    score_of(&correlations(map, settings))
}

pub(crate) fn score_of(e: &[f64; 4]) -> f64 {
    Setting::ALL
        .iter()
        .map(|&s| s.score_sign() * e[s.index()])
        .sum::<f64>()
        .abs()
}

/// One assignment of the four outcomes `(S_A1, S_A2, S_B1, S_B2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub outcomes: [i8; 4],
    pub value: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub assignments: Vec<Assignment>,
    /// Every assignment evaluates to exactly 2.
    pub holds: bool,
}

/// `|S_A1·S_B1 + S_A2·S_B1 + S_A2·S_B2 - S_A1·S_B2|` for one assignment.
pub fn chsh_value([a1, a2, b1, b2]: [i8; 4]) -> i32 {
    let (a1, a2, b1, b2) = (a1 as i32, a2 as i32, b1 as i32, b2 as i32);
    (a1 * b1 + a2 * b1 + a2 * b2 - a1 * b2).abs()
}

/// Evaluates the CHSH combination on all 16 joint assignments of four
/// binary outcomes. It equals 2 on every one of them, which is why any model
/// assigning all four outcomes at once cannot score above 2.
pub fn chsh_identity_check() -> IdentityReport {
    let assignments: Vec<Assignment> = (0u8..16)
        .map(|bits| {
            let outcomes = [0, 1, 2, 3].map(|i| if bits >> (3 - i) & 1 == 0 { 1 } else { -1 });
            Assignment {
                outcomes,
                value: chsh_value(outcomes),
            }
        })
        .collect();
    let holds = assignments.iter().all(|a| a.value == 2);
    IdentityReport { assignments, holds }
}

/// Correlation sampled on a closed grid over `[-π, π]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationCurve {
    pub density: String,
    pub theta: Vec<f64>,
    pub e: Vec<f64>,
}

impl CorrelationCurve {
    /// Largest violation of `E(-θ) = E(θ)`, `E(π - θ) = -E(θ)` and
    /// `|E| ≤ 1` over the curve's nodes.
    pub fn symmetry_residual(&self, map: &GammaMap) -> f64 {
        self.theta
            .iter()
            .zip(&self.e)
            .map(|(&t, &e)| {
                let even = (correlation(map, -t) - e).abs();
                let odd = (correlation(map, PI - t) + e).abs();
                let bound = (e.abs() - 1.0).max(0.0);
                even.max(odd).max(bound)
            })
            .fold(0.0, f64::max)
    }

    /// CSV with header `theta,E`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "E"])?;
        for (t, e) in self.theta.iter().zip(&self.e) {
            w.write_record([t.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `E` on `n_points` equally spaced nodes `-π, …, π`. The closing node `π`
/// is the same point of the circle as `-π`.
pub fn sweep(map: &GammaMap, n_points: usize) -> Result<CorrelationCurve> {
    if n_points < 3 {
        return Err(Error::Domain {
            module: "analytic",
            value: n_points as f64,
            domain: "n_points >= 3",
        });
    }
    let step = TAU / (n_points - 1) as f64;
    let theta: Vec<f64> = (0..n_points)
        .map(|k| {
            if k == n_points - 1 {
                PI
            } else {
                -PI + k as f64 * step
            }
        })
        .collect();
    let e = theta.iter().map(|&t| correlation(map, t)).collect();
    Ok(CorrelationCurve {
        density: map.density().name().to_string(),
        theta,
        e,
    })
}

/// Best settings found by [`maximize_score`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreOptimum {
    pub settings: GameSettings,
    pub score: f64,
    /// Detector orientations `(a1, a2, b1, b2)` with `b1 = 0`.
    pub detectors: [f64; 4],
    pub starts: usize,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Settings from the three relative detector angles `(a1, a2, b2)`, `b1 = 0`.
fn settings_from_params(p: &[f64]) -> GameSettings {
    GameSettings::from_detectors(p[0], p[1], 0.0, p[2]).expect("finite parameters")
}

/// Maximizes the score over additive settings.
///
/// The search runs over detector orientations `(a1, a2, b2)` relative to
/// `b1`, so `θ_ij = a_i - b_j` is additive by construction. Starts are
/// spread over a uniform coarse grid of the 3-torus; each start runs
/// Nelder-Mead and a compass polish to `tol`.
pub fn maximize_score(map: &GammaMap, starts: usize, tol: f64) -> Result<ScoreOptimum> {
    if starts == 0 {
        return Err(Error::Domain {
            module: "analytic",
            value: 0.0,
            domain: "starts >= 1",
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain {
            module: "analytic",
            value: tol,
            domain: "tol > 0",
        });
    }
    let per_axis = (1..).find(|k: &usize| k.pow(3) >= starts).unwrap();
    let cells = per_axis.pow(3);
    let center = |i: usize| -PI + TAU * (i as f64 + 0.5) / per_axis as f64;
    let points: Vec<[f64; 3]> = (0..starts)
        .map(|s| {
            let c = s * cells / starts;
            [
                center(c / (per_axis * per_axis)),
                center(c / per_axis % per_axis),
                center(c % per_axis),
            ]
        })
        .collect();

    let objective = |p: &[f64]| -score(map, &settings_from_params(p));
    let opts = SearchOptions {
        tol,
        ..SearchOptions::default()
    };
    let results: Vec<_> = points
        .par_iter()
        .map(|p| simplex::minimize(objective, p, opts))
        .collect();

    let iterations = results.iter().map(|r| r.iterations).sum();
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    // first strictly best start wins, so ties resolve by start order
    let best = results
        .iter()
        .reduce(|best, r| if r.value < best.value { r } else { best })
        .expect("at least one start");
    let wrap = crate::angle::wrap;
    let settings = settings_from_params(&best.x);
    Ok(ScoreOptimum {
        score: score(map, &settings),
        settings,
        detectors: [wrap(best.x[0]), wrap(best.x[1]), 0.0, wrap(best.x[2])],
        starts,
        iterations,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityModel;
    use std::sync::LazyLock;

    static QUANTUM: LazyLock<GammaMap> =
        LazyLock::new(|| GammaMap::with_defaults(&DensityModel::quantum()).unwrap());
    static UNIFORM: LazyLock<GammaMap> =
        LazyLock::new(|| GammaMap::with_defaults(&DensityModel::uniform()).unwrap());

    #[test]
    fn correlation_examples() {
        assert!(correlation(&UNIFORM, PI / 2.0).abs() < 1e-12);
        assert!((correlation(&QUANTUM, PI / 4.0) + 0.707_106_781_186_547_5).abs() < 1e-9);
        for map in [&*QUANTUM, &*UNIFORM] {
            assert_eq!(correlation(map, 0.0), -1.0);
            assert!((correlation(map, PI) - 1.0).abs() < 1e-15);
            assert!((correlation(map, -PI) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn score_examples() {
        let s = GameSettings::chsh_optimal();
        assert!((score(&QUANTUM, &s) - 2.0 * 2f64.sqrt()).abs() < 1e-6);
        assert!((score(&UNIFORM, &s) - 2.0).abs() < 1e-9);
        // equal angles: |3E - E| = 2|E|
        for t in [0.3, 1.0, 2.5] {
            let eq = GameSettings::new([t; 4], true).unwrap();
            let e = correlation(&QUANTUM, t);
            assert!((score(&QUANTUM, &eq) - 2.0 * e.abs()).abs() < 1e-12);
            assert!(score(&QUANTUM, &eq) <= 2.0);
        }
    }

    #[test]
    fn identity_examples() {
        assert_eq!(chsh_value([1, 1, 1, 1]), 2);
        assert_eq!(chsh_value([1, -1, 1, -1]), 2);
        let report = chsh_identity_check();
        assert_eq!(report.assignments.len(), 16);
        assert!(report.holds);
        let mut seen: Vec<_> = report.assignments.iter().map(|a| a.outcomes).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn sweep_examples() {
        let curve = sweep(&QUANTUM, 5).unwrap();
        let expected = [1.0, 0.0, -1.0, 0.0, 1.0];
        for (e, x) in curve.e.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12, "{curve:?}");
        }
        let curve = sweep(&UNIFORM, 9).unwrap();
        // node 5 is π/4
        assert!((curve.theta[5] - PI / 4.0).abs() < 1e-15);
        assert!((curve.e[5] + 0.5).abs() < 1e-12);
        for map in [&*QUANTUM, &*UNIFORM] {
            assert!(sweep(map, 1001).unwrap().symmetry_residual(map) <= 1e-8);
        }
        assert!(sweep(&QUANTUM, 2).is_err());
    }

    #[test]
    fn curve_csv() {
        let mut buf = Vec::new();
        sweep(&QUANTUM, 3).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta,E\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn optimizer_on_builtins() {
        let q = maximize_score(&QUANTUM, 8, 1e-9).unwrap();
        assert!((q.score - 2.0 * 2f64.sqrt()).abs() < 1e-3, "{q:?}");
        assert!(q.settings.additivity_residual() <= 1e-12);
        let u = maximize_score(&UNIFORM, 8, 1e-9).unwrap();
        assert!((u.score - 2.0).abs() < 1e-3, "{u:?}");
        assert!(maximize_score(&QUANTUM, 0, 1e-9).is_err());
    }
}
