//! Fisher information about the relative angle carried by the "same / opposite
//! outcome" Bernoulli variable.
//!
//! For `θ ∈ [0, π)` the probability of equal outcomes is
//! `p₊(θ) = 2∫_0^θ ρ = Γ⁻¹(θ)/π` and the information is
//! `I(θ) = 4ρ(θ)² / (p₊(1 - p₊))`. The quantum density makes it identically 1.
//! The information is singular at `θ ∈ {0, π}`, so profiles use a strictly
//! interior grid.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gammamap::GammaMap;

/// Default distance kept from the singular endpoints.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Default number of profile points.
pub const DEFAULT_POINTS: usize = 1001;

/// A shrink of the margin by this factor probes for endpoint divergence.
const DIVERGENCE_SHRINK: f64 = 10.0;

/// Relative growth of the mean under that shrink that counts as divergent.
const DIVERGENCE_GROWTH: f64 = 0.10;

/// `p₊(θ) = Γ⁻¹(θ)/π` for `θ ∈ [0, π)`.
pub fn p_plus(map: &GammaMap, theta: f64) -> Result<f64> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::Domain {
            module: "fisher",
            value: theta,
            domain: "[0, pi)",
        });
    }
    Ok(map.ginv(theta) / PI)
}

/// `I(θ) = 4ρ(θ)² / (p₊(θ)(1 - p₊(θ)))` for `θ ∈ (0, π)`.
pub fn fisher_info(map: &GammaMap, theta: f64) -> Result<f64> {
    if theta == 0.0 || theta == PI {
        return Err(Error::Singular(theta));
    }
    let p = p_plus(map, theta)?;
    let denom = p * (1.0 - p);
    if denom <= 0.0 {
        return Err(Error::Singular(theta));
    }
    let rho = map.density().value(theta);
    Ok(4.0 * rho * rho / denom)
}

/// Lower bound `1/I` on the variance of an unbiased estimator of θ.
pub fn cramer_rao_bound(info: f64) -> Result<f64> {
    if info > 0.0 && info.is_finite() {
        Ok(1.0 / info)
    } else {
        Err(Error::Domain {
            module: "fisher",
            value: info,
            domain: "(0, inf)",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherProfile {
    pub density: String,
    pub margin: f64,
    pub theta: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub fisher: Vec<f64>,
}

impl FisherProfile {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `max |I(θ) - c|` over the profile.
    pub fn max_deviation_from(&self, c: f64) -> f64 {
        self.fisher
            .iter()
            .map(|i| (i - c).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `theta,p_plus,fisher`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "p_plus", "fisher"])?;
        for k in 0..self.len() {
            w.write_record([
                self.theta[k].to_string(),
                self.p_plus[k].to_string(),
                self.fisher[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `p₊` and `I` on `points` equally spaced angles over `[margin, π - margin]`.
pub fn fisher_profile(map: &GammaMap, points: usize, margin: f64) -> Result<FisherProfile> {
    if !(margin > 0.0 && margin < PI / 2.0) {
        return Err(Error::Domain {
            module: "fisher",
            value: margin,
            domain: "margin in (0, pi/2)",
        });
    }
    if points == 0 {
        return Err(Error::Domain {
            module: "fisher",
            value: 0.0,
            domain: "points >= 1",
        });
    }
    let span = PI - 2.0 * margin;
    let theta: Vec<f64> = if points == 1 {
        vec![PI / 2.0]
    } else {
        (0..points)
            .map(|k| margin + span * k as f64 / (points - 1) as f64)
            .collect()
    };
    let p_plus = theta
        .iter()
        .map(|&t| p_plus(map, t))
        .collect::<Result<Vec<_>>>()?;
    let fisher = theta
        .iter()
        .map(|&t| fisher_info(map, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(FisherProfile {
        density: map.density().name().to_string(),
        margin,
        theta,
        p_plus,
        fisher,
    })
}

/// Interval mean of a profile and an endpoint-divergence probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FisherSummary {
    pub mean: f64,
    pub max_dev_from_mean: f64,
    pub divergence_flag: bool,
    /// Mean over the same number of points with the margin shrunk tenfold.
    pub shrunk_margin_mean: f64,
}

/// Trapezoidal mean of `I` over the profile's interval.
fn trapezoid_mean(profile: &FisherProfile) -> f64 {
    if profile.len() == 1 {
        return profile.fisher[0];
    }
    let integral: f64 = profile
        .theta
        .windows(2)
        .zip(profile.fisher.windows(2))
        .map(|(t, i)| 0.5 * (t[1] - t[0]) * (i[0] + i[1]))
        .sum();
    integral / (profile.theta[profile.len() - 1] - profile.theta[0])
}

/// Average Fisher information over the profile's interior interval.
///
/// The divergence flag is raised when recomputing with a tenfold smaller
/// margin grows the mean by more than 10%.
pub fn average_fisher(map: &GammaMap, profile: &FisherProfile) -> Result<FisherSummary> {
    if profile.is_empty() {
        return Err(Error::Domain {
            module: "fisher",
            value: 0.0,
            domain: "non-empty profile",
        });
    }
    let mean = trapezoid_mean(profile);
    let max_dev_from_mean = profile.max_deviation_from(mean);
    let (shrunk_margin_mean, divergence_flag) = if profile.len() == 1 {
        (mean, false)
    } else {
        let shrunk = fisher_profile(map, profile.len(), profile.margin / DIVERGENCE_SHRINK)?;
        let m = trapezoid_mean(&shrunk);
        (m, m > mean * (1.0 + DIVERGENCE_GROWTH))
    };
    Ok(FisherSummary {
        mean,
        max_dev_from_mean,
        divergence_flag,
        shrunk_margin_mean,
    })
}
