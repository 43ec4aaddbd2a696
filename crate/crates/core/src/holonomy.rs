//! Geometric phase acquired around a closed cycle of setting changes.
//!
//! Start at setting `A1B1` with hidden angle `Δ_A1`, then let the detectors
//! rotate through `A2B1 → A2B2 → A1B2` while the particle not being rotated
//! keeps its angle. Back at Alice's first orientation the hidden angle is
//!
//! `Δ_A1↺ = Γ(Γ⁻¹(δ) + Γ⁻¹(Δ_A1))`,
//! `δ = Γ(Γ⁻¹(θ_A1B2) - Γ⁻¹(θ_A2B2) + Γ⁻¹(θ_A2B1) - Γ⁻¹(θ_A1B1))`.
//!
//! Only a linear `Γ` (uniform ρ) makes `δ` vanish for additive settings, so
//! the four outcomes `S_A1, S_A2, S_B1, S_B2` cannot all be assigned at once.
//! Reversing the direction of the cycle negates the alternating sum.

use serde::Serialize;

use crate::angle::wrap;
use crate::engine::{GameSettings, Setting};
use crate::gammamap::GammaMap;

/// `Γ⁻¹` of each setting angle and their wrapped alternating sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolonomyLegs {
    pub a1b1: f64,
    pub a2b1: f64,
    pub a2b2: f64,
    pub a1b2: f64,
    /// `wrap(a1b2 - a2b2 + a2b1 - a1b1)`.
    pub alternating_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolonomyResult {
    pub delta: f64,
    pub legs: HolonomyLegs,
}

/// Computes `δ` for a set of game settings.
pub fn holonomy_delta(map: &GammaMap, settings: &GameSettings) -> HolonomyResult {
    let leg = |s: Setting| map.ginv(settings.angle(s));
    let (a1b1, a2b1, a2b2, a1b2) = (
        leg(Setting::A1B1),
        leg(Setting::A2B1),
        leg(Setting::A2B2),
        leg(Setting::A1B2),
    );
    let alternating_sum = wrap(a1b2 - a2b2 + a2b1 - a1b1);
    HolonomyResult {
        delta: map.g(alternating_sum),
        legs: HolonomyLegs {
            a1b1,
            a2b1,
            a2b2,
            a1b2,
            alternating_sum,
        },
    }
}

/// The intermediate hidden angles of one trip around the cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CyclicWalk {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    /// `Δ_A1↺`.
    pub a1_final: f64,
}

/// Applies the four transformation steps `A1 → B1 → A2 → B2 → A1`.
pub fn cyclic_walk_steps(map: &GammaMap, settings: &GameSettings, delta_a1: f64) -> CyclicWalk {
    // Δ on one side from Δ on the other at relative angle θ
    let step = |theta: f64, other: f64| map.g(wrap(map.ginv(theta) - map.ginv(other)));
    let a1 = wrap(delta_a1);
    let b1 = step(settings.angle(Setting::A1B1), a1);
    let a2 = step(settings.angle(Setting::A2B1), b1);
    let b2 = step(settings.angle(Setting::A2B2), a2);
    let a1_final = step(settings.angle(Setting::A1B2), b2);
    CyclicWalk {
        a1,
        b1,
        a2,
        b2,
        a1_final,
    }
}

/// `Δ_A1↺` by walking the cycle step by step.
pub fn cyclic_walk(map: &GammaMap, settings: &GameSettings, delta_a1: f64) -> f64 {
    cyclic_walk_steps(map, settings, delta_a1).a1_final
}

/// `Δ_A1↺` from the closed form `Γ(Γ⁻¹(δ) + Γ⁻¹(Δ_A1))`.
pub fn cyclic_return(map: &GammaMap, holonomy: &HolonomyResult, delta_a1: f64) -> f64 {
    map.g(wrap(map.ginv(holonomy.delta) + map.ginv(wrap(delta_a1))))
}
