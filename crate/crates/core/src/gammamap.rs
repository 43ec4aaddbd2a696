//! The measure-preserving angle map.
//!
//! `Γ⁻¹(Δ) = 2π ∫_0^Δ ρ` sends a ρ-distributed angle to a uniformly
//! distributed one; its inverse `Γ` does the reverse. Both are odd, strictly
//! increasing bijections of `[-π, π]` that fix `0`, `±π/2` and `±π`.
//!
//! The map is tabulated on the non-negative half `[0, π]` and extended by
//! oddness. Between nodes it is a monotone cubic Hermite interpolant whose
//! node slopes are the exact derivative `2πρ`, limited by the Fritsch-Carlson
//! condition. `Γ` inverts that interpolant by bisection, which stays robust
//! where `ρ` vanishes and `Γ` has unbounded slope.

use std::f64::consts::PI;
use std::io::Write;

use crate::angle::{finite, wrap_closed};
use crate::density::DensityModel;
use crate::error::{Error, Result};

/// Default number of nodes on `[-π, π]`.
pub const DEFAULT_GRID: usize = 8193;

/// Default inversion tolerance in radians.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Smallest accepted grid.
pub const MIN_GRID: usize = 257;

/// Tabulated `Γ⁻¹` together with its inverse `Γ`.
///
/// Immutable once built; evaluation takes `&self` and is safe to share
/// across threads.
#[derive(Clone, Debug)]
pub struct GammaMap {
    source: DensityModel,
    grid: usize,
    tol: f64,
    /// Spacing of the half grid on `[0, π]`.
    step: f64,
    /// `Γ⁻¹` at `x_j = j·step`, `j = 0..=half`.
    values: Vec<f64>,
    /// Limited Hermite slopes at the same nodes.
    slopes: Vec<f64>,
}

impl GammaMap {
    /// Builds the map for `model` with `grid` nodes on `[-π, π]` and
    /// inversion tolerance `tol`.
    ///
    /// `grid` must be odd so that `0` is a node. The density is validated at
    /// its default tolerance first.
    pub fn build(model: &DensityModel, grid: usize, tol: f64) -> Result<Self> {
        if grid < MIN_GRID {
            return Err(Error::MapParameter(format!(
                "grid must have at least {MIN_GRID} nodes, got {grid}"
            )));
        }
        if grid.is_multiple_of(2) {
            return Err(Error::MapParameter(format!(
                "grid must be odd so that 0 is a node, got {grid}"
            )));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::MapParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        model.ensure_valid()?;

        let half = (grid - 1) / 2;
        let step = PI / half as f64;
        let half_mass = model.cumulative(PI);
        // rescaling by the half mass pins Γ⁻¹(π) = π exactly
        let scale = PI / half_mass;
        let mut values = Vec::with_capacity(half + 1);
        let mut slopes = Vec::with_capacity(half + 1);
        for j in 0..=half {
            let x = if j == half { PI } else { j as f64 * step };
            values.push(if j == half {
                PI
            } else {
                scale * model.cumulative(x)
            });
            slopes.push(scale * model.value(x));
        }

        for j in 0..half {
            if values[j + 1] <= values[j] {
                return Err(Error::Degenerate(format!(
                    "Γ⁻¹ table is not strictly increasing near x = {:.6}",
                    j as f64 * step
                )));
            }
        }
        limit_slopes(&values, &mut slopes, step);

        Ok(Self {
            source: model.clone(),
            grid,
            tol,
            step,
            values,
            slopes,
        })
    }

    /// Builds with [`DEFAULT_GRID`] and [`DEFAULT_TOL`].
    pub fn with_defaults(model: &DensityModel) -> Result<Self> {
        Self::build(model, DEFAULT_GRID, DEFAULT_TOL)
    }

    pub fn density(&self) -> &DensityModel {
        &self.source
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Nodes `x_k` on `[-π, π]`.
    pub fn nodes(&self) -> Vec<f64> {
        let half = self.values.len() - 1;
        (0..self.grid)
            .map(|k| {
                let j = k as isize - half as isize;
                match j {
                    j if j == half as isize => PI,
                    j if j == -(half as isize) => -PI,
                    j => j as f64 * self.step,
                }
            })
            .collect()
    }

    /// `Γ⁻¹(x_k)` at [`GammaMap::nodes`]; strictly increasing and odd.
    pub fn ginv_values(&self) -> Vec<f64> {
        let negative = self.values.iter().skip(1).rev().map(|v| -v);
        negative.chain(self.values.iter().copied()).collect()
    }

    /// `Γ⁻¹(Δ)`. Inputs outside `[-π, π]` are wrapped first.
    pub fn gamma_inverse(&self, delta: f64) -> Result<f64> {
        Ok(self.ginv(finite("gammamap", delta)?))
    }

    /// `Γ(x)`, the solution of `Γ⁻¹(Γ(x)) = x` to within the map tolerance.
    pub fn gamma(&self, x: f64) -> Result<f64> {
        Ok(self.g(finite("gammamap", x)?))
    }

    /// Unchecked `Γ⁻¹` for finite input.
    pub(crate) fn ginv(&self, delta: f64) -> f64 {
        let x = wrap_closed(delta);
        let v = self.ginv_half(x.abs());
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Unchecked `Γ` for finite input.
    pub(crate) fn g(&self, x: f64) -> f64 {
        let y = wrap_closed(x);
        let v = self.g_half(y.abs());
        if y < 0.0 {
            -v
        } else {
            v
        }
    }

    fn ginv_half(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        let j = ((x / self.step) as usize).min(last - 1);
        let t = ((x - j as f64 * self.step) / self.step).clamp(0.0, 1.0);
        self.hermite(j, t)
    }

    fn hermite(&self, j: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.slopes[j] * self.step, self.slopes[j + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }

    fn g_half(&self, y: f64) -> f64 {
        let last = self.values.len() - 1;
        if y <= 0.0 {
            return 0.0;
        }
        if y >= PI {
            return PI;
        }
        // values[j] <= y < values[j + 1]
        let j = (self.values.partition_point(|&v| v <= y) - 1).min(last - 1);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let (mut f_lo, mut f_hi) = (self.values[j] - y, self.values[j + 1] - y);
        let width = self.tol / self.step;
        while hi - lo > width {
            let mid = 0.5 * (lo + hi);
            let f_mid = self.hermite(j, mid) - y;
            if f_mid == 0.0 {
                return (j as f64 + mid) * self.step;
            }
            if f_mid < 0.0 {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
        }
        // one secant step inside the final bracket
        let t = if f_hi > f_lo {
            lo - f_lo * (hi - lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        (j as f64 + t.clamp(lo, hi)) * self.step
    }

    /// Largest deviations from the map's structural invariants.
    pub fn invariant_residuals(&self, samples: usize) -> InvariantResiduals {
        let mut antisymmetry: f64 = 0.0;
        let mut round_trip: f64 = 0.0;
        let n = samples.max(2);
        for k in 0..n {
            let x = -PI + 2.0 * PI * k as f64 / (n - 1) as f64;
            antisymmetry = antisymmetry
                .max((self.ginv(-x) + self.ginv(x)).abs())
                .max((self.g(-x) + self.g(x)).abs());
            round_trip = round_trip.max((self.g(self.ginv(x)) - x).abs());
        }
        let fixed_points = [0.0, PI / 2.0, -PI / 2.0, PI, -PI]
            .iter()
            .map(|&x| (self.ginv(x) - x).abs().max((self.g(x) - x).abs()))
            .fold(0.0, f64::max);
        let monotone = self.values.windows(2).all(|w| w[1] > w[0]);
        InvariantResiduals {
            antisymmetry,
            fixed_points,
            round_trip,
            monotone,
        }
    }

    /// Writes the `(x, Γ⁻¹(x))` table as CSV with header `x,ginv`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "ginv"])?;
        for (x, v) in self.nodes().into_iter().zip(self.ginv_values()) {
            w.write_record([x.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// See [`GammaMap::invariant_residuals`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct InvariantResiduals {
    pub antisymmetry: f64,
    pub fixed_points: f64,
    pub round_trip: f64,
    pub monotone: bool,
}

/// Fritsch-Carlson: scale slope pairs back into the monotonicity region
/// `α² + β² ≤ 9`, where `α, β` are the end slopes over the secant slope.
fn limit_slopes(values: &[f64], slopes: &mut [f64], step: f64) {
    for j in 0..values.len() - 1 {
        let secant = (values[j + 1] - values[j]) / step;
        let alpha = slopes[j] / secant;
        let beta = slopes[j + 1] / secant;
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            slopes[j] = tau * alpha * secant;
            slopes[j + 1] = tau * beta * secant;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::simpson;
    use proptest::prelude::*;
    use std::sync::LazyLock;

    static QUANTUM: LazyLock<GammaMap> =
        LazyLock::new(|| GammaMap::with_defaults(&DensityModel::quantum()).unwrap());
    static UNIFORM: LazyLock<GammaMap> =
        LazyLock::new(|| GammaMap::with_defaults(&DensityModel::uniform()).unwrap());

    fn quantum() -> &'static GammaMap {
        &QUANTUM
    }

    fn uniform() -> &'static GammaMap {
        &UNIFORM
    }

    /// Independent oracle for the quantum map: Γ⁻¹ by quadrature of |sin|/4.
    fn quantum_ginv_by_quadrature(x: f64) -> f64 {
        let m = simpson(|s| 0.25 * s.sin().abs(), 0.0, x.abs(), 20_000);
        (2.0 * PI * m).copysign(x)
    }

    #[test]
    fn closed_form_oracle_agrees_with_quadrature() {
        // (π/2)(1 - cos x), the closed form used as an oracle below
        for &x in &[0.1, PI / 4.0, 1.0, 2.5, PI] {
            let closed = PI / 2.0 * (1.0 - f64::cos(x));
            assert!((closed - quantum_ginv_by_quadrature(x)).abs() < 1e-12);
        }
        assert!((PI / 2.0 * (1.0 - (PI / 4.0).cos()) - 0.460_075_6).abs() < 1e-6);
    }

    #[test]
    fn uniform_map_is_identity() {
        let map = uniform();
        for (x, v) in map.nodes().iter().zip(map.ginv_values()) {
            assert!((x - v).abs() < 1e-14);
        }
        assert!((map.gamma_inverse(0.3).unwrap() - 0.3).abs() < 1e-14);
        assert!((map.gamma(0.3).unwrap() - 0.3).abs() < 1e-10);
    }

    #[test]
    fn quantum_examples() {
        let map = quantum();
        assert!((map.gamma_inverse(PI / 2.0).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((map.gamma_inverse(PI / 4.0).unwrap() - 0.460_075_6).abs() < 1e-6);
        assert!(
            (map.gamma_inverse(-PI / 4.0).unwrap() - quantum_ginv_by_quadrature(-PI / 4.0)).abs()
                < 1e-10
        );
        assert_eq!(map.gamma_inverse(PI).unwrap(), PI);
        assert!((map.gamma(PI / 2.0).unwrap() - PI / 2.0).abs() < 1e-10);
        // Γ_q(y) = arccos(1 - 2y/π)
        let y = 1.30128;
        let oracle = (1.0 - 2.0 * y / PI).acos();
        assert!((oracle - 1.39845).abs() < 1e-4);
        assert!((map.gamma(y).unwrap() - oracle).abs() < 1e-9);
        assert!(map.gamma(f64::NAN).is_err());
        assert!(map.gamma_inverse(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn node_tables_are_odd_and_increasing() {
        let map = quantum();
        let nodes = map.nodes();
        let values = map.ginv_values();
        assert_eq!(nodes.len(), DEFAULT_GRID);
        assert_eq!(values.len(), DEFAULT_GRID);
        assert_eq!(nodes[0], -PI);
        assert_eq!(nodes[DEFAULT_GRID / 2], 0.0);
        assert_eq!(values[0], -PI);
        assert_eq!(*values.last().unwrap(), PI);
        assert!(values.windows(2).all(|w| w[1] > w[0]));
        let r = map.invariant_residuals(1001);
        assert!(r.monotone);
        assert!(r.antisymmetry <= 1e-10, "{r:?}");
        assert!(r.fixed_points <= 1e-10, "{r:?}");
        assert!(r.round_trip <= 1e-9, "{r:?}");
    }

    #[test]
    fn tabulated_quantum_tracks_builtin() {
        let table = DensityModel::quantum().tabulate(4096).unwrap();
        let map = GammaMap::with_defaults(&table).unwrap();
        let exact = quantum();
        for k in 0..200 {
            let x = -PI + 2.0 * PI * k as f64 / 199.0;
            let d = (map.gamma_inverse(x).unwrap() - exact.gamma_inverse(x).unwrap()).abs();
            assert!(d < 1e-5, "x = {x}: {d}");
        }
    }

    #[test]
    fn build_rejects_bad_parameters() {
        let q = DensityModel::quantum();
        assert!(GammaMap::build(&q, 255, 1e-10).is_err());
        assert!(GammaMap::build(&q, 1024, 1e-10).is_err());
        assert!(GammaMap::build(&q, 1025, 0.0).is_err());
        let zero = DensityModel::tabulated(
            "zero",
            (0..64).map(|k| -PI + k as f64 * PI / 32.0).collect(),
            vec![0.0; 64],
        )
        .unwrap();
        assert!(matches!(
            GammaMap::build(&zero, 1025, 1e-10),
            Err(Error::DensityInvalid { .. })
        ));
    }

    #[test]
    fn csv_dump_has_header_and_all_nodes() {
        let map = GammaMap::build(&DensityModel::quantum(), 257, 1e-10).unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,ginv"));
        assert_eq!(lines.count(), 257);
    }

    proptest! {
        #[test]
        fn round_trips_both_ways(x in -PI..PI) {
            for map in [quantum(), uniform()] {
                prop_assert!((map.g(map.ginv(x)) - x).abs() <= 1e-8);
                prop_assert!((map.ginv(map.g(x)) - x).abs() <= 1e-8);
                prop_assert!((map.g(-x) + map.g(x)).abs() <= 1e-10);
                prop_assert!((map.ginv(-x) + map.ginv(x)).abs() <= 1e-10);
            }
        }
    }
}
