//! Probability densities of the hidden angle on the unit circle.
//!
//! A density must be parity symmetric, `ρ(-Δ) = ρ(Δ) = ρ(π - Δ)`, normalized
//! over `[-π, π)`, and must not vanish on any subinterval. Two closed-form
//! densities are built in; anything else is supplied as a table on an equally
//! spaced closed-open grid and interpolated linearly (periodically).

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::angle::{finite, wrap};
use crate::error::{Error, Result};

/// Minimum number of nodes in a tabulated density.
pub const MIN_TABLE_NODES: usize = 16;

/// Default validation tolerance for the builtin densities.
pub const BUILTIN_TOL: f64 = 1e-8;

/// Default validation tolerance for tabulated densities.
pub const TABLE_TOL: f64 = 1e-6;

/// Simpson panels used to validate the builtin densities.
const BUILTIN_PANELS: usize = 100_000;

/// The two closed-form densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    /// `ρ(Δ) = 1/2π`; yields the linear correlation `-1 + 2|θ|/π`.
    Uniform,
    /// `ρ(Δ) = |sin Δ|/4`; yields `-cos θ`.
    Quantum,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Uniform => "uniform",
            Builtin::Quantum => "quantum",
        }
    }
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Builtin::Uniform),
            "quantum" => Ok(Builtin::Quantum),
            other => Err(Error::DensityStructure(format!(
                "unknown builtin density {other:?} (expected uniform or quantum)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    BuiltinUniform,
    BuiltinQuantum,
    Tabulated,
}

/// Density values on the grid `Δ_k = -π + k·h`, `h = 2π/len`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    delta: Vec<f64>,
    rho: Vec<f64>,
    step: f64,
    /// `prefix[k] = ∫_{-π}^{Δ_k} ρ`, with one extra entry for `Δ = π`.
    prefix: Vec<f64>,
}

impl DensityTable {
    fn new(delta: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let structural = |msg: String| Err(Error::DensityStructure(msg));
        if delta.len() != rho.len() {
            return structural(format!(
                "table has {} nodes but {} density values",
                delta.len(),
                rho.len()
            ));
        }
        let m = delta.len();
        if m < MIN_TABLE_NODES {
            return structural(format!(
                "table has {m} nodes, at least {MIN_TABLE_NODES} are required"
            ));
        }
        if let Some(bad) = delta.iter().chain(&rho).find(|v| !v.is_finite()) {
            return structural(format!("table contains non-finite value {bad}"));
        }
        let step = TAU / m as f64;
        let slack = 1e-9 * step;
        if (delta[0] + PI).abs() > slack {
            return structural(format!("first node is {} but must be -pi", delta[0]));
        }
        for (k, &d) in delta.iter().enumerate() {
            let expected = -PI + k as f64 * step;
            if (d - expected).abs() > slack {
                return structural(format!(
                    "grid is not equally spaced on [-pi, pi): node {k} is {d}, expected {expected}"
                ));
            }
        }
        if delta[m - 1] >= PI {
            return structural("last node must be strictly below pi".into());
        }
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for k in 0..m {
            acc += 0.5 * step * (rho[k] + rho[(k + 1) % m]);
            prefix.push(acc);
        }
        Ok(Self {
            delta,
            rho,
            step,
            prefix,
        })
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Cell index and fractional offset of an angle in `[-π, π]`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let m = self.len();
        let s = (x + PI) / self.step;
        let k = (s.floor() as usize).min(m - 1);
        (k, s - k as f64)
    }

    fn eval(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        let a = self.rho[k];
        let b = self.rho[(k + 1) % self.len()];
        a + t * (b - a)
    }

    /// Interpolation error allowed at an off-grid point: the larger absolute
    /// second difference of the two bracketing nodes. A kink inside a cell,
    /// which the linear interpolant cannot follow, shows up there. Nodes get
    /// no allowance.
    fn off_grid_slack(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        if t.min(1.0 - t) < 1e-9 {
            return 0.0;
        }
        let m = self.len();
        let second = |j: usize| {
            (self.rho[(j + m - 1) % m] - 2.0 * self.rho[j] + self.rho[(j + 1) % m]).abs()
        };
        second(k).max(second((k + 1) % m))
    }

    /// `∫_{-π}^{x} ρ` for `x ∈ [-π, π]`, exact for the piecewise-linear density.
    fn integral_from_start(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        let a = self.rho[k];
        let b = self.rho[(k + 1) % self.len()];
        self.prefix[k] + self.step * t * (a + 0.5 * t * (b - a))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Uniform,
    Quantum,
    Table(DensityTable),
}

/// A probability density `ρ(Δ)` of the hidden angle.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityModel {
    name: String,
    shape: Shape,
}

impl DensityModel {
    /// One of the closed-form densities.
    pub fn builtin(which: Builtin) -> Self {
        let shape = match which {
            Builtin::Uniform => Shape::Uniform,
            Builtin::Quantum => Shape::Quantum,
        };
        Self {
            name: which.name().to_string(),
            shape,
        }
    }

    pub fn uniform() -> Self {
        Self::builtin(Builtin::Uniform)
    }

    pub fn quantum() -> Self {
        Self::builtin(Builtin::Quantum)
    }

    /// A tabulated density. `delta` must start at `-π` and be equally spaced
    /// with step `2π / len`, so the last node sits one step below `π`.
    pub fn tabulated(name: impl Into<String>, delta: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            shape: Shape::Table(DensityTable::new(delta, rho)?),
        })
    }

    /// Samples this density on `nodes` equally spaced points and returns the
    /// resulting tabulated model.
    pub fn tabulate(&self, nodes: usize) -> Result<Self> {
        let step = TAU / nodes as f64;
        let delta: Vec<f64> = (0..nodes).map(|k| -PI + k as f64 * step).collect();
        let rho = delta.iter().map(|&d| self.value(d)).collect();
        Self::tabulated(format!("{}-table", self.name), delta, rho)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DensityKind {
        match self.shape {
            Shape::Uniform => DensityKind::BuiltinUniform,
            Shape::Quantum => DensityKind::BuiltinQuantum,
            Shape::Table(_) => DensityKind::Tabulated,
        }
    }

    pub fn table(&self) -> Option<&DensityTable> {
        match &self.shape {
            Shape::Table(t) => Some(t),
            _ => None,
        }
    }

    /// Default validation tolerance for this kind of density.
    pub fn default_tol(&self) -> f64 {
        match self.shape {
            Shape::Table(_) => TABLE_TOL,
            _ => BUILTIN_TOL,
        }
    }

    /// `ρ(Δ)`, with `Δ` wrapped onto the circle first.
    pub fn eval(&self, delta: f64) -> Result<f64> {
        Ok(self.value(finite("density", delta)?))
    }

    pub(crate) fn value(&self, delta: f64) -> f64 {
        let x = wrap(delta);
        match &self.shape {
            Shape::Uniform => 1.0 / TAU,
            Shape::Quantum => 0.25 * x.sin().abs(),
            Shape::Table(t) => t.eval(x),
        }
    }

    /// Signed cumulative mass `∫_0^Δ ρ` for `Δ ∈ [-π, π]`.
    pub(crate) fn cumulative(&self, delta: f64) -> f64 {
        let x = delta.clamp(-PI, PI);
        match &self.shape {
            Shape::Uniform => x / TAU,
            // ∫_0^x |sin|/4 = sign(x)·(1 - cos x)/4 = sign(x)·sin²(x/2)/2
            Shape::Quantum => {
                let s = (0.5 * x).sin();
                0.5 * s * s * x.signum()
            }
            Shape::Table(t) => t.integral_from_start(x) - t.integral_from_start(0.0),
        }
    }

    /// Cumulative distribution `∫_{-π}^{x} ρ` for `x ∈ [-π, π]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(-PI, PI);
        match &self.shape {
            Shape::Table(t) => t.integral_from_start(x),
            _ => 0.5 + self.cumulative(x),
        }
    }

    /// Runs every admissibility check and reports the residuals.
    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::DensityStructure(format!(
                "validation tolerance must be positive, got {tol}"
            )));
        }
        let grid = self.validation_grid();
        let values: Vec<f64> = grid.iter().map(|&x| self.value(x)).collect();

        let normalization = (self.simpson_total() - 1.0).abs();

        let mut reflection: f64 = 0.0;
        let mut complement: f64 = 0.0;
        let slack = |x: f64| match &self.shape {
            Shape::Table(t) => t.off_grid_slack(wrap(x)),
            _ => 0.0,
        };
        for (&x, &v) in grid.iter().zip(&values) {
            let r = (self.value(-x) - v).abs() - slack(-x);
            let c = (self.value(PI - x) - v).abs() - slack(PI - x);
            reflection = reflection.max(r);
            complement = complement.max(c);
        }

        let most_negative = values.iter().copied().fold(0.0f64, f64::min);

        // cells of the evaluation grid that carry no mass
        let degenerate_cells = match &self.shape {
            Shape::Table(t) => (0..t.len())
                .filter(|&k| t.rho[k] + t.rho[(k + 1) % t.len()] <= 0.0)
                .count(),
            _ => grid
                .iter()
                .map(|&x| self.cumulative(x))
                .chain(std::iter::once(self.cumulative(PI)))
                .collect::<Vec<_>>()
                .windows(2)
                .filter(|w| w[1] - w[0] <= 0.0)
                .count(),
        };

        let checks = vec![
            Check::new("normalization", normalization, normalization <= tol),
            Check::new("parity_reflection", reflection, reflection <= tol),
            Check::new("parity_complement", complement, complement <= tol),
            Check::new("non_negativity", -most_negative, -most_negative <= tol),
            Check::new(
                "cumulative_monotonicity",
                degenerate_cells as f64,
                degenerate_cells == 0,
            ),
        ];
        Ok(ValidationReport::new(self.name.clone(), tol, checks))
    }

    /// Validates with [`DensityModel::default_tol`] and turns failure into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate(self.default_tol())?;
        if report.passed {
            Ok(())
        } else {
            Err(Error::DensityInvalid {
                failed: report.failed_names().join(", "),
            })
        }
    }

    fn validation_grid(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Table(t) => t.delta.clone(),
            _ => {
                let h = TAU / BUILTIN_PANELS as f64;
                (0..BUILTIN_PANELS).map(|k| -PI + k as f64 * h).collect()
            }
        }
    }

    /// Composite Simpson over `[-π, π]`. Tables use one Simpson cell per grid
    /// cell (node, midpoint, node), which is exact for linear pieces.
    fn simpson_total(&self) -> f64 {
        match &self.shape {
            Shape::Table(t) => {
                let m = t.len();
                let h = t.step;
                (0..m)
                    .map(|k| {
                        let a = t.rho[k];
                        let b = t.rho[(k + 1) % m];
                        let mid = t.eval(t.delta[k] + 0.5 * h);
                        h / 6.0 * (a + 4.0 * mid + b)
                    })
                    .sum()
            }
            _ => simpson(|x| self.value(x), -PI, PI, BUILTIN_PANELS),
        }
    }
}

impl fmt::Display for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// One named admissibility check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, residual: f64, passed: bool) -> Self {
        Self {
            name,
            residual,
            passed,
        }
    }
}

/// Outcome of [`DensityModel::validate`].
///
/// Residuals: `normalization` is `|∫ρ - 1|`; the two parity checks are the
/// largest pointwise mismatch under `Δ → -Δ` and `Δ → π - Δ`;
/// `non_negativity` is the magnitude of the most negative value; and
/// `cumulative_monotonicity` counts grid cells carrying no mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub density: String,
    pub tol: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn new(density: String, tol: f64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            density,
            tol,
            passed,
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_names(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }
}

/// JSON description of a density.
///
/// `{"kind":"builtin","name":"quantum"}` or
/// `{"kind":"table","delta":[...],"rho":[...]}` (an optional `"name"` labels
/// the table in reports).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Builtin {
        name: Builtin,
    },
    Table {
        #[serde(default)]
        name: Option<String>,
        delta: Vec<f64>,
        rho: Vec<f64>,
    },
}

impl DensitySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::DensityStructure(format!("malformed density spec: {e}")))
    }

    pub fn build(self) -> Result<DensityModel> {
        match self {
            DensitySpec::Builtin { name } => Ok(DensityModel::builtin(name)),
            DensitySpec::Table { name, delta, rho } => {
                DensityModel::tabulated(name.unwrap_or_else(|| "table".into()), delta, rho)
            }
        }
    }
}

impl From<&DensityModel> for DensitySpec {
    fn from(model: &DensityModel) -> Self {
        match &model.shape {
            Shape::Uniform => DensitySpec::Builtin {
                name: Builtin::Uniform,
            },
            Shape::Quantum => DensitySpec::Builtin {
                name: Builtin::Quantum,
            },
            Shape::Table(t) => DensitySpec::Table {
                name: Some(model.name.clone()),
                delta: t.delta.clone(),
                rho: t.rho.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quantum_table(nodes: usize) -> (Vec<f64>, Vec<f64>) {
        let h = TAU / nodes as f64;
        let delta: Vec<f64> = (0..nodes).map(|k| -PI + k as f64 * h).collect();
        let rho = delta.iter().map(|d| 0.25 * d.sin().abs()).collect();
        (delta, rho)
    }

    #[test]
    fn builtin_values() {
        let u = DensityModel::uniform();
        let q = DensityModel::quantum();
        assert!((u.eval(1.0).unwrap() - 0.159_154_943_091_895_35).abs() < 1e-15);
        assert_eq!(u.eval(-PI).unwrap(), 1.0 / TAU);
        assert!((q.eval(PI / 2.0).unwrap() - 0.25).abs() < 1e-16);
        assert!((q.eval(-PI / 2.0).unwrap() - 0.25).abs() < 1e-16);
        assert_eq!(q.eval(0.0).unwrap(), 0.0);
        assert!(q.eval(f64::NAN).is_err());
        assert!(q.eval(f64::INFINITY).is_err());
    }

    #[test]
    fn tabulated_quantum_interpolates_closed_form() {
        let (delta, rho) = quantum_table(4097);
        let t = DensityModel::tabulated("q", delta, rho).unwrap();
        let x = PI / 3.0;
        assert!((t.eval(x).unwrap() - 0.25 * x.sin()).abs() <= 1e-6);
        // periodic wrap between the last node and -π
        let near_end = PI - 1e-4;
        assert!((t.eval(near_end).unwrap() - 0.25 * near_end.sin()).abs() <= 1e-6);
    }

    #[test]
    fn builtins_validate() {
        for model in [DensityModel::uniform(), DensityModel::quantum()] {
            let report = model.validate(1e-9).unwrap();
            assert!(report.passed, "{report:?}");
            assert!(report.check("normalization").unwrap().residual <= 1e-10);
        }
    }

    #[test]
    fn tabulated_builtins_validate() {
        for model in [DensityModel::uniform(), DensityModel::quantum()] {
            let table = model.tabulate(4097).unwrap();
            assert!(table.validate(1e-6).unwrap().passed);
        }
    }

    #[test]
    fn perturbed_node_fails_parity() {
        let (delta, mut rho) = quantum_table(4096);
        // an even node count keeps both mirror images of every node on the grid
        let k = 2731;
        rho[k] += 1e-3;
        let t = DensityModel::tabulated("perturbed", delta, rho).unwrap();
        let report = t.validate(1e-6).unwrap();
        assert!(!report.passed);
        let reflection = report.check("parity_reflection").unwrap();
        assert!(!reflection.passed);
        assert!((reflection.residual - 1e-3).abs() < 1e-9, "{reflection:?}");
        assert!(report.failed_names().contains(&"parity_complement"));
    }

    #[test]
    fn perturbed_node_fails_parity_on_odd_grid() {
        let (delta, mut rho) = quantum_table(4097);
        rho[1200] += 1e-3;
        let t = DensityModel::tabulated("perturbed", delta, rho).unwrap();
        let report = t.validate(1e-6).unwrap();
        assert!(!report.check("parity_reflection").unwrap().passed);
        assert!(!report.check("parity_complement").unwrap().passed);
    }

    #[test]
    fn all_zero_table_fails() {
        let (delta, _) = quantum_table(64);
        let t = DensityModel::tabulated("zero", delta, vec![0.0; 64]).unwrap();
        let report = t.validate(1e-6).unwrap();
        assert!(!report.check("normalization").unwrap().passed);
        assert!(!report.check("cumulative_monotonicity").unwrap().passed);
        assert!(report.check("parity_reflection").unwrap().passed);
    }

    #[test]
    fn negative_values_fail() {
        let (delta, mut rho) = quantum_table(64);
        rho[10] = -0.01;
        let t = DensityModel::tabulated("neg", delta, rho).unwrap();
        let report = t.validate(1e-6).unwrap();
        assert!(!report.check("non_negativity").unwrap().passed);
    }

    #[test]
    fn structural_errors() {
        let (delta, rho) = quantum_table(8);
        assert!(matches!(
            DensityModel::tabulated("small", delta, rho),
            Err(Error::DensityStructure(_))
        ));
        let (mut delta, rho) = quantum_table(32);
        delta[5] += 1e-3;
        assert!(DensityModel::tabulated("uneven", delta, rho).is_err());
        let (mut delta, rho) = quantum_table(32);
        delta[0] = -3.0;
        assert!(DensityModel::tabulated("start", delta, rho).is_err());
        let (delta, mut rho) = quantum_table(32);
        rho.pop();
        assert!(DensityModel::tabulated("lengths", delta, rho).is_err());
        assert!(DensityModel::quantum().validate(0.0).is_err());
    }

    #[test]
    fn parity_of_builtins_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [DensityModel::uniform(), DensityModel::quantum()] {
            for _ in 0..1000 {
                let d = rng.gen_range(0.0..=PI);
                let v = model.eval(d).unwrap();
                assert!((model.eval(-d).unwrap() - v).abs() <= 1e-12);
                assert!((model.eval(PI - d).unwrap() - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cumulative_matches_quadrature() {
        let q = DensityModel::quantum();
        let table = q.tabulate(2048).unwrap();
        for &x in &[-3.0, -1.2, -0.01, 0.0, 0.4, 1.7, PI] {
            let quad = if x >= 0.0 {
                simpson(|s| q.value(s), 0.0, x, 20_000)
            } else {
                -simpson(|s| q.value(s), x, 0.0, 20_000)
            };
            assert!((q.cumulative(x) - quad).abs() < 1e-12, "x = {x}");
            assert!((table.cumulative(x) - quad).abs() < 1e-6, "x = {x}");
        }
        assert!((q.cdf(PI) - 1.0).abs() < 1e-15);
        assert!((table.cdf(PI) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = DensitySpec::from_json(r#"{"kind":"builtin","name":"quantum"}"#).unwrap();
        assert_eq!(spec.clone().build().unwrap(), DensityModel::quantum());
        let table = DensityModel::quantum().tabulate(32).unwrap();
        let json = serde_json::to_string(&DensitySpec::from(&table)).unwrap();
        let back = DensitySpec::from_json(&json).unwrap().build().unwrap();
        // serialized floats must read back bit for bit
        assert_eq!(back, table);
        assert!(DensitySpec::from_json(r#"{"kind":"builtin","name":"gaussian"}"#).is_err());
        assert!(DensitySpec::from_json(r#"{"kind":"table","delta":[0.0]}"#).is_err());
    }
}
