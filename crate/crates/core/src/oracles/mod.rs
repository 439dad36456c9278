//! Triangle oracles and the labeling loop.
//!
//! Every oracle is a named strategy behind [`Oracle`]; a [`Registry`] maps
//! the names used in configuration files to implementations, and an
//! [`OracleSequence`] is an ordered selection from it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mastermap::MasterMap;

pub mod certified;
pub mod heuristic;

pub use certified::{krawczyk, krawczyk_with, KrawczykCertified, KrawczykReport, NonzeroCertified};
pub use heuristic::{
    gd_images, gd_step, newton_step, GdConverge, GdDisjoint, Intersection, LinearApproximation, Newton,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    Pass,
}

/// Outcome of labeling a triangle, with the oracle that decided it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Label {
    pub verdict: Verdict,
    pub oracle: Option<&'static str>,
}

impl Label {
    pub const PASS: Label = Label { verdict: Verdict::Pass, oracle: None };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonVariant {
    #[default]
    ThreeVertex,
    SixPointHull,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianNorm {
    #[default]
    Spectral,
    Frobenius,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GdStepRule {
    /// One Barzilai–Borwein rate from the centre ray, shared by all vertices.
    #[default]
    PerTriangle,
    /// A secant rate between each vertex and the centre.
    PerVertex,
}

/// Tuning constants. `c_max_int_norm` is in the scenario's length unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub c_max_int_norm: f64,
    pub c_safety: f64,
    pub c_area_scaling: f64,
    pub newton_variant: NewtonVariant,
    pub jacobian_norm: JacobianNorm,
    pub gd_step: GdStepRule,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            c_max_int_norm: 10.0,
            c_safety: 1.0,
            c_area_scaling: 0.9,
            newton_variant: NewtonVariant::default(),
            jacobian_norm: JacobianNorm::default(),
            gd_step: GdStepRule::default(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown oracle `{0}`")]
    UnknownOracle(String),
    #[error("oracle sequence is empty")]
    EmptySequence,
    #[error("{0}")]
    Invalid(String),
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.c_max_int_norm > 0.0) {
            return bad("c_max_int_norm must be positive");
        }
        if !(self.c_safety >= 0.0) || !self.c_safety.is_finite() {
            return bad("c_safety must be non-negative");
        }
        if !(self.c_area_scaling > 0.0 && self.c_area_scaling <= 1.0) {
            return bad("c_area_scaling must lie in (0, 1]");
        }
        Ok(())
    }

    /// Copy with lengths expressed in units of `scale`.
    pub fn rescaled(&self, scale: f64) -> Self {
        Self { c_max_int_norm: self.c_max_int_norm / scale, ..*self }
    }
}

/// A labeling strategy. `label` sees the triangle only through its master
/// map, whose local frame puts the triangle at the reference vertices.
pub trait Oracle: Send + Sync {
    fn name(&self) -> &'static str;

    fn label(&self, map: &MasterMap<'_>, cfg: &OracleConfig) -> Verdict;
}

/// Name → oracle lookup.
#[derive(Clone)]
pub struct Registry {
    oracles: BTreeMap<&'static str, Arc<dyn Oracle>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.oracles.keys()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Intersection));
        r.register(Arc::new(LinearApproximation));
        r.register(Arc::new(GdDisjoint));
        r.register(Arc::new(GdConverge));
        r.register(Arc::new(Newton));
        r.register(Arc::new(NonzeroCertified));
        r.register(Arc::new(KrawczykCertified));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { oracles: BTreeMap::new() }
    }

    pub fn register(&mut self, o: Arc<dyn Oracle>) {
        self.oracles.insert(o.name(), o);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Oracle>> {
        self.oracles.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.oracles.keys().copied()
    }

    pub fn sequence<S: AsRef<str>>(&self, names: &[S]) -> Result<OracleSequence, ConfigError> {
        if names.is_empty() {
            return Err(ConfigError::EmptySequence);
        }
        let oracles = names
            .iter()
            .map(|n| self.get(n.as_ref()).ok_or_else(|| ConfigError::UnknownOracle(n.as_ref().to_string())))
            .collect::<Result<_, _>>()?;
        Ok(OracleSequence(oracles))
    }
}

/// Ordered oracles `(Ω_1, …, Ω_N)`.
#[derive(Clone)]
pub struct OracleSequence(Vec<Arc<dyn Oracle>>);

impl fmt::Debug for OracleSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl OracleSequence {
    pub fn new(oracles: Vec<Arc<dyn Oracle>>) -> Result<Self, ConfigError> {
        if oracles.is_empty() {
            return Err(ConfigError::EmptySequence);
        }
        Ok(Self(oracles))
    }

    /// intersection, linear approximation, gradient-descent disjointness,
    /// Newton.
    pub fn standard() -> Self {
        Registry::default().sequence(&STANDARD_SEQUENCE).expect("built-in oracles")
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|o| o.name()).collect()
    }

    pub fn oracles(&self) -> &[Arc<dyn Oracle>] {
        &self.0
    }
}

pub const STANDARD_SEQUENCE: [&str; 4] = ["intersection", "linear_approximation", "gd_disjoint", "newton"];

/// Runs the oracles in order and returns the first verdict other than
/// pass.
pub fn label_triangle(map: &MasterMap<'_>, seq: &OracleSequence, cfg: &OracleConfig) -> Label {
    for o in &seq.0 {
        let v = o.label(map, cfg);
        if v != Verdict::Pass {
            return Label { verdict: v, oracle: Some(o.name()) };
        }
    }
    Label::PASS
}

/// 2-norm of a 2×2 matrix (largest singular value), closed form.
pub fn spectral_norm(j: &[[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = *j;
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = ((s * s - 4.0 * det * det).max(0.0)).sqrt();
    ((s + disc) / 2.0).sqrt()
}

pub fn frobenius_norm(j: &[[f64; 2]; 2]) -> f64 {
    j.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mastermap::Scenario;
    use crate::pplane::initial_triangulation;

    struct Fixed(&'static str, Verdict);

    impl Oracle for Fixed {
        fn name(&self) -> &'static str {
            self.0
        }
        fn label(&self, _: &MasterMap<'_>, _: &OracleConfig) -> Verdict {
            self.1
        }
    }

    fn dummy_scenario() -> Scenario {
        Scenario::new([[0.0, 0.0, 1.0]; 5], [[0.0, 0.3, 1.0]; 5]).unwrap()
    }

    #[test]
    fn first_decider_wins() {
        let s = dummy_scenario();
        let t = &initial_triangulation()[0];
        let map = MasterMap::new(&s, t);
        let cfg = OracleConfig::default();

        let seq = OracleSequence::new(vec![Arc::new(Fixed("no", Verdict::Reject))]).unwrap();
        assert_eq!(label_triangle(&map, &seq, &cfg).verdict, Verdict::Reject);

        let seq = OracleSequence::new(vec![
            Arc::new(Fixed("idle", Verdict::Pass)),
            Arc::new(Fixed("yes", Verdict::Accept)),
            Arc::new(Fixed("no", Verdict::Reject)),
        ])
        .unwrap();
        let l = label_triangle(&map, &seq, &cfg);
        assert_eq!(l, Label { verdict: Verdict::Accept, oracle: Some("yes") });

        let seq = OracleSequence::new(vec![Arc::new(Fixed("idle", Verdict::Pass))]).unwrap();
        assert_eq!(label_triangle(&map, &seq, &cfg), Label::PASS);
    }

    #[test]
    fn registry_resolves_names() {
        let r = Registry::default();
        let names: Vec<_> = r.names().collect();
        for n in [
            "intersection",
            "linear_approximation",
            "gd_disjoint",
            "gd_converge",
            "newton",
            "nonzero_certified",
            "krawczyk_certified",
        ] {
            assert!(names.contains(&n), "{n}");
        }
        assert_eq!(r.sequence(&["nope"]).unwrap_err(), ConfigError::UnknownOracle("nope".into()));
        assert_eq!(r.sequence::<&str>(&[]).unwrap_err(), ConfigError::EmptySequence);
        assert_eq!(OracleSequence::standard().names(), STANDARD_SEQUENCE);
    }

    #[test]
    fn matrix_norms() {
        assert!((spectral_norm(&[[3.0, 0.0], [0.0, -2.0]]) - 3.0).abs() < 1e-15);
        assert!((spectral_norm(&[[1.0, 1.0], [0.0, 0.0]]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((frobenius_norm(&[[1.0, 1.0], [1.0, 1.0]]) - 2.0).abs() < 1e-15);
        // spectral ≤ Frobenius
        let j = [[0.3, -1.2], [2.5, 0.7]];
        assert!(spectral_norm(&j) <= frobenius_norm(&j));
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::default().validate().is_ok());
        let bad = OracleConfig { c_area_scaling: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OracleConfig { c_max_int_norm: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
