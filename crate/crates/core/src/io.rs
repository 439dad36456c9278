//! JSON documents: scenario and config inputs, run outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicPoint;
use crate::engine::{EngineConfig, Leaf, RunResult, RunStats, Solution, Status};
use crate::mastermap::Scenario;
use crate::oracles::{GdStepRule, JacobianNorm, NewtonVariant, OracleConfig, Registry, STANDARD_SEQUENCE};
use crate::pplane::{Face, Triangle, TriangleError};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{field}`: {msg}")]
    Field { field: &'static str, msg: String },
    #[error(transparent)]
    Config(#[from] crate::oracles::ConfigError),
    #[error(transparent)]
    Triangle(#[from] TriangleError),
    #[error(transparent)]
    Dyadic(#[from] crate::dyadic::ParseDyadicError),
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

pub fn write_string(path: &Path, s: &str) -> Result<(), IoError> {
    std::fs::write(path, s).map_err(|source| IoError::Write { path: path.display().to_string(), source })
}

/// Lines of sight as five `[x, y, z]` columns each for `p` and `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub p: Vec<[f64; 3]>,
    pub u: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub known_solutions: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_unit: Option<String>,
}

fn five(v: &[[f64; 3]], field: &'static str) -> Result<[[f64; 3]; 5], IoError> {
    v.try_into().map_err(|_| IoError::Field { field, msg: format!("expected 5 columns, found {}", v.len()) })
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }

    pub fn to_scenario(&self) -> Result<Scenario, IoError> {
        let p = five(&self.p, "p")?;
        let u = five(&self.u, "u")?;
        let mut s = Scenario::new(p, u).map_err(|e| IoError::Field { field: "u", msg: e.to_string() })?;
        s.known_solutions = self.known_solutions.clone();
        s.length_unit = self.length_unit.clone();
        Ok(s)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            p: s.p.to_vec(),
            u: s.u.to_vec(),
            known_solutions: s.known_solutions.clone(),
            length_unit: s.length_unit.clone(),
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    ScenarioFile::parse(&read_to_string(path)?)?.to_scenario()
}

/// Engine and oracle settings. Every field is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub oracles: Vec<String>,
    pub c_max_int_norm: f64,
    pub c_area_scaling: f64,
    pub c_safety: f64,
    pub newton_variant: NewtonVariant,
    pub jacobian_norm: JacobianNorm,
    pub gd_step: GdStepRule,
    pub max_area_to_label: f64,
    pub min_area_to_stop: f64,
    pub subdivision_ratio: f64,
    pub certify: bool,
    pub certify_refine_area: f64,
    pub max_generations: u32,
    pub seed: Option<u64>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let e = EngineConfig::default();
        let o = OracleConfig::default();
        Self {
            oracles: STANDARD_SEQUENCE.iter().map(|s| s.to_string()).collect(),
            c_max_int_norm: o.c_max_int_norm,
            c_area_scaling: o.c_area_scaling,
            c_safety: o.c_safety,
            newton_variant: o.newton_variant,
            jacobian_norm: o.jacobian_norm,
            gd_step: o.gd_step,
            max_area_to_label: e.max_area_to_label,
            min_area_to_stop: e.min_area_to_stop,
            subdivision_ratio: e.subdivision_ratio,
            certify: e.certify,
            certify_refine_area: e.certify_refine_area,
            max_generations: e.max_generations,
            seed: None,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_engine_config(&self, registry: &Registry) -> Result<EngineConfig, IoError> {
        let cfg = EngineConfig {
            sequence: registry.sequence(&self.oracles)?,
            oracle: OracleConfig {
                c_max_int_norm: self.c_max_int_norm,
                c_safety: self.c_safety,
                c_area_scaling: self.c_area_scaling,
                newton_variant: self.newton_variant,
                jacobian_norm: self.jacobian_norm,
                gd_step: self.gd_step,
            },
            max_area_to_label: self.max_area_to_label,
            min_area_to_stop: self.min_area_to_stop,
            subdivision_ratio: self.subdivision_ratio,
            certify: self.certify,
            certify_refine_area: self.certify_refine_area,
            max_generations: self.max_generations,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile, IoError> {
    ConfigFile::parse(&read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleDoc {
    pub vertices: [String; 3],
    pub face: Face,
    pub generation: u32,
}

impl TriangleDoc {
    pub fn new(t: &Triangle) -> Self {
        Self {
            vertices: t.vertices().clone().map(|v| v.to_string()),
            face: t.face(),
            generation: t.generation(),
        }
    }

    pub fn to_triangle(&self) -> Result<Triangle, IoError> {
        let v = [0, 1, 2].map(|i| self.vertices[i].parse::<DyadicPoint>());
        let [a, b, c] = v;
        Ok(Triangle::new([a?, b?, c?], self.face, self.generation)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafDoc {
    #[serde(flatten)]
    pub triangle: TriangleDoc,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangulationDoc {
    pub leaves: Vec<LeafDoc>,
    #[serde(default)]
    pub known_solutions: Vec<[f64; 3]>,
    #[serde(default)]
    pub solutions: Vec<[f64; 3]>,
}

impl TriangulationDoc {
    pub fn new(leaves: &[Leaf], known: &[[f64; 3]], solutions: &[Solution]) -> Self {
        Self {
            leaves: leaves
                .iter()
                .map(|l| LeafDoc {
                    triangle: TriangleDoc::new(&l.triangle),
                    status: l.status,
                    oracle: l.oracle.map(str::to_string),
                })
                .collect(),
            known_solutions: known.to_vec(),
            solutions: solutions.iter().filter(|s| s.polished).map(|s| s.w).collect(),
        }
    }

    pub fn to_leaves(&self) -> Result<Vec<(Triangle, Status)>, IoError> {
        self.leaves.iter().map(|l| Ok((l.triangle.to_triangle()?, l.status))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub triangle: TriangleDoc,
    /// `[[lo, hi], [lo, hi]]` in the triangle's local coordinates.
    pub box_in: [[f64; 2]; 2],
    pub box_out: [[f64; 2]; 2],
    pub unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub w: [f64; 3],
    pub v1: [f64; 3],
    pub v2: [f64; 3],
    pub theta: Option<[f64; 5]>,
    pub residual: f64,
    pub polished: bool,
    pub iterations: u32,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateDoc>,
    pub triangle: TriangleDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionsDoc {
    pub solutions: Vec<SolutionDoc>,
}

impl SolutionsDoc {
    pub fn new(r: &RunResult) -> Self {
        let bx = |b: &crate::interval::IntervalBox| b.0.map(|i| [i.lo(), i.hi()]);
        Self {
            solutions: r
                .solutions
                .iter()
                .map(|s| SolutionDoc {
                    w: s.w,
                    v1: s.v1,
                    v2: s.v2,
                    theta: s.theta,
                    residual: s.residual,
                    polished: s.polished,
                    iterations: s.iterations,
                    certified: s.certified,
                    certificate: s.certificate.as_ref().map(|c| CertificateDoc {
                        triangle: TriangleDoc::new(&c.triangle),
                        box_in: bx(&c.report.input),
                        box_out: bx(&c.report.image),
                        unique: c.report.unique,
                    }),
                    triangle: TriangleDoc::new(&r.leaves[s.leaf].triangle),
                })
                .collect(),
        }
    }
}

/// Table-shaped statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub area_accepted: f64,
    pub area_passed: f64,
    pub area_rejected: BTreeMap<String, f64>,
    pub area_rejected_total: f64,
    pub ratio: f64,
    pub total_area: f64,
    pub bottleneck_calls: u64,
    pub jacobian_evals: u64,
    pub polish_calls: u64,
    pub triangles_labeled: u64,
    pub leaves: u64,
    pub generations: u32,
    pub cap_hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_reject_area: Option<f64>,
    pub length_scale: f64,
}

impl StatsDoc {
    pub fn new(s: &RunStats, length_scale: f64) -> Self {
        Self {
            area_accepted: s.area_accepted,
            area_passed: s.area_passed,
            area_rejected: s.area_rejected.clone(),
            area_rejected_total: s.area_rejected_total(),
            ratio: s.ratio(),
            total_area: s.total_area(),
            bottleneck_calls: s.bottleneck_calls,
            jacobian_evals: s.jacobian_evals,
            polish_calls: s.polish_calls,
            triangles_labeled: s.triangles_labeled,
            leaves: s.leaves,
            generations: s.generations,
            cap_hit: s.cap_hit,
            certified_reject_area: s.certified_reject_area,
            length_scale,
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}
