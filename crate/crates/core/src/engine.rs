//! The subdivision driver.
//!
//! The frontier is processed one generation at a time: every triangle of
//! the current generation is labeled (in parallel), then the results are
//! folded in frontier order. Output is therefore independent of the number
//! of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::interval::IntervalBox;
use crate::mastermap::{build_frame, fit_conic_f64, intersect_plane, normalize, MasterMap, Scenario};
use crate::oracles::heuristic::solve2;
use crate::oracles::{krawczyk, label_triangle, ConfigError, KrawczykReport, NonzeroCertified, Oracle, OracleConfig, OracleSequence, Verdict};
use crate::pplane::{canonicalize, initial_triangulation, Side, Triangle, TOTAL_AREA};
use crate::mastermap::Stage;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub sequence: OracleSequence,
    pub oracle: OracleConfig,
    pub max_area_to_label: f64,
    pub min_area_to_stop: f64,
    /// `γ` in the adaptive rule `δ_max ≥ γ·δ_min`.
    pub subdivision_ratio: f64,
    pub certify: bool,
    pub certify_refine_area: f64,
    pub max_generations: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            sequence: OracleSequence::standard(),
            oracle: OracleConfig::default(),
            max_area_to_label: 0.05,
            min_area_to_stop: 1e-3,
            subdivision_ratio: 4.0,
            certify: false,
            certify_refine_area: 1e-9,
            max_generations: 64,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.oracle.validate()?;
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.min_area_to_stop > 0.0 && self.min_area_to_stop < self.max_area_to_label) {
            return bad("need 0 < min_area_to_stop < max_area_to_label");
        }
        if !(self.subdivision_ratio > 2.0) {
            return bad("subdivision_ratio must exceed 2");
        }
        if !(self.certify_refine_area > 0.0) {
            return bad("certify_refine_area must be positive");
        }
        if self.max_generations == 0 {
            return bad("max_generations must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Accepted,
    Rejected,
    /// Still "pass" when it became too small to subdivide.
    Unresolved,
}

/// A triangle of the final triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub triangle: Triangle,
    pub status: Status,
    pub oracle: Option<&'static str>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub area_accepted: f64,
    pub area_passed: f64,
    pub area_rejected: BTreeMap<String, f64>,
    /// 5×5 real solves performed while labeling and choosing subdivisions.
    pub bottleneck_calls: u64,
    /// Point Jacobians requested by the oracles and the subdivision rule,
    /// counted without memoization.
    pub jacobian_evals: u64,
    pub polish_calls: u64,
    pub triangles_labeled: u64,
    pub leaves: u64,
    pub generations: u32,
    pub cap_hit: bool,
    /// Rejected area that the interval enclosure also proves zero-free.
    pub certified_reject_area: Option<f64>,
}

impl RunStats {
    pub fn area_rejected_total(&self) -> f64 {
        self.area_rejected.values().sum()
    }

    pub fn total_area(&self) -> f64 {
        self.area_accepted + self.area_passed + self.area_rejected_total()
    }

    /// `(accepted + passed) / rejected`.
    pub fn ratio(&self) -> f64 {
        (self.area_accepted + self.area_passed) / self.area_rejected_total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub triangle: Triangle,
    pub report: KrawczykReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Unit normal, canonical sign.
    pub w: [f64; 3],
    pub v1: [f64; 3],
    pub v2: [f64; 3],
    /// Conic coefficients `[a, b, c, d, e]` in the scenario's length unit.
    pub theta: Option<[f64; 5]>,
    /// `‖F‖` in nondimensional units.
    pub residual: f64,
    pub polished: bool,
    pub iterations: u32,
    pub certified: bool,
    pub certificate: Option<Certificate>,
    /// Index of the accepted triangle in [`RunResult::leaves`].
    pub leaf: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub leaves: Vec<Leaf>,
    pub solutions: Vec<Solution>,
    pub stats: RunStats,
    pub length_scale: f64,
}

impl RunResult {
    pub fn accepted(&self) -> impl Iterator<Item = &Leaf> {
        self.leaves.iter().filter(|l| l.status == Status::Accepted)
    }

    /// The leaf whose triangle contains the direction `w` most deeply.
    pub fn leaf_containing(&self, w: [f64; 3]) -> Option<&Leaf> {
        let depth = |t: &Triangle| {
            t.plane_point(w).map_or(f64::NEG_INFINITY, |q| t.barycentric(&q).into_iter().fold(f64::INFINITY, f64::min))
        };
        self.leaves
            .iter()
            .filter(|l| l.triangle.contains_direction(w, 1e-12))
            .max_by(|a, b| depth(&a.triangle).total_cmp(&depth(&b.triangle)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subdivision {
    Regular,
    Bisect(Side),
}

/// `δ_i = ½‖J(m_i) e_i‖` for each side with midpoint `m_i` and side vector
/// `e_i` in local coordinates; an unevaluable midpoint gives `∞`.
pub fn side_variation(map: &MasterMap<'_>) -> [f64; 3] {
    Side::ALL.map(|s| {
        let (m, e) = s.local_midpoint_and_vector();
        match map.eval_with_jacobian(m) {
            Ok((_, j)) => {
                let je = [j[0][0] * e[0] + j[0][1] * e[1], j[1][0] * e[0] + j[1][1] * e[1]];
                let d = 0.5 * je[0].hypot(je[1]);
                if d.is_nan() { f64::INFINITY } else { d }
            }
            Err(_) => f64::INFINITY,
        }
    })
}

/// Bisect the side of largest variation when `δ_max ≥ γ·δ_min`, else split
/// regularly. Ties go to the lowest side index.
pub fn choose_subdivision(delta: [f64; 3], gamma: f64) -> Subdivision {
    if delta.iter().all(|d| d.is_infinite()) {
        return Subdivision::Regular;
    }
    let mut imax = 0;
    for i in 1..3 {
        if delta[i] > delta[imax] {
            imax = i;
        }
    }
    let dmin = delta.iter().copied().fold(f64::INFINITY, f64::min);
    if delta[imax] >= gamma * dmin {
        Subdivision::Bisect(Side::ALL[imax])
    } else {
        Subdivision::Regular
    }
}

fn subdivide(t: &Triangle, how: Subdivision) -> Vec<Triangle> {
    match how {
        Subdivision::Regular => t.regular_subdivide().to_vec(),
        Subdivision::Bisect(s) => t.bisect(s).to_vec(),
    }
}

struct Outcome {
    leaf: Option<Leaf>,
    children: Vec<Triangle>,
    solves: u64,
    jacobians: u64,
    labeled: bool,
}

fn process(t: &Triangle, s: &Scenario, cfg: &EngineConfig, ocfg: &OracleConfig) -> Outcome {
    if t.area() > cfg.max_area_to_label {
        return Outcome { leaf: None, children: t.regular_subdivide().to_vec(), solves: 0, jacobians: 0, labeled: false };
    }
    let map = MasterMap::new(s, t);
    let label = label_triangle(&map, &cfg.sequence, ocfg);
    let leaf = |status| Some(Leaf { triangle: t.clone(), status, oracle: label.oracle });
    let (leaf, children) = match label.verdict {
        Verdict::Accept => (leaf(Status::Accepted), Vec::new()),
        Verdict::Reject => (leaf(Status::Rejected), Vec::new()),
        Verdict::Pass if t.area() < cfg.min_area_to_stop => (leaf(Status::Unresolved), Vec::new()),
        Verdict::Pass => {
            let how = choose_subdivision(side_variation(&map), cfg.subdivision_ratio);
            (None, subdivide(t, how))
        }
    };
    Outcome { leaf, children, solves: map.bottleneck_calls(), jacobians: map.jacobian_evals(), labeled: true }
}

/// Runs the labeled subdivision on the four northern faces.
pub fn run(scenario: &Scenario, cfg: &EngineConfig) -> Result<RunResult, ConfigError> {
    cfg.validate()?;
    let (s, scale) = scenario.nondimensionalized();
    let ocfg = cfg.oracle.rescaled(scale);

    let mut stats = RunStats::default();
    let mut leaves = Vec::new();
    let mut frontier = initial_triangulation();
    let mut generation = 0;
    while !frontier.is_empty() {
        if generation >= cfg.max_generations {
            stats.cap_hit = true;
            leaves.extend(frontier.drain(..).map(|t| Leaf { triangle: t, status: Status::Unresolved, oracle: None }));
            break;
        }
        let outcomes: Vec<Outcome> = frontier.par_iter().map(|t| process(t, &s, cfg, &ocfg)).collect();
        let mut next = Vec::new();
        for o in outcomes {
            stats.bottleneck_calls += o.solves;
            stats.jacobian_evals += o.jacobians;
            stats.triangles_labeled += o.labeled as u64;
            leaves.extend(o.leaf);
            next.extend(o.children);
        }
        frontier = next;
        generation += 1;
    }
    stats.generations = generation;

    for l in &leaves {
        let a = l.triangle.area();
        match l.status {
            Status::Accepted => stats.area_accepted += a,
            Status::Unresolved => stats.area_passed += a,
            Status::Rejected => {
                *stats.area_rejected.entry(l.oracle.unwrap_or("unknown").to_string()).or_default() += a;
            }
        }
    }
    stats.leaves = leaves.len() as u64;

    let polished: Vec<(Solution, u64)> = leaves
        .par_iter()
        .enumerate()
        .filter(|(_, l)| l.status == Status::Accepted)
        .map(|(i, l)| {
            let (mut sol, calls) = polish(&s, &l.triangle);
            sol.leaf = i;
            sol.theta = sol.polished.then(|| conic_in_units(scenario, sol.w)).flatten();
            (sol, calls)
        })
        .collect();
    let mut solutions = Vec::with_capacity(polished.len());
    for (sol, calls) in polished {
        stats.polish_calls += calls;
        solutions.push(sol);
    }

    if cfg.certify {
        let certs: Vec<Option<Certificate>> = solutions
            .par_iter()
            .map(|sol| certify_solution(&s, &leaves[sol.leaf].triangle, sol, cfg.certify_refine_area))
            .collect();
        for (sol, c) in solutions.iter_mut().zip(certs) {
            sol.certified = c.is_some();
            sol.certificate = c;
        }
        let audited: Vec<f64> = leaves
            .par_iter()
            .map(|l| {
                if l.status != Status::Rejected {
                    return 0.0;
                }
                let map = MasterMap::new(&s, &l.triangle);
                match NonzeroCertified.label(&map, &ocfg) {
                    Verdict::Reject => l.triangle.area(),
                    _ => 0.0,
                }
            })
            .collect();
        stats.certified_reject_area = Some(audited.iter().sum());
    }

    Ok(RunResult { leaves, solutions, stats, length_scale: scale })
}

pub const POLISH_TOL: f64 = 1e-9;
const POLISH_MAX_ITER: u32 = 50;

fn conic_in_units(s: &Scenario, w: [f64; 3]) -> Option<[f64; 5]> {
    let w = normalize(&w).ok()?;
    let f = build_frame(&w, &s.u[0]).ok()?;
    let pts = intersect_plane(&f, s).ok()?;
    fit_conic_f64(&pts).ok().map(|c| c.0)
}

/// Damped Newton from the local centre of `t`. Returns the solution (with
/// `polished = false` on failure) and the number of 5×5 solves spent.
pub fn polish(s: &Scenario, t: &Triangle) -> (Solution, u64) {
    let map = MasterMap::new(s, t);
    let frame = *map.frame();
    let limit = 2.0 * t.circumradius();
    let mut z: Point = [0.0, 0.0];
    let mut iterations = 0;
    let mut ok = false;
    let mut residual = f64::INFINITY;

    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    'outer: for it in 0..=POLISH_MAX_ITER {
        iterations = it;
        let Ok((v, j)) = map.eval_with_jacobian(z) else { break };
        residual = norm(v);
        if residual == 0.0 {
            ok = true;
            break;
        }
        if it == POLISH_MAX_ITER {
            ok = residual <= POLISH_TOL;
            break;
        }
        let Ok(step) = solve2(&j, v, Stage::Newton) else {
            ok = residual <= POLISH_TOL;
            break;
        };
        if residual <= POLISH_TOL && norm(step) <= 1e-13 * (1.0 + norm(z)) {
            ok = true;
            break;
        }
        let mut lambda = 1.0;
        loop {
            let cand = [z[0] - lambda * step[0], z[1] - lambda * step[1]];
            if let Ok(fv) = map.eval(cand) {
                if norm(fv) < residual {
                    z = cand;
                    break;
                }
            }
            lambda /= 2.0;
            if lambda < 1e-6 {
                // no further decrease available
                ok = residual <= POLISH_TOL;
                break 'outer;
            }
        }
        if t.distance_to(&frame.apply(z)) > limit {
            break;
        }
    }
    let raw = frame.apply(z);
    let w = canonicalize(raw);
    let (v1, v2) = match build_frame(&w, &s.u[0]) {
        Ok(f) => (f.v1, f.v2),
        Err(_) => ([f64::NAN; 3], [f64::NAN; 3]),
    };
    let sol = Solution {
        w,
        v1,
        v2,
        theta: None,
        residual,
        polished: ok,
        iterations,
        certified: false,
        certificate: None,
        leaf: 0,
    };
    (sol, map.bottleneck_calls())
}

/// Regularly refines `t` down to `refine_area`, keeping only children near
/// the polished point, and runs the Krawczyk test on what is left.
pub fn certify_solution(s: &Scenario, t: &Triangle, sol: &Solution, refine_area: f64) -> Option<Certificate> {
    if !sol.polished {
        return None;
    }
    let q = t.local_frame().preimage_of_direction(sol.w).map(|z| t.local_frame().apply(z))?;
    let mut cands = vec![t.clone()];
    while cands.first()?.area() > refine_area {
        cands = cands
            .iter()
            .flat_map(|c| c.regular_subdivide())
            .filter(|c| c.distance_to(&q) <= c.circumradius())
            .collect();
    }
    // deepest containment first
    cands.sort_by(|a, b| a.distance_to(&q).total_cmp(&b.distance_to(&q)));
    cands.into_iter().find_map(|c| {
        let map = MasterMap::new(s, &c);
        let r = krawczyk(&map, &IntervalBox::reference()).ok()?;
        r.contained.then_some(Certificate { triangle: c, report: r })
    })
}

/// Sum check: the leaves tile the four faces.
pub fn area_defect(stats: &RunStats) -> f64 {
    (stats.total_area() - TOTAL_AREA).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subdivision_rule_examples() {
        assert_eq!(choose_subdivision([1.0, 1.0, 1.0], 4.0), Subdivision::Regular);
        assert_eq!(choose_subdivision([8.0, 1.0, 1.0], 4.0), Subdivision::Bisect(Side::S12));
        assert_eq!(choose_subdivision([4.0, 1.0, 1.0], 4.0), Subdivision::Bisect(Side::S12));
        assert_eq!(choose_subdivision([1.0, 1.0, 5.0], 4.0), Subdivision::Bisect(Side::S31));
        assert_eq!(choose_subdivision([1.0, 9.0, 9.0], 4.0), Subdivision::Bisect(Side::S23));
        let inf = f64::INFINITY;
        assert_eq!(choose_subdivision([inf, inf, inf], 4.0), Subdivision::Regular);
        assert_eq!(choose_subdivision([1.0, inf, 1.0], 4.0), Subdivision::Bisect(Side::S23));
        assert_eq!(choose_subdivision([0.0, 0.0, 0.0], 4.0), Subdivision::Bisect(Side::S12));
    }

    #[test]
    fn config_invariants() {
        assert!(EngineConfig::default().validate().is_ok());
        let c = EngineConfig { min_area_to_stop: 0.1, ..Default::default() };
        assert!(c.validate().is_err());
        let c = EngineConfig { subdivision_ratio: 2.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
