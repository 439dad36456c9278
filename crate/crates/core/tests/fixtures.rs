use std::path::Path;

use pplane_iod::engine::polish;
use pplane_iod::io::load_scenario;
use pplane_iod::mastermap::{forward, Scenario};
use pplane_iod::pplane::{angular_distance, initial_triangulation, Triangle};

fn load(name: &str) -> Scenario {
    load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("fixtures/{name}.json"))).unwrap()
}

fn residual(s: &Scenario, w: [f64; 3]) -> f64 {
    let t = initial_triangulation().into_iter().find(|t| t.contains_direction(w, 1e-12)).unwrap();
    let lf = t.local_frame();
    let v = forward::<f64>(s, &lf, lf.preimage_of_direction(w).unwrap()).unwrap().value;
    v[0].hypot(v[1])
}

fn cell(w: [f64; 3], depth: u32) -> Triangle {
    let mut t = initial_triangulation().into_iter().find(|t| t.contains_direction(w, 1e-12)).unwrap();
    for _ in 0..depth {
        t = t.regular_subdivide().into_iter().find(|c| c.contains_direction(w, 1e-12)).unwrap();
    }
    t
}

/// Polishing from a small cell around `w` lands on a zero within
/// six-digit rounding of `w`.
fn polishes_near(s: &Scenario, w: [f64; 3]) -> f64 {
    let (sn, _) = s.nondimensionalized();
    let (sol, _) = polish(&sn, &cell(w, 12));
    assert!(sol.polished);
    angular_distance(sol.w, w)
}

#[test]
fn near_circular_solution_is_a_zero() {
    let s = load("near_circular");
    assert!(residual(&s, s.known_solutions[0]) <= 1e-6);
}

#[test]
fn first_two_solutions_normal_is_a_zero() {
    let s = load("two_solutions");
    assert!(residual(&s, s.known_solutions[0]) <= 1e-5);
}

#[test]
fn truncated_solutions_polish_to_nearby_zeros() {
    let s = load("single_observer");
    let d = polishes_near(&s, s.known_solutions[0]);
    assert!(d < 1e-5, "{d:e}");
    let s = load("two_solutions");
    for w in &s.known_solutions {
        let d = polishes_near(&s, *w);
        assert!(d < 1e-5, "{d:e}");
    }
}
