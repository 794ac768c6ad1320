//! Triangular lattice configurations: seeded generation, uniform-disk
//! perturbations and the triangularity test.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SwarmConfig};
use crate::graph::{compute_links, numerical_rank, rigidity_matrix, DEFAULT_RANK_TOL};
use crate::seed::derive_seed;

/// Default tolerance on `| |r_ij| - R |` for an exact lattice, relative to `R`.
pub const DEFAULT_LENGTH_TOL: f64 = 1e-6;

/// Generation retries before giving up.
pub const MAX_GENERATION_ATTEMPTS: usize = 64;

/// Axial neighbour offsets of the triangular grid, counter-clockwise.
const DIRECTIONS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// How new sites are chosen while growing a lattice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthPolicy {
    /// Any unoccupied grid neighbour of the occupied set, uniformly.
    UniformFrontier,
    /// Unoccupied sites closing at least one triangle with two adjacent
    /// occupied sites, uniformly. Every intermediate shape stays rigid.
    #[default]
    TriangleFrontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n: usize,
    pub r: f64,
    pub seed: u64,
    #[serde(default)]
    pub growth: GrowthPolicy,
}

impl LatticeSpec {
    pub fn new(n: usize, r: f64, seed: u64) -> Self {
        LatticeSpec {
            n,
            r,
            seed,
            growth: GrowthPolicy::default(),
        }
    }

    pub fn with_growth(mut self, growth: GrowthPolicy) -> Self {
        self.growth = growth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid(format!(
                "a triangular lattice needs at least 3 agents, got {}",
                self.n
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("lattice spacing must be positive"));
        }
        Ok(())
    }
}

/// Axial grid coordinate.
type Site = (i32, i32);

fn to_plane(site: Site, r: f64) -> Point {
    let (q, s) = site;
    Point::new(r * (q as f64 + 0.5 * s as f64), r * (s as f64 * (3f64.sqrt() / 2.0)))
}

fn neighbours(site: Site) -> impl Iterator<Item = Site> {
    DIRECTIONS.iter().map(move |(dq, dr)| (site.0 + dq, site.1 + dr))
}

fn closes_triangle(site: Site, occupied: &HashSet<Site>) -> bool {
    (0..6).any(|k| {
        let (a, b) = (DIRECTIONS[k], DIRECTIONS[(k + 1) % 6]);
        occupied.contains(&(site.0 + a.0, site.1 + a.1)) && occupied.contains(&(site.0 + b.0, site.1 + b.1))
    })
}

/// Random accretion on the integer grid. Candidate lists are kept in
/// insertion order so the draw sequence alone determines the shape.
fn grow(n: usize, policy: GrowthPolicy, rng: &mut ChaCha8Rng) -> Vec<Site> {
    let mut sites = vec![(0, 0)];
    let mut occupied: HashSet<Site> = sites.iter().copied().collect();
    let mut frontier: Vec<Site> = neighbours((0, 0)).collect();
    let mut in_frontier: HashSet<Site> = frontier.iter().copied().collect();
    while sites.len() < n {
        let eligible: Vec<usize> = match policy {
            GrowthPolicy::UniformFrontier => (0..frontier.len()).collect(),
            GrowthPolicy::TriangleFrontier if sites.len() < 2 => (0..frontier.len()).collect(),
            GrowthPolicy::TriangleFrontier => (0..frontier.len())
                .filter(|&k| closes_triangle(frontier[k], &occupied))
                .collect(),
        };
        let pick = eligible[rng.gen_range(0..eligible.len())];
        let site = frontier.remove(pick);
        in_frontier.remove(&site);
        occupied.insert(site);
        sites.push(site);
        for nb in neighbours(site) {
            if !occupied.contains(&nb) && in_frontier.insert(nb) {
                frontier.push(nb);
            }
        }
    }
    sites
}

/// Grows `spec.n` sites of the triangular grid with spacing `R` and checks the
/// result is a triangular configuration before returning it.
pub fn generate_triangular(spec: &LatticeSpec, r_a: f64) -> Result<SwarmConfig> {
    spec.validate()?;
    let sqrt3 = 3f64.sqrt();
    if !(r_a > spec.r && r_a < spec.r * sqrt3) {
        return Err(Error::invalid(format!(
            "R_a must lie in (R, R*sqrt(3)), got {r_a}"
        )));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let seed = if attempt == 0 {
            spec.seed
        } else {
            derive_seed(spec.seed, u64::MAX, attempt as u64)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = grow(spec.n, spec.growth, &mut rng);
        let config = SwarmConfig::from_positions_unchecked(
            sites.into_iter().map(|s| to_plane(s, spec.r)).collect(),
        );
        let report = is_triangular(&config, spec.r, r_a, DEFAULT_LENGTH_TOL * spec.r, DEFAULT_RANK_TOL)?;
        if report.triangular {
            return Ok(config);
        }
    }
    Err(Error::Generation {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// Displaces every agent by an independent uniform sample from the disk of
/// radius `delta` (radius `delta * sqrt(u)`, uniform angle).
pub fn perturb(config: &SwarmConfig, delta: f64, seed: u64) -> SwarmConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = config
        .positions()
        .iter()
        .map(|p| {
            let u: f64 = rng.gen();
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            let radius = delta * u.sqrt();
            p + Point::new(radius * theta.cos(), radius * theta.sin())
        })
        .collect();
    SwarmConfig::from_positions_unchecked(positions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularityReport {
    pub triangular: bool,
    pub rigid: bool,
    pub rank: usize,
    pub expected_rank: usize,
    /// `max_k | |r_k| - R |`, absent when there are no links.
    pub max_length_deviation: Option<f64>,
    pub link_count: usize,
}

/// Infinitesimal rigidity plus every link having length `R` within `tol_len`.
pub fn is_triangular(
    config: &SwarmConfig,
    r: f64,
    r_a: f64,
    tol_len: f64,
    tol_rank: f64,
) -> Result<TriangularityReport> {
    let links = compute_links(config, r_a);
    let n = config.n();
    let expected_rank = (2 * n).saturating_sub(3);
    let rank = if n >= 2 {
        numerical_rank(rigidity_matrix(config, &links)?.matrix(), tol_rank)?
    } else {
        0
    };
    let rigid = n >= 2 && rank == expected_rank;
    let max_length_deviation = links.iter().map(|l| (l.length - r).abs()).reduce(f64::max);
    let lengths_ok = max_length_deviation.is_some_and(|e| e <= tol_len);
    Ok(TriangularityReport {
        triangular: rigid && lengths_ok,
        rigid,
        rank,
        expected_rank,
        max_length_deviation,
        link_count: links.len(),
    })
}

/// `e = max_k | |r_k| - R |` over the links at range `r_a`.
pub fn link_error(config: &SwarmConfig, r: f64, r_a: f64) -> Result<f64> {
    compute_links(config, r_a)
        .iter()
        .map(|l| (l.length - r).abs())
        .reduce(f64::max)
        .ok_or_else(|| Error::invalid("link error is undefined for a configuration without links"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::are_congruent;
    use crate::interaction::DEFAULT_MAX_LINK;
    use proptest::prelude::*;

    fn lattice(n: usize, seed: u64) -> SwarmConfig {
        generate_triangular(&LatticeSpec::new(n, 1.0, seed), DEFAULT_MAX_LINK).unwrap()
    }

    #[test]
    fn three_sites_form_unit_triangle() {
        let c = lattice(3, 9);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((c.distance(i, j) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hundred_site_lattice_is_triangular() {
        let c = lattice(100, 42);
        assert_eq!(c.n(), 100);
        let links = compute_links(&c, DEFAULT_MAX_LINK);
        for l in &links {
            assert!((l.length - 1.0).abs() < 1e-12);
        }
        let report = is_triangular(&c, 1.0, DEFAULT_MAX_LINK, 1e-6, DEFAULT_RANK_TOL).unwrap();
        assert!(report.triangular && report.rigid);
        assert_eq!(report.rank, 197);
    }

    #[test]
    fn second_shell_is_out_of_link_range() {
        let c = lattice(60, 5);
        let n = c.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = c.distance(i, j);
                assert!((d - 1.0).abs() < 1e-12 || d >= 3f64.sqrt() - 1e-12);
            }
        }
    }

    #[test]
    fn different_seeds_give_different_shapes() {
        let a = lattice(30, 1);
        let b = lattice(30, 2);
        assert!(!are_congruent(&a, &b, 1e-9).unwrap());
        assert_eq!(a, lattice(30, 1));
    }

    #[test]
    fn uniform_frontier_growth_also_verifies() {
        let spec = LatticeSpec::new(20, 1.0, 4).with_growth(GrowthPolicy::UniformFrontier);
        match generate_triangular(&spec, DEFAULT_MAX_LINK) {
            Ok(c) => {
                let r = is_triangular(&c, 1.0, DEFAULT_MAX_LINK, 1e-6, DEFAULT_RANK_TOL).unwrap();
                assert!(r.triangular);
            }
            Err(e) => assert!(matches!(e, Error::Generation { .. })),
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate_triangular(&LatticeSpec::new(2, 1.0, 0), DEFAULT_MAX_LINK).is_err());
        assert!(generate_triangular(&LatticeSpec::new(5, 1.0, 0), 1.8).is_err());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let c = lattice(10, 3);
        assert_eq!(perturb(&c, 0.0, 77), c);
    }

    #[test]
    fn mean_disk_displacement() {
        let origin = SwarmConfig::new(vec![Point::zeros(); 100_000]).unwrap();
        let moved = perturb(&origin, 0.3, 2024);
        let mean: f64 = moved.positions().iter().map(|p| p.norm()).sum::<f64>() / 100_000.0;
        assert!((mean / (2.0 / 3.0 * 0.3) - 1.0).abs() < 0.01, "{mean}");
        assert!(moved.positions().iter().all(|p| p.norm() <= 0.3));
    }

    #[test]
    fn triangularity_examples() {
        let c = lattice(25, 8);
        let r = is_triangular(&c, 1.0, DEFAULT_MAX_LINK, 1e-6, DEFAULT_RANK_TOL).unwrap();
        assert!(r.triangular);
        assert!(r.max_length_deviation.unwrap() < 1e-12);

        let shaken = perturb(&c, 0.5, 1);
        let r = is_triangular(&shaken, 1.0, DEFAULT_MAX_LINK, 1e-6, DEFAULT_RANK_TOL).unwrap();
        assert!(!r.triangular);

        let square = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap();
        let r = is_triangular(&square, 1.0, DEFAULT_MAX_LINK, 1e-6, DEFAULT_RANK_TOL).unwrap();
        assert!(!r.triangular && !r.rigid);
        assert_eq!(r.max_length_deviation, Some(0.0));
    }

    #[test]
    fn link_error_examples() {
        assert!(link_error(&lattice(12, 0), 1.0, DEFAULT_MAX_LINK).unwrap() < 1e-12);
        let stretched = SwarmConfig::from_xy(&[(0.0, 0.0), (1.1, 0.0), (-1.0, 0.0)]).unwrap();
        assert!((link_error(&stretched, 1.0, DEFAULT_MAX_LINK).unwrap() - 0.1).abs() < 1e-12);
        let lonely = SwarmConfig::from_xy(&[(0.0, 0.0), (5.0, 0.0)]).unwrap();
        assert!(link_error(&lonely, 1.0, DEFAULT_MAX_LINK).is_err());
    }

    #[test]
    fn initial_error_is_bounded_by_twice_delta() {
        let base = lattice(50, 17);
        for draw in 0..1000u64 {
            let delta = 0.05 + 0.25 * (draw % 5) as f64 / 4.0;
            let c = perturb(&base, delta, draw);
            // Only links that survive the perturbation are measured.
            let e = link_error(&c, 1.0, DEFAULT_MAX_LINK).unwrap();
            assert!(e <= 2.0 * delta + 1e-12, "draw {draw}: e = {e}, delta = {delta}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn displacement_scales_with_delta(seed in any::<u64>(), d1 in 0.0..1.0f64, extra in 0.0..1.0f64) {
            let base = lattice(8, 1);
            let d2 = d1 + extra;
            let a = perturb(&base, d1, seed);
            let b = perturb(&base, d2, seed);
            for k in 0..base.n() {
                let da = (a.position(k) - base.position(k)).norm();
                let db = (b.position(k) - base.position(k)).norm();
                prop_assert!(da <= db + 1e-15);
            }
        }

        #[test]
        fn link_error_is_motion_invariant(seed in 0u64..1000, angle in -3.0..3.0f64, tx in -5.0..5.0f64) {
            let c = perturb(&lattice(15, seed), 0.1, seed);
            let moved = c.rotated(angle, c.center()).translated(Point::new(tx, -tx));
            let e0 = link_error(&c, 1.0, DEFAULT_MAX_LINK).unwrap();
            let e1 = link_error(&moved, 1.0, DEFAULT_MAX_LINK).unwrap();
            prop_assert!((e0 - e1).abs() < 1e-9);
        }

        #[test]
        fn generated_lattices_are_exact(seed in any::<u64>(), n in 3usize..60) {
            let c = lattice(n, seed);
            for l in &compute_links(&c, DEFAULT_MAX_LINK) {
                prop_assert!((l.length - 1.0).abs() < 1e-12);
            }
        }
    }
}
