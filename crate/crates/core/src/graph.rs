//! Swarm graph: links, incidence and rigidity matrices, rank-based rigidity
//! and congruence tests.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::SwarmConfig;

/// Relative singular-value threshold used by [`numerical_rank`] when callers
/// have no better scale information.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Undirected link between agents `i < j`, oriented from `i` to `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// Links of a configuration in lexicographic `(i, j)` order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkSet {
    links: Vec<Link>,
}

impl LinkSet {
    /// Builds a link set from explicit pairs, validating ordering and uniqueness.
    pub fn from_pairs(config: &SwarmConfig, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut links = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if i == j {
                return Err(Error::invalid(format!("self-loop on agent {i}")));
            }
            if j >= config.n() {
                return Err(Error::invalid(format!(
                    "link ({i}, {j}) out of range for {} agents",
                    config.n()
                )));
            }
            links.push(Link {
                i,
                j,
                length: config.distance(i, j),
            });
        }
        links.sort_by_key(|l| (l.i, l.j));
        if links.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::invalid("duplicate link"));
        }
        Ok(LinkSet { links })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Link> {
        self.links.iter()
    }

    pub fn as_slice(&self) -> &[Link] {
        &self.links
    }

    /// True when both sets contain exactly the same pairs (lengths ignored).
    pub fn same_pairs(&self, other: &LinkSet) -> bool {
        self.links.len() == other.links.len()
            && self
                .links
                .iter()
                .zip(&other.links)
                .all(|(a, b)| a.i == b.i && a.j == b.j)
    }

    pub fn max_length(&self) -> Option<f64> {
        self.links.iter().map(|l| l.length).reduce(f64::max)
    }
}

impl<'a> IntoIterator for &'a LinkSet {
    type Item = &'a Link;
    type IntoIter = std::slice::Iter<'a, Link>;

    fn into_iter(self) -> Self::IntoIter {
        self.links.iter()
    }
}

/// All pairs at distance `<= r_a` (boundary inclusive), ordered by `(i, j)`.
///
/// All-pairs search; exactly reproducible and fast enough for the swarm sizes
/// of interest.
pub fn compute_links(config: &SwarmConfig, r_a: f64) -> LinkSet {
    let pos = config.positions();
    let mut links = Vec::new();
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            let length = (pos[i] - pos[j]).norm();
            if length <= r_a {
                links.push(Link { i, j, length });
            }
        }
    }
    LinkSet { links }
}

/// Signed `n x m` vertex-edge matrix. Column `k` has `+1` at the start (lower
/// index) of link `k` and `-1` at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix(pub DMatrix<f64>);

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn incidence_matrix(links: &LinkSet, n: usize) -> Result<IncidenceMatrix> {
    let mut b = DMatrix::zeros(n, links.len());
    for (k, l) in links.iter().enumerate() {
        if l.i >= n || l.j >= n {
            return Err(Error::invalid(format!(
                "link ({}, {}) out of range for {n} agents",
                l.i, l.j
            )));
        }
        b[(l.i, k)] = 1.0;
        b[(l.j, k)] = -1.0;
    }
    Ok(IncidenceMatrix(b))
}

/// `m x 2n` rigidity matrix; the row of link `(i, j)` holds `x_i - x_j` in the
/// block of agent `i` and `x_j - x_i` in the block of agent `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityMatrix(pub DMatrix<f64>);

impl RigidityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn rigidity_matrix(config: &SwarmConfig, links: &LinkSet) -> Result<RigidityMatrix> {
    let n = config.n();
    if n < 2 {
        return Err(Error::invalid("rigidity matrix needs at least two agents"));
    }
    let mut m = DMatrix::zeros(links.len(), 2 * n);
    for (row, l) in links.iter().enumerate() {
        if l.j >= n {
            return Err(Error::invalid(format!("link ({}, {}) out of range", l.i, l.j)));
        }
        let r = config.position(l.i) - config.position(l.j);
        m[(row, 2 * l.i)] = r.x;
        m[(row, 2 * l.i + 1)] = r.y;
        m[(row, 2 * l.j)] = -r.x;
        m[(row, 2 * l.j + 1)] = -r.y;
    }
    Ok(RigidityMatrix(m))
}

/// Number of singular values strictly above `tol` times the largest one.
pub fn numerical_rank(matrix: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("rank tolerance must be positive, got {tol}")));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if matrix.is_empty() {
        return Ok(0);
    }
    let sv = matrix.singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * largest).count())
}

/// Planar infinitesimal rigidity: `rank(M) == 2n - 3`.
pub fn is_infinitesimally_rigid(config: &SwarmConfig, links: &LinkSet, tol: f64) -> Result<bool> {
    let m = rigidity_matrix(config, links)?;
    Ok(numerical_rank(m.matrix(), tol)? == 2 * config.n() - 3)
}

/// True when every pairwise distance of `a` matches that of `b` within `tol`.
pub fn are_congruent(a: &SwarmConfig, b: &SwarmConfig, tol: f64) -> Result<bool> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!(
            "configurations have {} and {} agents",
            a.n(),
            b.n()
        )));
    }
    let n = a.n();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.distance(i, j) - b.distance(i, j)).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{quarter_turn, Point};
    use nalgebra::DVector;
    use proptest::prelude::*;

    const R_A: f64 = 1.366_025_403_784_438_6;

    fn triangle() -> SwarmConfig {
        SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)]).unwrap()
    }

    #[test]
    fn link_at_exact_boundary_is_included() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (R_A, 0.0)]).unwrap();
        let links = compute_links(&c, R_A);
        assert_eq!(links.len(), 1);
        assert_eq!((links.as_slice()[0].i, links.as_slice()[0].j), (0, 1));
    }

    #[test]
    fn no_link_beyond_threshold() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (2.0 * R_A, 0.0)]).unwrap();
        assert!(compute_links(&c, R_A).is_empty());
    }

    #[test]
    fn incidence_of_single_link() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let b = incidence_matrix(&compute_links(&c, R_A), 2).unwrap();
        assert_eq!(b.matrix().as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn incidence_of_triangle_has_zero_column_sums() {
        let b = incidence_matrix(&compute_links(&triangle(), R_A), 3).unwrap();
        assert_eq!(b.matrix().ncols(), 3);
        for col in b.matrix().column_iter() {
            assert_eq!(col.sum(), 0.0);
        }
    }

    #[test]
    fn incidence_of_path_has_rank_two() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap();
        let links = compute_links(&c, R_A);
        assert_eq!(links.len(), 2);
        let b = incidence_matrix(&links, 3).unwrap();
        assert_eq!(numerical_rank(b.matrix(), DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn incidence_rejects_out_of_range() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap();
        let links = compute_links(&c, R_A);
        assert!(matches!(
            incidence_matrix(&links, 2),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn from_pairs_validates() {
        let c = triangle();
        assert!(LinkSet::from_pairs(&c, &[(1, 1)]).is_err());
        assert!(LinkSet::from_pairs(&c, &[(0, 3)]).is_err());
        assert!(LinkSet::from_pairs(&c, &[(0, 1), (1, 0)]).is_err());
        let l = LinkSet::from_pairs(&c, &[(2, 0), (0, 1)]).unwrap();
        assert_eq!((l.as_slice()[0].i, l.as_slice()[0].j), (0, 1));
        assert_eq!((l.as_slice()[1].i, l.as_slice()[1].j), (0, 2));
    }

    #[test]
    fn rigidity_row_of_pair() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let m = rigidity_matrix(&c, &compute_links(&c, R_A)).unwrap();
        assert_eq!(m.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rigidity_needs_two_agents() {
        let c = SwarmConfig::from_xy(&[(0.0, 0.0)]).unwrap();
        assert!(rigidity_matrix(&c, &LinkSet::default()).is_err());
    }

    #[test]
    fn triangle_is_rigid_collinear_is_not() {
        let t = triangle();
        let m = rigidity_matrix(&t, &compute_links(&t, R_A)).unwrap();
        assert_eq!(numerical_rank(m.matrix(), DEFAULT_RANK_TOL).unwrap(), 3);
        assert!(is_infinitesimally_rigid(&t, &compute_links(&t, R_A), DEFAULT_RANK_TOL).unwrap());

        let line = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap();
        let links = compute_links(&line, R_A);
        let m = rigidity_matrix(&line, &links).unwrap();
        assert_eq!(numerical_rank(m.matrix(), DEFAULT_RANK_TOL).unwrap(), 2);
        assert!(!is_infinitesimally_rigid(&line, &links, DEFAULT_RANK_TOL).unwrap());
    }

    #[test]
    fn unit_square_is_flexible() {
        let sq = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap();
        let links = compute_links(&sq, R_A);
        assert_eq!(links.len(), 4);
        let m = rigidity_matrix(&sq, &links).unwrap();
        assert_eq!(numerical_rank(m.matrix(), DEFAULT_RANK_TOL).unwrap(), 4);
        assert!(!is_infinitesimally_rigid(&sq, &links, DEFAULT_RANK_TOL).unwrap());
    }

    #[test]
    fn rank_basics() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-8).unwrap(), 3);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 4), 1e-8).unwrap(), 0);
        let u = DVector::from_vec(vec![0.3, -1.7, 2.2, 0.9]);
        let v = DVector::from_vec(vec![1.1, 0.4, -0.6]);
        assert_eq!(numerical_rank(&(&u * v.transpose()), 1e-8).unwrap(), 1);
        assert!(numerical_rank(&DMatrix::identity(2, 2), 0.0).is_err());
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(numerical_rank(&bad, 1e-8).is_err());
    }

    #[test]
    fn congruence_examples() {
        let t = triangle();
        assert!(are_congruent(&t, &t.translated(Point::new(5.0, -3.0)), 1e-12).unwrap());
        assert!(are_congruent(&t, &t.rotated(std::f64::consts::PI / 6.0, t.center()), 1e-12).unwrap());
        assert!(!are_congruent(&t, &t.scaled(1.5, Point::zeros()), 1e-12).unwrap());
        let two = SwarmConfig::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert!(are_congruent(&t, &two, 1e-12).is_err());
    }

    fn config_strategy(max_n: usize) -> impl Strategy<Value = SwarmConfig> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 2..max_n)
            .prop_map(|pts| SwarmConfig::from_xy(&pts).unwrap())
    }

    proptest! {
        #[test]
        fn links_respect_threshold(c in config_strategy(30)) {
            let links = compute_links(&c, R_A);
            for l in &links {
                prop_assert!(l.i < l.j);
                prop_assert!(l.length <= R_A);
            }
            for w in links.as_slice().windows(2) {
                prop_assert!((w[0].i, w[0].j) < (w[1].i, w[1].j));
            }
        }

        #[test]
        fn incidence_columns_sum_to_zero(c in config_strategy(30)) {
            let links = compute_links(&c, 2.0);
            let b = incidence_matrix(&links, c.n()).unwrap();
            for col in b.matrix().column_iter() {
                prop_assert_eq!(col.sum(), 0.0);
                prop_assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
                prop_assert_eq!(col.iter().filter(|&&v| v == -1.0).count(), 1);
            }
        }

        #[test]
        fn rigidity_blocks_are_opposite(c in config_strategy(20)) {
            let links = compute_links(&c, 2.0);
            let m = rigidity_matrix(&c, &links).unwrap();
            for (row, l) in links.iter().enumerate() {
                for d in 0..2 {
                    prop_assert_eq!(m.matrix()[(row, 2 * l.i + d)], -m.matrix()[(row, 2 * l.j + d)]);
                }
                let total: f64 = m.matrix().row(row).iter().sum();
                prop_assert!(total.abs() < 1e-12);
            }
        }

        #[test]
        fn roto_translations_are_in_kernel(c in config_strategy(20), tx in -1.0..1.0f64, ty in -1.0..1.0f64) {
            let links = compute_links(&c, 2.0);
            let m = rigidity_matrix(&c, &links).unwrap();
            let n = c.n();
            let x_c = c.center();
            let translation = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [tx, ty]));
            let rotation = DVector::from_iterator(
                2 * n,
                c.positions().iter().flat_map(|p| { let q = quarter_turn(p - x_c); [q.x, q.y] }),
            );
            let scale = m.matrix().norm().max(1.0);
            for u in [translation, rotation] {
                let r = m.matrix() * &u;
                prop_assert!(r.norm() <= 1e-10 * scale * u.norm().max(1.0));
            }
        }

        #[test]
        fn rank_invariant_under_permutation_and_scaling(
            rows in 2usize..7, cols in 2usize..7, rank in 1usize..4, seed in any::<u64>(), scale in 0.01..100.0f64
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rank = rank.min(rows).min(cols);
            let a = DMatrix::from_fn(rows, rank, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(rank, cols, |_, _| rng.gen_range(-1.0..1.0));
            let m = &a * &b;
            let base = numerical_rank(&m, 1e-8).unwrap();
            let mut rp: Vec<usize> = (0..rows).collect();
            let mut cp: Vec<usize> = (0..cols).collect();
            rp.reverse();
            cp.rotate_left(1);
            let permuted = DMatrix::from_fn(rows, cols, |r, c| m[(rp[r], cp[c])]);
            prop_assert_eq!(numerical_rank(&permuted, 1e-8).unwrap(), base);
            prop_assert_eq!(numerical_rank(&(&m * scale), 1e-8).unwrap(), base);
            prop_assert_eq!(numerical_rank(&(&m * -scale), 1e-8).unwrap(), base);
        }

        #[test]
        fn congruence_is_reflexive_symmetric_and_motion_invariant(
            c in config_strategy(15), angle in -3.2..3.2f64, tx in -10.0..10.0f64, ty in -10.0..10.0f64
        ) {
            let moved = c.rotated(angle, Point::new(0.3, -0.2)).translated(Point::new(tx, ty));
            prop_assert!(are_congruent(&c, &c, 0.0).unwrap());
            prop_assert!(are_congruent(&c, &moved, 1e-9).unwrap());
            prop_assert!(are_congruent(&moved, &c, 1e-9).unwrap());
        }
    }
}
