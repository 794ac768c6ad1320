//! Linearization of the link-based closed loop
//! `x' = ((B H B^T) (x) I_2) x`, with `H = diag(f(|r_k|) / |r_k|)`, and
//! classification of its spectrum against the rigidity matrix.
//!
//! The Jacobian splits as `J = J1 + J2`. `J2 = (B H B^T) (x) I_2` vanishes at
//! every configuration whose links all have length `R`. `J1` collects the
//! derivative of `H`: slice `k` of `dH/dx` is diagonal with entries
//! `[f'(|r_i|)|r_i| - f(|r_i|)] |r_i|^-3 M[i, k]`, and column `k` of `J1` is
//! `(B (dH/dx)_k B^T (x) I_2) x`. Only the four columns touched by each link
//! are non-zero, so the tensor is never materialized.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quarter_turn, SwarmConfig};
use crate::graph::{compute_links, incidence_matrix, LinkSet, RigidityMatrix};
use crate::interaction::InteractionFunction;

/// Default zero-eigenvalue threshold, relative to the spectral radius.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// The two terms of the closed-loop Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub j1: DMatrix<f64>,
    pub j2: DMatrix<f64>,
}

impl Jacobian {
    pub fn total(&self) -> DMatrix<f64> {
        &self.j1 + &self.j2
    }
}

/// Jacobian of the link-based closed loop at `config`, links taken at range `r_a`.
pub fn jacobian(config: &SwarmConfig, f: &InteractionFunction, r_a: f64) -> Result<Jacobian> {
    let links = compute_links(config, r_a);
    jacobian_for_links(config, &links, f)
}

/// As [`jacobian`], with an explicit link set.
pub fn jacobian_for_links(config: &SwarmConfig, links: &LinkSet, f: &InteractionFunction) -> Result<Jacobian> {
    let n = config.n();
    let dim = 2 * n;
    let b = incidence_matrix(links, n)?;
    let mut h = DVector::zeros(links.len());
    let mut dh = Vec::with_capacity(links.len());
    for (k, l) in links.iter().enumerate() {
        let z = l.length;
        if z == 0.0 {
            return Err(Error::SingularLink { link: k, i: l.i, j: l.j });
        }
        let fz = f.force(z);
        h[k] = fz / z;
        dh.push((f.derivative(z) * z - fz) / (z * z * z));
    }

    // J2 = (B H B^T) (x) I_2.
    let bhbt = b.matrix() * DMatrix::from_diagonal(&h) * b.matrix().transpose();
    let mut j2 = DMatrix::zeros(dim, dim);
    for r in 0..n {
        for c in 0..n {
            let v = bhbt[(r, c)];
            if v != 0.0 {
                j2[(2 * r, 2 * c)] = v;
                j2[(2 * r + 1, 2 * c + 1)] = v;
            }
        }
    }

    // J1 column k = sum_i dh_i M[i, k] (b_i (x) r_i), since (b_i b_i^T (x) I_2) x = b_i (x) r_i.
    let mut j1 = DMatrix::zeros(dim, dim);
    for (k, l) in links.iter().enumerate() {
        let r = config.position(l.i) - config.position(l.j);
        let m_row = [(2 * l.i, r.x), (2 * l.i + 1, r.y), (2 * l.j, -r.x), (2 * l.j + 1, -r.y)];
        for &(col, m_entry) in &m_row {
            let w = dh[k] * m_entry;
            if w == 0.0 {
                continue;
            }
            j1[(2 * l.i, col)] += w * r.x;
            j1[(2 * l.i + 1, col)] += w * r.y;
            j1[(2 * l.j, col)] -= w * r.x;
            j1[(2 * l.j + 1, col)] -= w * r.y;
        }
    }
    Ok(Jacobian { j1, j2 })
}

/// Orthonormal basis of infinitesimal rigid motions: x-translation,
/// y-translation and rotation about the center.
pub fn rigid_motion_basis(config: &SwarmConfig) -> Result<[DVector<f64>; 3]> {
    let n = config.n();
    if n < 2 {
        return Err(Error::invalid("rigid motions need at least two agents"));
    }
    let x_c = config.center();
    let tx = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [1.0, 0.0]));
    let ty = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [0.0, 1.0]));
    let rot = DVector::from_iterator(
        2 * n,
        config.positions().iter().flat_map(|p| {
            let q = quarter_turn(p - x_c);
            [q.x, q.y]
        }),
    );
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(3);
    for mut v in [tx, ty, rot] {
        for b in &basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::invalid("all agents coincide; rotation field vanishes"));
        }
        basis.push(v / norm);
    }
    Ok([basis[0].clone(), basis[1].clone(), basis[2].clone()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// `[re, im]`, sorted by real part descending.
    pub eigenvalues: Vec<[f64; 2]>,
    pub zero_count: usize,
    pub negative_count: usize,
    pub unclassified_count: usize,
    /// Every zero-eigenvector lies in `ker(M)`.
    pub kernel_aligned: bool,
    pub max_kernel_residual: f64,
    /// Every eigenvector of a negative eigenvalue lies outside `ker(M)`.
    pub stable_outside_kernel: bool,
    pub min_stable_residual: Option<f64>,
    /// Largest real part among eigenvalues not classified as zero.
    pub max_real_nonzero_eig: Option<f64>,
    pub spectral_radius: f64,
    pub tol_zero: f64,
    /// Absolute thresholds actually applied.
    pub zero_threshold: f64,
    pub kernel_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralAnalysis {
    pub report: SpectrumReport,
    /// Orthonormal basis (columns) of the zero-eigenspace.
    pub zero_space: DMatrix<f64>,
    /// Unit eigenvectors of the negative eigenvalues, with their eigenvalues.
    pub stable_modes: Vec<(Complex64, DVector<Complex64>)>,
}

/// Diagonal blocks `(start, size)` of a real quasi-triangular Schur form.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn block_eigenvalues(t: &DMatrix<f64>, (p, s): (usize, usize)) -> Vec<Complex64> {
    if s == 1 {
        return vec![Complex64::new(t[(p, p)], 0.0)];
    }
    let (a, b, c, d) = (t[(p, p)], t[(p, p + 1)], t[(p + 1, p)], t[(p + 1, p + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    let root = Complex64::new(disc, 0.0).sqrt();
    vec![half_tr + root, half_tr - root]
}

/// Eigenvector of the quasi-triangular `t` for `lambda` belonging to block
/// `blocks[idx]`, by back-substitution. Tiny pivots are replaced by `smin`.
fn schur_eigenvector(t: &DMatrix<f64>, blocks: &[(usize, usize)], idx: usize, lambda: Complex64) -> DVector<Complex64> {
    let n = t.nrows();
    let smin = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);
    let clamp = |z: Complex64| if z.norm() < smin { Complex64::new(smin, 0.0) } else { z };
    let mut y = DVector::from_element(n, Complex64::new(0.0, 0.0));
    let (p, s) = blocks[idx];
    if s == 1 {
        y[p] = Complex64::new(1.0, 0.0);
    } else {
        let a = t[(p, p)] - lambda;
        let b = Complex64::new(t[(p, p + 1)], 0.0);
        let c = Complex64::new(t[(p + 1, p)], 0.0);
        let d = t[(p + 1, p + 1)] - lambda;
        if a.norm() + b.norm() >= c.norm() + d.norm() {
            y[p] = b;
            y[p + 1] = -a;
        } else {
            y[p] = d;
            y[p + 1] = -c;
        }
    }
    let end = p + s;
    for &(q, sz) in blocks[..idx].iter().rev() {
        let rhs = |row: usize, y: &DVector<Complex64>| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (q + sz)..end {
                acc += t[(row, j)] * y[j];
            }
            -acc
        };
        if sz == 1 {
            let r = rhs(q, &y);
            y[q] = r / clamp(t[(q, q)] - lambda);
        } else {
            let (r0, r1) = (rhs(q, &y), rhs(q + 1, &y));
            let a = t[(q, q)] - lambda;
            let b = Complex64::new(t[(q, q + 1)], 0.0);
            let c = Complex64::new(t[(q + 1, q)], 0.0);
            let d = t[(q + 1, q + 1)] - lambda;
            let det = clamp(a * d - b * c);
            y[q] = (r0 * d - b * r1) / det;
            y[q + 1] = (a * r1 - c * r0) / det;
        }
        let big = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if big > 1e100 {
            y.unscale_mut(big);
        }
    }
    y
}

/// Eigen-decomposition of `j` (dense, non-symmetric) and classification of
/// the spectrum: zero eigenvalues (`|lambda| <= tol_zero * rho(J)`), stable
/// ones (`Re lambda < -tol_zero * rho(J)`) and the rest. Zero-eigenvectors are
/// taken as an orthonormal basis of the numerical kernel of `J`, eigenvectors
/// of the stable eigenvalues from the real Schur form.
pub fn spectral_analysis(j: &DMatrix<f64>, m: &RigidityMatrix, tol_zero: f64) -> Result<SpectralAnalysis> {
    let dim = j.nrows();
    if j.ncols() != dim {
        return Err(Error::invalid("Jacobian must be square"));
    }
    if m.matrix().ncols() != dim {
        return Err(Error::invalid(format!(
            "rigidity matrix has {} columns, Jacobian has dimension {dim}",
            m.matrix().ncols()
        )));
    }
    if !(tol_zero > 0.0) {
        return Err(Error::invalid("tol_zero must be positive"));
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("Jacobian has non-finite entries:\n{j}")));
    }

    // The Schur routine divides by the largest entry, so the zero matrix is
    // handled directly.
    let (q, t) = if j.iter().all(|&v| v == 0.0) {
        (DMatrix::identity(dim, dim), DMatrix::zeros(dim, dim))
    } else {
        nalgebra::linalg::Schur::try_new(j.clone(), f64::EPSILON, 100 * dim.max(1))
            .ok_or_else(|| Error::Numerical(format!("Schur decomposition did not converge for matrix:\n{j}")))?
            .unpack()
    };
    let blocks = schur_blocks(&t);

    let mut eig: Vec<(Complex64, usize)> = Vec::with_capacity(dim);
    for (bi, &blk) in blocks.iter().enumerate() {
        for lambda in block_eigenvalues(&t, blk) {
            eig.push((lambda, bi));
        }
    }
    eig.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));

    let spectral_radius = eig.iter().map(|(l, _)| l.norm()).fold(0.0, f64::max);
    let zero_threshold = tol_zero * spectral_radius;
    let is_zero = |l: &Complex64| l.norm() <= zero_threshold;
    let zero_count = eig.iter().filter(|(l, _)| is_zero(l)).count();
    let negative_count = eig.iter().filter(|(l, _)| !is_zero(l) && l.re < -zero_threshold).count();
    let max_real_nonzero_eig = eig.iter().filter(|(l, _)| !is_zero(l)).map(|(l, _)| l.re).reduce(f64::max);

    let m_mat = m.matrix();
    let kernel_threshold = tol_zero * m_mat.norm();

    // Zero-eigenspace: right singular vectors of the smallest singular values.
    let zero_space = if zero_count == 0 {
        DMatrix::zeros(dim, 0)
    } else {
        let svd = j.clone().svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let cols: Vec<DVector<f64>> = order[..zero_count].iter().map(|&k| v_t.row(k).transpose()).collect();
        DMatrix::from_columns(&cols)
    };
    let kernel_residuals: Vec<f64> = zero_space.column_iter().map(|w| (m_mat * w).norm() / w.norm()).collect();
    let max_kernel_residual = kernel_residuals.iter().copied().fold(0.0, f64::max);
    let kernel_aligned = kernel_residuals.iter().all(|&r| r <= kernel_threshold);

    let q_c = q.map(|v| Complex64::new(v, 0.0));
    let m_c = m_mat.map(|v| Complex64::new(v, 0.0));
    let mut stable_modes = Vec::with_capacity(negative_count);
    let mut min_stable_residual: Option<f64> = None;
    for &(lambda, bi) in eig.iter().filter(|(l, _)| !is_zero(l) && l.re < -zero_threshold) {
        let y = schur_eigenvector(&t, &blocks, bi, lambda);
        let mut w = &q_c * y;
        let norm = w.norm();
        w.unscale_mut(norm);
        let residual = (&m_c * &w).norm();
        min_stable_residual = Some(min_stable_residual.map_or(residual, |r: f64| r.min(residual)));
        stable_modes.push((lambda, w));
    }
    let stable_outside_kernel = min_stable_residual.map_or(true, |r| r > kernel_threshold);

    Ok(SpectralAnalysis {
        report: SpectrumReport {
            eigenvalues: eig.iter().map(|(l, _)| [l.re, l.im]).collect(),
            zero_count,
            negative_count,
            unclassified_count: dim - zero_count - negative_count,
            kernel_aligned,
            max_kernel_residual,
            stable_outside_kernel,
            min_stable_residual,
            max_real_nonzero_eig,
            spectral_radius,
            tol_zero,
            zero_threshold,
            kernel_threshold,
        },
        zero_space,
        stable_modes,
    })
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns (`a` spanning the reference subspace).
pub fn max_principal_angle_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if b.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.transpose() * b);
    residual.singular_values().iter().copied().fold(0.0, f64::max)
}
