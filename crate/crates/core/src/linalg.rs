//! Dense linear-algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const DEFAULT_TOL_RANK: f64 = 1e-10;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn re(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn im(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

/// The standard symplectic matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn symplectic_j(n: usize) -> RMat {
    let mut j = RMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// Orthonormal basis (as columns) of the real null space of `m`.
///
/// Singular values below `tol_rank * sigma_max` count as zero. A zero matrix
/// has the whole space as null space. The basis is canonicalized.
pub fn null_space(m: &RMat, tol_rank: f64) -> RMat {
    null_space_scaled(m, tol_rank, 0.0)
}

/// [`null_space`] with the cutoff `tol_rank * max(sigma_max, scale)`, for
/// matrices that are small parts of something of known size.
pub fn null_space_scaled(m: &RMat, tol_rank: f64, scale: f64) -> RMat {
    let cols = m.ncols();
    if cols == 0 {
        return RMat::zeros(0, 0);
    }
    // pad to at least `cols` rows so that SVD returns a full right factor
    let mut padded = RMat::zeros(m.nrows().max(cols), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max().max(scale);
    if smax <= f64::MIN_POSITIVE {
        return RMat::identity(cols, cols);
    }
    let kept: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol_rank * smax)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if kept.is_empty() {
        return RMat::zeros(cols, 0);
    }
    canonical_basis(&RMat::from_columns(&kept))
}

/// Orthonormal basis of the column span of `m`, with the same rank rule.
pub fn column_span(m: &RMat, tol_rank: f64) -> RMat {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return RMat::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    if smax <= f64::MIN_POSITIVE {
        return RMat::zeros(rows, 0);
    }
    let kept: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > tol_rank * smax)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if kept.is_empty() {
        return RMat::zeros(rows, 0);
    }
    canonical_basis(&RMat::from_columns(&kept))
}

/// Deterministic orthonormal basis of the span of the orthonormal columns `b`.
///
/// Gram-Schmidt over the columns of the projector `b bᵀ`, taken in index
/// order; the result depends only on the subspace, and its triangular factor
/// has a positive diagonal.
pub fn canonical_basis(b: &RMat) -> RMat {
    let dim = b.nrows();
    let rank = b.ncols();
    if rank == 0 {
        return RMat::zeros(dim, 0);
    }
    let p = b * b.transpose();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(rank);
    let mut residuals: Vec<(usize, DVector<f64>)> = Vec::new();
    for i in 0..dim {
        let mut v = p.column(i).into_owned();
        for q in &out {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-3 && out.len() < rank {
            out.push(v / norm);
        } else {
            residuals.push((i, v));
        }
    }
    // near-degenerate fallback: largest remaining residuals
    while out.len() < rank {
        let best = residuals
            .iter()
            .map(|(i, _)| {
                let mut v = p.column(*i).into_owned();
                for q in &out {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                }
                (*i, v)
            })
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()));
        match best {
            Some((_, v)) if v.norm() > 1e-14 => {
                let n = v.norm();
                out.push(v / n);
            }
            _ => break,
        }
    }
    // one re-orthogonalization pass
    for i in 0..out.len() {
        for j in 0..i {
            let c = out[j].dot(&out[i]);
            let qj = out[j].clone();
            out[i].axpy(-c, &qj, 1.0);
        }
        let n = out[i].norm();
        out[i] /= n;
    }
    RMat::from_columns(&out)
}

/// Orthogonal projector onto the span of the orthonormal columns of `b`.
pub fn projector(b: &RMat) -> RMat {
    b * b.transpose()
}

/// Largest principal angle between two subspaces given by orthonormal bases.
/// Subspaces of different dimension are at distance π/2.
pub fn subspace_distance(a: &RMat, b: &RMat) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let dim = a.nrows();
    let comp_a = RMat::identity(dim, dim) - projector(a);
    let comp_b = RMat::identity(dim, dim) - projector(b);
    let s1 = (comp_a * b).svd(false, false).singular_values.max();
    let s2 = (comp_b * a).svd(false, false).singular_values.max();
    s1.max(s2).min(1.0).asin()
}

/// Largest angle by which the columns of `inner` leave the subspace `outer`.
pub fn containment_angle(inner: &RMat, outer: &RMat) -> f64 {
    if inner.ncols() == 0 {
        return 0.0;
    }
    let dim = inner.nrows();
    if outer.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let comp = RMat::identity(dim, dim) - projector(outer);
    (comp * inner).svd(false, false).singular_values.max().min(1.0).asin()
}

/// Intersection of two subspaces given by orthonormal bases.
pub fn intersect(a: &RMat, b: &RMat, tol_rank: f64) -> RMat {
    let dim = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return RMat::zeros(dim, 0);
    }
    let mut stacked = RMat::zeros(dim, a.ncols() + b.ncols());
    stacked.view_mut((0, 0), (dim, a.ncols())).copy_from(a);
    stacked.view_mut((0, a.ncols()), (dim, b.ncols())).copy_from(&(-b));
    let coeffs = null_space(&stacked, tol_rank);
    if coeffs.ncols() == 0 {
        return RMat::zeros(dim, 0);
    }
    let top = coeffs.rows(0, a.ncols()).into_owned();
    column_span(&(a * top), tol_rank)
}

pub fn condition_number(m: &RMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

fn condition_number_c(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpMethod {
    Eigen,
    PadeScaling,
}

/// How a matrix exponential was obtained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpLog {
    pub method: ExpMethod,
    /// Eigenvector condition number, infinite when the Schur route was rejected.
    pub eigen_cond: f64,
    /// Max of the generator-commutation and half-step group residuals.
    pub residual: f64,
}

const EIGEN_COND_LIMIT: f64 = 1e8;
const EXPM_RESIDUAL_LIMIT: f64 = 1e-10;

/// Matrix exponential with method selection and a recorded residual.
pub fn expm(a: &CMat) -> (CMat, ExpLog) {
    let n = a.nrows();
    if n == 0 {
        let log = ExpLog {
            method: ExpMethod::Eigen,
            eigen_cond: 1.0,
            residual: 0.0,
        };
        return (a.clone(), log);
    }
    if a.norm() == 0.0 {
        let log = ExpLog {
            method: ExpMethod::Eigen,
            eigen_cond: 1.0,
            residual: 0.0,
        };
        return (CMat::identity(n, n), log);
    }
    if let Some((e, cond)) = expm_eigen(a) {
        let half = expm_eigen(&a.scale(0.5)).map(|(h, _)| h);
        let residual = expm_residual(a, &e, half.as_ref());
        if residual <= EXPM_RESIDUAL_LIMIT {
            let log = ExpLog {
                method: ExpMethod::Eigen,
                eigen_cond: cond,
                residual,
            };
            return (e, log);
        }
    }
    let e = expm_pade(a);
    let half = expm_pade(&a.scale(0.5));
    let residual = expm_residual(a, &e, Some(&half));
    let log = ExpLog {
        method: ExpMethod::PadeScaling,
        eigen_cond: f64::INFINITY,
        residual,
    };
    (e, log)
}

fn expm_residual(a: &CMat, e: &CMat, half: Option<&CMat>) -> f64 {
    let scale = a.norm() * e.norm();
    let comm = (a * e - e * a).norm() / scale.max(f64::MIN_POSITIVE);
    let group = half
        .map(|h| (h * h - e).norm() / e.norm().max(f64::MIN_POSITIVE))
        .unwrap_or(0.0);
    comm.max(group)
}

/// `V diag(e^λ) V⁻¹` from the complex Schur form; `None` when the
/// eigenvector matrix is too ill-conditioned.
fn expm_eigen(a: &CMat) -> Option<(CMat, f64)> {
    let n = a.nrows();
    let (z, t) = Schur::try_new(a.clone(), f64::EPSILON, 10_000)?.unpack();
    let small = f64::EPSILON * t.norm().max(1.0);
    let mut vt = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        vt[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * vt[(j, k)];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            vt[(i, k)] = -acc / den;
        }
    }
    let mut v = z * vt;
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return None;
        }
        col /= C64::new(nrm, 0.0);
    }
    let cond = condition_number_c(&v);
    if !(cond < EIGEN_COND_LIMIT) {
        return None;
    }
    let lu = v.clone().lu();
    let mut d = CMat::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = t[(k, k)].exp();
    }
    let vinv = lu.try_inverse()?;
    Some((&v * d * vinv, cond))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Scaling and squaring with the degree-13 Padé approximant.
pub fn expm_pade(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(squarings));
    let id = CMat::identity(n, n);
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a * (inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is invertible");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
