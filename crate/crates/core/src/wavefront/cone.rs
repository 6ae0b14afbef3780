//! Convex polyhedral cones `pos(gens) + span(W)` with an angular thickening.
//!
//! Every atom kind reduces to such cones; the set rules act on them exactly
//! and carry the radius along as a tolerance.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};

const GEN_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-10;
const MAX_RADIUS: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone)]
pub struct Cone {
    pub span: RMat,
    pub gens: Vec<DVector<f64>>,
    pub radius: f64,
}

impl Cone {
    pub fn trivial(dim: usize) -> Self {
        Self {
            span: RMat::zeros(dim, 0),
            gens: Vec::new(),
            radius: 0.0,
        }
    }

    pub fn ray(dir: DVector<f64>, radius: f64) -> Self {
        let dim = dir.len();
        Self::from_parts(&RMat::zeros(dim, 0), vec![dir], radius)
    }

    pub fn subspace(basis: &RMat) -> Self {
        Self::from_parts(basis, Vec::new(), 0.0)
    }

    /// Canonical cone from arbitrary spanning columns and generators: the span
    /// is orthonormalized, generators are projected off it and normalized,
    /// lines hidden among generators move into the span, redundant generators
    /// are dropped.
    pub fn from_parts(span_cols: &RMat, gens: Vec<DVector<f64>>, radius: f64) -> Self {
        let dim = span_cols.nrows().max(gens.first().map_or(0, |g| g.len()));
        let live: Vec<DVector<f64>> = span_cols
            .column_iter()
            .filter(|c| c.norm() > GEN_TOL)
            .map(|c| c.into_owned())
            .collect();
        let mut span = if live.is_empty() {
            RMat::zeros(dim, 0)
        } else {
            linalg::column_span(&RMat::from_columns(&live), GEN_TOL)
        };
        let scale = gens.iter().map(|g| g.norm()).fold(0.0, f64::max).max(1.0);
        let mut gens: Vec<DVector<f64>> = gens
            .into_iter()
            .filter(|g| g.norm() > GEN_TOL * scale)
            .map(|g| g.normalize())
            .collect();
        loop {
            gens = project_off(&span, gens);
            let mut moved = None;
            for i in 0..gens.len() {
                let neg = -&gens[i];
                let others: Vec<DVector<f64>> = gens
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, g)| g.clone())
                    .collect();
                if angle_to_parts(&neg, &span, &others) < 1e-9 {
                    moved = Some(i);
                    break;
                }
            }
            match moved {
                Some(i) => {
                    let g = gens.remove(i);
                    let mut cols: Vec<DVector<f64>> = span.column_iter().map(|c| c.into_owned()).collect();
                    cols.push(g);
                    span = linalg::column_span(&RMat::from_columns(&cols), GEN_TOL);
                }
                None => break,
            }
        }
        // drop generators inside the cone of the others
        let mut i = 0;
        while i < gens.len() {
            let others: Vec<DVector<f64>> = gens
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, g)| g.clone())
                .collect();
            if angle_to_parts(&gens[i], &span, &others) < 1e-9 {
                gens.remove(i);
            } else {
                i += 1;
            }
        }
        gens.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self { span, gens, radius }
    }

    pub fn dim(&self) -> usize {
        self.span.nrows()
    }

    pub fn is_trivial(&self) -> bool {
        self.span.ncols() == 0 && self.gens.is_empty()
    }

    pub fn is_subspace(&self) -> bool {
        self.gens.is_empty() && self.radius == 0.0
    }

    pub fn is_single_ray(&self) -> bool {
        self.span.ncols() == 0 && self.gens.len() == 1
    }

    /// Angle from `x` to the core cone; infinite for the trivial cone.
    pub fn angle_to(&self, x: &DVector<f64>) -> f64 {
        angle_to_parts(x, &self.span, &self.gens)
    }

    /// Orthonormal basis of the linear hull of the core.
    pub fn hull(&self) -> RMat {
        let mut cols: Vec<DVector<f64>> = self.span.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(self.gens.iter().cloned());
        if cols.is_empty() {
            return RMat::zeros(self.dim(), 0);
        }
        linalg::column_span(&RMat::from_columns(&cols), GEN_TOL)
    }

    /// Columns `[gens | span]`, the parametrization used by the section routine.
    fn param_matrix(&self) -> RMat {
        let mut cols: Vec<DVector<f64>> = self.gens.clone();
        cols.extend(self.span.column_iter().map(|c| c.into_owned()));
        if cols.is_empty() {
            RMat::zeros(self.dim(), 0)
        } else {
            RMat::from_columns(&cols)
        }
    }

    /// Image under a linear map. The radius grows by `‖m‖ / σ_min(m|hull)`,
    /// a first-order bound on angular distortion near the core, unless an
    /// explicit factor is given.
    pub fn map(&self, m: &RMat, factor: Option<f64>) -> Result<Cone> {
        let out_dim = m.nrows();
        let span_cols = if self.span.ncols() > 0 {
            m * &self.span
        } else {
            RMat::zeros(out_dim, 0)
        };
        let gens: Vec<DVector<f64>> = self.gens.iter().map(|g| m * g).collect();
        let radius = if self.radius > 0.0 {
            let kappa = factor.unwrap_or_else(|| distortion(m, &self.hull()));
            let r = self.radius * kappa;
            if !(r <= MAX_RADIUS) {
                return Err(Error::FanRadius(r));
            }
            r
        } else {
            0.0
        };
        let mut out = Cone::from_parts(&span_cols, gens, radius);
        if out.span.nrows() != out_dim {
            out = Cone::trivial(out_dim);
        }
        Ok(out)
    }

    /// `self ∩ H` for a subspace with orthonormal basis `h`.
    ///
    /// A single thickened ray within its radius of `H` is replaced by its
    /// orthogonal projection onto `H`; the angle from any point of `H` to the
    /// projected ray never exceeds the angle to the original one.
    pub fn intersect_subspace(&self, h: &RMat, ang_tol: f64) -> Cone {
        let dim = self.dim();
        if self.is_trivial() || h.ncols() == 0 {
            return Cone::trivial(dim);
        }
        if self.is_single_ray() {
            let g = &self.gens[0];
            let p = h * (h.transpose() * g);
            let angle = angle_between(g, &p);
            if angle <= self.radius + ang_tol && p.norm() > 0.0 {
                return Cone::ray(p.normalize(), self.radius);
            }
            return Cone::trivial(dim);
        }
        let a = self.param_matrix();
        let comp = RMat::identity(dim, dim) - linalg::projector(h);
        let eq = &comp * &a;
        let nonneg: Vec<usize> = (0..self.gens.len()).collect();
        let (span, gens) = section(&eq, &nonneg, &a);
        Cone::from_parts(&span, gens, self.radius)
    }

    /// `self ∩ other` on the cores; the larger radius is kept.
    pub fn intersect(&self, other: &Cone) -> Cone {
        let dim = self.dim();
        if self.is_trivial() || other.is_trivial() {
            return Cone::trivial(dim);
        }
        let a = self.param_matrix();
        let b = other.param_matrix();
        let (ka, kb) = (self.gens.len(), other.gens.len());
        let vars = a.ncols() + b.ncols();
        let mut eq = RMat::zeros(dim, vars);
        eq.view_mut((0, 0), (dim, a.ncols())).copy_from(&a);
        eq.view_mut((0, a.ncols()), (dim, b.ncols())).copy_from(&(-&b));
        let mut image = RMat::zeros(dim, vars);
        image.view_mut((0, 0), (dim, a.ncols())).copy_from(&a);
        let mut nonneg: Vec<usize> = (0..ka).collect();
        nonneg.extend(a.ncols()..a.ncols() + kb);
        let (span, gens) = section(&eq, &nonneg, &image);
        Cone::from_parts(&span, gens, self.radius.max(other.radius))
    }

    /// Random nonzero points of the core.
    pub fn sample<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<DVector<f64>> {
        if self.is_trivial() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut v = DVector::zeros(self.dim());
            for col in self.span.column_iter() {
                v += col * rng.gen_range(-1.0..1.0);
            }
            for g in &self.gens {
                v += g * rng.gen_range(0.0..1.0);
            }
            if v.norm() > 1e-6 {
                out.push(v.normalize());
            }
        }
        out
    }
}

fn project_off(span: &RMat, gens: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for g in gens {
        let p = if span.ncols() > 0 {
            &g - span * (span.transpose() * &g)
        } else {
            g
        };
        if p.norm() > GEN_TOL {
            let p = p.normalize();
            if !out.iter().any(|q| (q - &p).norm() < 1e-12) {
                out.push(p);
            }
        }
    }
    out
}

pub fn angle_between(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return f64::INFINITY;
    }
    let (ua, ub) = (a / na, b / nb);
    // atan2 keeps small angles accurate
    let perp = (&ua - &ub * ua.dot(&ub)).norm();
    perp.atan2(ua.dot(&ub))
}

fn angle_to_parts(x: &DVector<f64>, span: &RMat, gens: &[DVector<f64>]) -> f64 {
    if span.ncols() == 0 && gens.is_empty() {
        return f64::INFINITY;
    }
    let xn = x.norm();
    if xn == 0.0 {
        return f64::INFINITY;
    }
    let x = x / xn;
    let in_span = if span.ncols() > 0 {
        span * (span.transpose() * &x)
    } else {
        DVector::zeros(x.len())
    };
    let rest = &x - &in_span;
    let proj_rest = if gens.is_empty() {
        DVector::zeros(x.len())
    } else {
        let perp: Vec<DVector<f64>> = gens
            .iter()
            .map(|g| {
                if span.ncols() > 0 {
                    g - span * (span.transpose() * g)
                } else {
                    g.clone()
                }
            })
            .collect();
        let a = RMat::from_columns(&perp);
        let c = nnls(&a, &rest);
        a * c
    };
    let p = in_span + proj_rest;
    let dist = (&x - &p).norm();
    if p.norm() < 1e-300 {
        // projection onto the cone is the origin: the angle is at least π/2
        return std::f64::consts::FRAC_PI_2 + (-(x.dot(&p))).max(0.0);
    }
    dist.atan2(p.norm())
}

/// Nonnegative least squares `min ‖A c − b‖, c ≥ 0` (Lawson-Hanson).
pub fn nnls(a: &RMat, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let mut c = DVector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-14 * (a.norm() * b.norm()).max(1.0);
    for _outer in 0..(3 * k + 3) {
        let w = a.transpose() * (b - a * &c);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _inner in 0..(3 * k + 3) {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = RMat::from_columns(&idx.iter().map(|&i| a.column(i).into_owned()).collect::<Vec<_>>());
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            if z_sub.iter().all(|&v| v > 0.0) {
                c.fill(0.0);
                for (p, &i) in idx.iter().enumerate() {
                    c[i] = z_sub[p];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (p, &i) in idx.iter().enumerate() {
                if z_sub[p] <= 0.0 {
                    let den = c[i] - z_sub[p];
                    if den > 0.0 {
                        alpha = alpha.min(c[i] / den);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (p, &i) in idx.iter().enumerate() {
                c[i] += alpha * (z_sub[p] - c[i]);
            }
            for &i in &idx {
                if c[i] <= 1e-15 {
                    c[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    c
}

/// Image under `image` of the polyhedral cone `{z : eq z = 0, z_i ≥ 0 (i ∈ nonneg)}`,
/// returned as spanning columns of the lineality part and extreme-ray images.
pub fn section(eq: &RMat, nonneg: &[usize], image: &RMat) -> (RMat, Vec<DVector<f64>>) {
    let dim = image.nrows();
    let vars = image.ncols();
    if vars == 0 {
        return (RMat::zeros(dim, 0), Vec::new());
    }
    let z = if eq.nrows() == 0 {
        RMat::identity(vars, vars)
    } else {
        null_space_abs(eq)
    };
    let r = z.ncols();
    if r == 0 {
        return (RMat::zeros(dim, 0), Vec::new());
    }
    if nonneg.is_empty() {
        return (image * z, Vec::new());
    }
    let c = RMat::from_rows(&nonneg.iter().map(|&i| z.row(i).into_owned()).collect::<Vec<_>>());
    let lineality = null_space_abs(&c);
    let complement = if lineality.ncols() == 0 {
        RMat::identity(r, r)
    } else if lineality.ncols() == r {
        RMat::zeros(r, 0)
    } else {
        null_space_abs(&lineality.transpose())
    };
    let span_cols = if lineality.ncols() > 0 {
        image * &z * &lineality
    } else {
        RMat::zeros(dim, 0)
    };
    let rp = complement.ncols();
    let cm = &c * &complement;
    let scale = cm.norm().max(1.0);
    let feasible = |u: &DVector<f64>| (&cm * u).iter().all(|&v| v >= -FEAS_TOL * scale * u.norm());
    let mut rays: Vec<DVector<f64>> = Vec::new();
    let push = |u: DVector<f64>, rays: &mut Vec<DVector<f64>>| {
        let u = u.normalize();
        if !rays.iter().any(|v| (v - &u).norm() < 1e-9) {
            rays.push(u);
        }
    };
    if rp == 1 {
        for s in [1.0, -1.0] {
            let u = DVector::from_element(1, s);
            if feasible(&u) {
                push(u, &mut rays);
            }
        }
    } else if rp > 1 {
        for rows in combinations(cm.nrows(), rp - 1) {
            let sub = RMat::from_rows(&rows.iter().map(|&i| cm.row(i).into_owned()).collect::<Vec<_>>());
            let ns = null_space_abs(&sub);
            if ns.ncols() != 1 {
                continue;
            }
            let u = ns.column(0).into_owned();
            for s in [1.0, -1.0] {
                let v = &u * s;
                if feasible(&v) {
                    push(v, &mut rays);
                }
            }
        }
    }
    let base = image * &z * &complement;
    let gens = rays.into_iter().map(|u| &base * u).collect();
    (span_cols, gens)
}

/// Null space with an absolute singular-value cutoff; the section routine
/// works on unit-scale columns, where roundoff-level matrices must count as zero.
fn null_space_abs(m: &RMat) -> RMat {
    let cols = m.ncols();
    if cols == 0 {
        return RMat::zeros(0, 0);
    }
    let mut padded = RMat::zeros(m.nrows().max(cols), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let kept: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= GEN_TOL)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if kept.is_empty() {
        RMat::zeros(cols, 0)
    } else {
        linalg::canonical_basis(&RMat::from_columns(&kept))
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// `‖m‖ / σ_min(m · hull)`; infinite when `m` kills part of the hull.
pub fn distortion(m: &RMat, hull: &RMat) -> f64 {
    if hull.ncols() == 0 {
        return 1.0;
    }
    let top = m.clone().svd(false, false).singular_values.max();
    let restricted = (m * hull).svd(false, false).singular_values;
    let low = restricted.min();
    if low <= GEN_TOL * top {
        f64::INFINITY
    } else {
        top / low
    }
}
