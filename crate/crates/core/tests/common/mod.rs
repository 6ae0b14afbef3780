#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Brute-force oracles for the conic set rules: every rule is restated
//! pointwise on parametrized atoms and checked in both directions against the
//! library's output by sampling.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use isowf::wavefront::{integrate_out, kernel_compose, pullback, tensor, ConicAtom, ConicSet};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Points `B c` (all `c`) or `λ d` (`λ ≥ 0`) with an angular thickening.
#[derive(Debug, Clone)]
pub enum Piece {
    Span(Mat),
    Ray(Vector, f64),
}

impl Piece {
    pub fn dim(&self) -> usize {
        match self {
            Piece::Span(b) => b.nrows(),
            Piece::Ray(d, _) => d.len(),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Piece::Span(_) => 0.0,
            Piece::Ray(_, r) => *r,
        }
    }

    fn columns(&self) -> Mat {
        match self {
            Piece::Span(b) => b.clone(),
            Piece::Ray(d, _) => Mat::from_column_slice(d.len(), 1, d.as_slice()),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        match self {
            Piece::Span(b) => b * Vector::from_fn(b.ncols(), |_, _| rng.gen_range(-1.0..1.0)),
            Piece::Ray(d, _) => d * rng.gen_range(0.1..1.0),
        }
    }
}

pub fn pieces(set: &ConicSet) -> Vec<Piece> {
    set.atoms()
        .iter()
        .flat_map(|a| match a {
            ConicAtom::Subspace { basis } => vec![Piece::Span(basis.clone())],
            ConicAtom::Fan { dirs, radius } => dirs.iter().map(|d| Piece::Ray(d.clone(), *radius)).collect(),
            ConicAtom::Sector { .. } => panic!("oracle inputs carry no sectors"),
        })
        .collect()
}

pub fn orthonormal(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left factor");
    let rank = svd.singular_values.iter().filter(|s| **s > 1e-9).count();
    u.columns(0, rank).into_owned()
}

pub fn null_space(m: &Mat) -> Mat {
    let cols = m.ncols();
    let mut padded = Mat::zeros(m.nrows().max(cols), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right factor");
    let smax = svd.singular_values.max().max(1.0);
    let kept: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= 1e-10 * smax)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if kept.is_empty() {
        Mat::zeros(cols, 0)
    } else {
        Mat::from_columns(&kept)
    }
}

fn hstack(parts: &[&Mat]) -> Mat {
    let rows = parts.iter().map(|p| p.nrows()).max().unwrap_or(0);
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.view_mut((0, at), (p.nrows(), p.ncols())).copy_from(*p);
        at += p.ncols();
    }
    out
}

fn angle(a: &Vector, b: &Vector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Least squares `min |A u − y|` with `u[0] ≥ 0` when `first_nonneg`; returns
/// the angle between `y` and the best `A u`.
fn best_angle(a: &Mat, y: &Vector, first_nonneg: bool) -> f64 {
    if a.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let solve = |m: &Mat| -> Vector { m.clone().svd(true, true).solve(y, 1e-12).expect("svd solve") };
    let u = solve(a);
    let fit = if first_nonneg && u[0] < 0.0 {
        let rest = a.columns(1, a.ncols() - 1).into_owned();
        if rest.ncols() == 0 {
            Vector::zeros(y.len())
        } else {
            &rest * solve(&rest)
        }
    } else {
        a * u
    };
    if fit.norm() <= 1e-12 * y.norm() {
        return std::f64::consts::FRAC_PI_2;
    }
    let res = (y - &fit).norm() / y.norm();
    res.min(1.0).asin()
}

/// Angle from `y` to `{P u + extra w}` over the piece parameters `u` (ray
/// coefficient nonnegative) and free `w`.
fn witness_angle(piece: &Piece, lift: &Mat, extra: &Mat, y: &Vector) -> f64 {
    let cols = lift * piece.columns();
    let a = hstack(&[&cols, extra]);
    best_angle(&a, y, matches!(piece, Piece::Ray(..)))
}

pub fn coordinate_rows(dim: usize, idx: &[usize]) -> Mat {
    let mut m = Mat::zeros(idx.len(), dim);
    for (r, &i) in idx.iter().enumerate() {
        m[(r, i)] = 1.0;
    }
    m
}

/// Summary of one oracle comparison.
#[derive(Debug, Default, Clone)]
pub struct Agreement {
    pub checked_points: usize,
    pub worst_sound: f64,
    pub worst_complete: f64,
    pub failures: Vec<String>,
}

impl Agreement {
    fn sound(&mut self, excess: f64, tol: f64, what: &str) {
        self.checked_points += 1;
        self.worst_sound = self.worst_sound.max(excess);
        if excess > tol {
            self.failures
                .push(format!("{what}: oracle point outside result by {excess:.3e}"));
        }
    }

    fn complete(&mut self, angle: f64, tol: f64, what: &str) {
        self.checked_points += 1;
        self.worst_complete = self.worst_complete.max(angle);
        if angle > tol {
            self.failures
                .push(format!("{what}: result point without witness, angle {angle:.3e}"));
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn tolerance(inputs: &[&[Piece]]) -> f64 {
    let r = inputs
        .iter()
        .flat_map(|ps| ps.iter().map(Piece::radius))
        .fold(0.0, f64::max);
    if r == 0.0 {
        1e-8
    } else {
        r + 1e-6
    }
}

// ---------- random families ----------

pub fn random_subspace<R: Rng>(rng: &mut R, dim: usize, k: usize) -> Mat {
    orthonormal(&Mat::from_fn(dim, k, |_, _| rng.gen_range(-1.0..1.0)))
}

pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 0.2 {
            return v.normalize();
        }
    }
}

/// A set of at most `max_atoms` atoms: subspaces of dimension below `dim`
/// and fans whose directions come from `ray`.
pub fn random_set<R: Rng, F: FnMut(&mut R) -> Vector>(
    rng: &mut R,
    dim: usize,
    max_atoms: usize,
    max_sub_dim: usize,
    mut ray: F,
) -> ConicSet {
    let count = rng.gen_range(0..=max_atoms);
    let mut atoms = Vec::new();
    for _ in 0..count {
        if rng.gen_bool(0.5) {
            let k = rng.gen_range(1..=max_sub_dim.min(dim - 1).max(1));
            atoms.push(ConicAtom::subspace(random_subspace(rng, dim, k)).unwrap());
        } else {
            let radius = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..0.02)
            };
            atoms.push(ConicAtom::fan(vec![ray(rng)], radius).unwrap());
        }
    }
    ConicSet::new(dim, atoms, Some(rng.gen_range(-2.0..2.0))).unwrap()
}

// ---------- rules ----------

/// `(x, ξ) ↦ (x, 0, ξ, 0)` and `(y, η) ↦ (0, y, 0, η)` in `(x, y, ξ, η)`.
pub fn embeddings(n: usize, m: usize) -> (Mat, Mat) {
    let total = 2 * (n + m);
    let mut eu = Mat::zeros(total, 2 * n);
    let mut ev = Mat::zeros(total, 2 * m);
    for k in 0..n {
        eu[(k, k)] = 1.0;
        eu[(n + m + k, n + k)] = 1.0;
    }
    for k in 0..m {
        ev[(n + k, k)] = 1.0;
        ev[(2 * n + m + k, m + k)] = 1.0;
    }
    (eu, ev)
}

pub fn check_tensor<R: Rng>(rng: &mut R, u: &ConicSet, v: &ConicSet, r1: f64, r2: f64) -> Agreement {
    let mut out = Agreement::default();
    let (s1, s2) = (u.order().unwrap(), v.order().unwrap());
    let s_star = (s1 - r2).min(s2 - r1);
    let res = tensor(u, v, r1, r2);
    if s_star > s1 + s2 {
        if res.is_ok() {
            out.failures.push("tensor: order rule violation accepted".into());
        }
        return out;
    }
    let res = match res {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(format!("tensor: unexpected error {e}"));
            return out;
        }
    };
    if res.set.order() != Some(s_star) {
        out.failures
            .push(format!("tensor: order {:?} != {s_star}", res.set.order()));
    }
    let (n, m) = (u.half_dim(), v.half_dim());
    let (eu, ev) = embeddings(n, m);
    let (pu, pv) = (pieces(u), pieces(v));
    let tol = tolerance(&[&pu, &pv]);
    let mut left: Vec<Option<&Piece>> = pu.iter().map(Some).collect();
    let mut right: Vec<Option<&Piece>> = pv.iter().map(Some).collect();
    left.push(None);
    right.push(None);
    for a in &left {
        for b in &right {
            if a.is_none() && b.is_none() {
                continue;
            }
            for _ in 0..6 {
                let mut x = Vector::zeros(2 * (n + m));
                if let Some(a) = a {
                    x += &eu * a.sample(rng);
                }
                if let Some(b) = b {
                    x += &ev * b.sample(rng);
                }
                if x.norm() > 1e-9 {
                    out.sound(res.set.excess_angle(&x), tol, "tensor");
                }
            }
        }
    }
    for x in res.set.sample_directions(rng, 8) {
        let p = eu.transpose() * &x;
        let q = ev.transpose() * &x;
        let part = |z: &Vector, set: &ConicSet| -> f64 {
            if z.norm() <= 1e-9 {
                0.0
            } else {
                set.excess_angle(z).max(0.0)
            }
        };
        out.complete(part(&p, u).max(part(&q, v)), tol, "tensor");
    }
    out
}

pub fn check_pullback<R: Rng>(rng: &mut R, set: &ConicSet, l: &Mat, mu: f64) -> Agreement {
    let mut out = Agreement::default();
    let n = set.half_dim();
    let m = l.ncols();
    let ps = pieces(set);
    let tol = tolerance(&[&ps]);
    let ker_lt = null_space(&l.transpose());
    // bad = {(0, ξ) : Lᵀξ = 0}
    let mut bad = Mat::zeros(2 * n, ker_lt.ncols());
    bad.view_mut((n, 0), (n, ker_lt.ncols())).copy_from(&ker_lt);
    let meets = ps.iter().any(|p| match p {
        Piece::Span(b) => {
            let cons = hstack(&[b, &(-&bad)]);
            let ns = null_space(&cons);
            (0..ns.ncols()).any(|j| (b * ns.column(j).rows(0, b.ncols())).norm() > 1e-9)
        }
        Piece::Ray(d, r) => {
            ker_lt.ncols() > 0 && {
                let proj = &bad * (bad.transpose() * d);
                angle(d, &proj) <= r + 1e-6
            }
        }
    });
    let threshold = (n - m) as f64 / 2.0;
    let res = pullback(set, l, mu);
    if !(mu > threshold) || meets {
        if res.is_ok() {
            out.failures.push(format!(
                "pullback: accepted (mu ok: {}, meets: {meets})",
                mu > threshold
            ));
        }
        return out;
    }
    let res = match res {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(format!("pullback: unexpected error {e}"));
            return out;
        }
    };
    if res.set.order() != set.order().map(|s| s - mu) {
        out.failures.push("pullback: output order".into());
    }
    // T(x', ξ) = (x', Lᵀξ)
    let image = |xp: &Vector, xi: &Vector| -> Vector {
        let mut v = Vector::zeros(2 * m);
        v.rows_mut(0, m).copy_from(xp);
        v.rows_mut(m, m).copy_from(&(l.transpose() * xi));
        v
    };
    let lx = hstack(&[l, &Mat::zeros(n, 0)]);
    for p in &ps {
        match p {
            Piece::Span(b) => {
                // B c = (L x', ξ): unknowns (c, x')
                let bx = b.rows(0, n).into_owned();
                let cons = hstack(&[&bx, &(-&lx)]);
                let ns = null_space(&cons);
                for _ in 0..6 {
                    if ns.ncols() == 0 {
                        break;
                    }
                    let z = &ns * Vector::from_fn(ns.ncols(), |_, _| rng.gen_range(-1.0..1.0));
                    let c = z.rows(0, b.ncols()).into_owned();
                    let xp = z.rows(b.ncols(), m).into_owned();
                    let xi = b.rows(n, n) * c;
                    let y = image(&xp, &xi);
                    if y.norm() > 1e-9 {
                        out.sound(res.set.excess_angle(&y), tol, "pullback");
                    }
                }
            }
            Piece::Ray(d, _) => {
                let dx = d.rows(0, n).into_owned();
                let xp = l.clone().svd(true, true).solve(&dx, 1e-12).unwrap();
                if (l * &xp - &dx).norm() <= 1e-10 {
                    let y = image(&xp, &d.rows(n, n).into_owned());
                    if y.norm() > 1e-9 {
                        out.sound(res.set.excess_angle(&y), tol, "pullback");
                    }
                }
            }
        }
    }
    // witness: piece point = (L x', ξ0 + K w) with Lᵀ ξ0 = ζ
    let k_block = {
        let mut k = Mat::zeros(2 * n, ker_lt.ncols());
        k.view_mut((n, 0), (n, ker_lt.ncols())).copy_from(&ker_lt);
        -k
    };
    let ltl_inv = (l.transpose() * l).try_inverse().unwrap();
    for y in res.set.sample_directions(rng, 8) {
        let xp = y.rows(0, m).into_owned();
        let zeta = y.rows(m, m).into_owned();
        let mut target = Vector::zeros(2 * n);
        target.rows_mut(0, n).copy_from(&(l * &xp));
        target.rows_mut(n, n).copy_from(&(l * (&ltl_inv * &zeta)));
        let best = ps
            .iter()
            .map(|p| witness_angle(p, &Mat::identity(2 * n, 2 * n), &k_block, &target))
            .fold(f64::INFINITY, f64::min);
        out.complete(best, tol, "pullback");
    }
    out
}

pub fn check_integrate_out<R: Rng>(rng: &mut R, set: &ConicSet, m: usize, mu: f64) -> Agreement {
    let mut out = Agreement::default();
    let n = set.half_dim();
    let dim = 2 * n;
    let ps = pieces(set);
    let tol = tolerance(&[&ps]);
    let fibre_idx: Vec<usize> = (m..n).collect();
    let fibre = coordinate_rows(dim, &fibre_idx).transpose();
    let meets = m < n
        && ps.iter().any(|p| match p {
            Piece::Span(b) => {
                let ns = null_space(&hstack(&[b, &(-&fibre)]));
                (0..ns.ncols()).any(|j| (b * ns.column(j).rows(0, b.ncols())).norm() > 1e-9)
            }
            Piece::Ray(d, r) => angle(d, &(&fibre * (fibre.transpose() * d))) <= r + 1e-6,
        });
    let threshold = (n - m) as f64 / 2.0;
    let res = integrate_out(set, m, mu);
    if !(mu > threshold) || meets {
        if res.is_ok() {
            out.failures.push("integrate_out: accepted a violating input".into());
        }
        return out;
    }
    let res = match res {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(format!("integrate_out: unexpected error {e}"));
            return out;
        }
    };
    if res.set.order() != set.order().map(|s| s - mu) {
        out.failures.push("integrate_out: output order".into());
    }
    let keep: Vec<usize> = (0..m).chain(n..n + m).collect();
    let xi2: Vec<usize> = (n + m..dim).collect();
    let proj = coordinate_rows(dim, &keep);
    let xi2_rows = coordinate_rows(dim, &xi2);
    for p in &ps {
        for _ in 0..6 {
            let point = match p {
                Piece::Span(b) => {
                    let ns = null_space(&(&xi2_rows * b));
                    if ns.ncols() == 0 {
                        break;
                    }
                    b * (&ns * Vector::from_fn(ns.ncols(), |_, _| rng.gen_range(-1.0..1.0)))
                }
                Piece::Ray(d, _) => {
                    if (&xi2_rows * d).norm() > 1e-12 {
                        break;
                    }
                    d * rng.gen_range(0.1..1.0)
                }
            };
            let y = &proj * point;
            if y.norm() > 1e-9 {
                out.sound(res.set.excess_angle(&y), tol, "integrate_out");
            }
        }
    }
    let free = -&fibre;
    for y in res.set.sample_directions(rng, 8) {
        let target = proj.transpose() * &y;
        let best = ps
            .iter()
            .map(|p| witness_angle(p, &Mat::identity(dim, dim), &free, &target))
            .fold(f64::INFINITY, f64::min);
        out.complete(best, tol, "integrate_out");
    }
    out
}

/// `(y, η) ↦ (0, y, 0, −η)` into `R^{2(m+n)}`.
pub fn wf_y_lift(m: usize, n: usize) -> Mat {
    let (_, ev) = embeddings(m, n);
    let mut flip = Mat::identity(2 * n, 2 * n);
    for j in n..2 * n {
        flip[(j, j)] = -1.0;
    }
    ev * flip
}

pub fn check_kernel_compose<R: Rng>(rng: &mut R, k: &ConicSet, u: &ConicSet, r1: f64, r2: f64, mu: f64) -> Agreement {
    let mut out = Agreement::default();
    let n = u.half_dim();
    let m = k.half_dim() - n;
    let (pk, pu) = (pieces(k), pieces(u));
    let tol = tolerance(&[&pk, &pu]);
    let lift = wf_y_lift(m, n);
    let (ex, _) = embeddings(m, n);
    let meets = pk.iter().any(|a| {
        let Piece::Span(bk) = a else {
            panic!("kernel pieces are subspaces")
        };
        pu.iter().any(|b| match b {
            Piece::Span(bu) => {
                let lifted = &lift * bu;
                let ns = null_space(&hstack(&[bk, &(-&lifted)]));
                (0..ns.ncols()).any(|j| (bu * ns.column(j).rows(bk.ncols(), bu.ncols())).norm() > 1e-9)
            }
            Piece::Ray(d, r) => {
                let ld = &lift * d;
                angle(&ld, &(bk * (bk.transpose() * &ld))) <= r + 1e-6
            }
        })
    });
    let res = kernel_compose(k, u, r1, r2, mu);
    if !(mu > n as f64) || meets {
        if res.is_ok() {
            out.failures.push("kernel_compose: accepted a violating input".into());
        }
        return out;
    }
    let res = match res {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(format!("kernel_compose: unexpected error {e}"));
            return out;
        }
    };
    let want_order = (k.order().unwrap() - r2).min(u.order().unwrap() - r1) - mu;
    if res.set.order().is_none_or(|o| (o - want_order).abs() > 1e-12) {
        out.failures.push("kernel_compose: output order".into());
    }
    let to_x = ex.transpose();
    for a in &pk {
        let Piece::Span(bk) = a else { unreachable!() };
        // WF_X(K): y = η = 0
        let y_rows = lift.transpose();
        let ns = null_space(&(&y_rows * bk));
        for _ in 0..4 {
            if ns.ncols() == 0 {
                break;
            }
            let z = bk * (&ns * Vector::from_fn(ns.ncols(), |_, _| rng.gen_range(-1.0..1.0)));
            let y = &to_x * z;
            if y.norm() > 1e-9 {
                out.sound(res.set.excess_angle(&y), tol, "kernel_compose WF_X");
            }
        }
        // (x, y, ξ, −η) ∈ K with (y, η) ∈ WF(u): B_K c − lift(B_u c_u) ∈ X-block
        for b in &pu {
            let bu = match b {
                Piece::Span(bu) => bu.clone(),
                Piece::Ray(d, _) => Mat::from_column_slice(d.len(), 1, d.as_slice()),
            };
            let cons = &y_rows * hstack(&[bk, &(-(&lift * &bu))]);
            let ns = null_space(&cons);
            for _ in 0..6 {
                if ns.ncols() == 0 {
                    break;
                }
                let mut z = &ns * Vector::from_fn(ns.ncols(), |_, _| rng.gen_range(-1.0..1.0));
                if matches!(b, Piece::Ray(..)) && z[bk.ncols()] < 0.0 {
                    z = -z;
                }
                let point = bk * z.rows(0, bk.ncols());
                let y = &to_x * point;
                if y.norm() > 1e-9 {
                    out.sound(res.set.excess_angle(&y), tol, "kernel_compose");
                }
            }
        }
    }
    for y in res.set.sample_directions(rng, 8) {
        let target = &ex * &y;
        let mut best = f64::INFINITY;
        for a in &pk {
            let Piece::Span(bk) = a else { unreachable!() };
            best = best.min(best_angle(bk, &target, false));
            for b in &pu {
                // ray coefficient first so that it carries the sign constraint
                let (cols, nonneg) = match b {
                    Piece::Span(bu) => (hstack(&[bk, &(-(&lift * bu))]), false),
                    Piece::Ray(d, _) => {
                        let ld = -(&lift * d);
                        (hstack(&[&Mat::from_column_slice(ld.len(), 1, ld.as_slice()), bk]), true)
                    }
                };
                best = best.min(best_angle(&cols, &target, nonneg));
            }
        }
        out.complete(best, tol, "kernel_compose");
    }
    out
}
