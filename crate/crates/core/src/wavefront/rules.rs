//! Set rules for linear symplectic images, tensor products, pullbacks,
//! partial integration and kernel composition.

use nalgebra::DVector;
use serde::Serialize;

use super::cone::Cone;
use super::{ConicSet, ANG_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};

/// Orders and loss attached to a rule application.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OrderLedger {
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub output_order: Option<f64>,
}

impl OrderLedger {
    pub(crate) fn new(rule: &str) -> Self {
        Self {
            rule: rule.to_owned(),
            ..Self::default()
        }
    }
}

/// A predicted set with the bookkeeping that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub set: ConicSet,
    pub ledger: OrderLedger,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub(crate) fn check_loss(rule: &'static str, mu: f64, threshold: f64) -> Result<()> {
    if !(mu > threshold) {
        return Err(Error::LossBelowThreshold { rule, mu, threshold });
    }
    Ok(())
}

fn check_cols(m: &RMat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Invalid(format!(
            "{what} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Orthonormal basis of the coordinate axes listed in `idx`.
pub(crate) fn coordinate_subspace(dim: usize, idx: &[usize]) -> RMat {
    let mut b = RMat::zeros(dim, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        b[(i, c)] = 1.0;
    }
    b
}

/// Whether two thickened cones share a direction.
pub(crate) fn cones_meet(a: &Cone, b: &Cone, ang_tol: f64) -> bool {
    if a.is_trivial() || b.is_trivial() {
        return false;
    }
    let slack = a.radius + b.radius + ang_tol;
    if a.is_single_ray() {
        return b.angle_to(&a.gens[0]) <= slack;
    }
    if b.is_single_ray() {
        return a.angle_to(&b.gens[0]) <= slack;
    }
    !a.intersect(b).is_trivial()
}

/// `χ(set)` for a linear map `χ` of phase space. Radii grow by `cond(M)`.
pub fn linear_image(set: &ConicSet, m: &RMat) -> Result<Derived> {
    let dim = set.dim();
    check_cols(m, dim, dim, "M")?;
    let cond = linalg::condition_number(m);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularMatrix(cond));
    }
    let cones = set
        .cores()
        .iter()
        .map(|c| c.map(m, Some(cond)))
        .collect::<Result<Vec<_>>>()?;
    let mut ledger = OrderLedger::new("linear-image");
    ledger.s = set.order();
    ledger.output_order = set.order();
    Ok(Derived {
        set: ConicSet::from_cones(dim, cones, set.order()),
        ledger,
        notes: vec![format!("condition number {cond:.3e}")],
    })
}

/// Embeddings `(x,ξ) ↦ (x,0,ξ,0)` and `(y,η) ↦ (0,y,0,η)`.
pub(crate) fn product_embeddings(n: usize, m: usize) -> (RMat, RMat) {
    let total = 2 * (n + m);
    let mut eu = RMat::zeros(total, 2 * n);
    let mut ev = RMat::zeros(total, 2 * m);
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

/// `((U ∪ {0}) × (V ∪ {0})) \ {0}` in `(x, y, ξ, η)` coordinates with order
/// `min(s1 − r2, s2 − r1)`.
pub fn tensor(u: &ConicSet, v: &ConicSet, r1: f64, r2: f64) -> Result<Derived> {
    let (n, m) = (u.half_dim(), v.half_dim());
    let mut ledger = OrderLedger::new("tensor");
    ledger.s1 = u.order();
    ledger.s2 = v.order();
    ledger.r1 = Some(r1);
    ledger.r2 = Some(r2);
    if let (Some(s1), Some(s2)) = (u.order(), v.order()) {
        let s_star = (s1 - r2).min(s2 - r1);
        if s_star > s1 + s2 {
            return Err(Error::OrderRule {
                rule: "tensor",
                s_star,
                sum: s1 + s2,
            });
        }
        ledger.output_order = Some(s_star);
    }
    let (eu, ev) = product_embeddings(n, m);
    let total = 2 * (n + m);
    let embed = |c: &Cone, e: &RMat| -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        (
            c.span.column_iter().map(|col| e * col).collect(),
            c.gens.iter().map(|g| e * g).collect(),
        )
    };
    let mut left: Vec<Option<Cone>> = u.cores().into_iter().map(Some).collect();
    let mut right: Vec<Option<Cone>> = v.cores().into_iter().map(Some).collect();
    if left.is_empty() && right.is_empty() {
        return Ok(Derived {
            set: ConicSet::empty(total).with_order(ledger.output_order),
            ledger,
            notes: Vec::new(),
        });
    }
    if left.is_empty() {
        left.push(None);
    }
    if right.is_empty() {
        right.push(None);
    }
    let mut cones = Vec::new();
    for a in &left {
        for b in &right {
            let mut span = Vec::new();
            let mut gens = Vec::new();
            let mut radius: f64 = 0.0;
            if let Some(a) = a {
                let (s, g) = embed(a, &eu);
                span.extend(s);
                gens.extend(g);
                radius = radius.max(a.radius);
            }
            if let Some(b) = b {
                let (s, g) = embed(b, &ev);
                span.extend(s);
                gens.extend(g);
                radius = radius.max(b.radius);
            }
            let span = if span.is_empty() {
                RMat::zeros(total, 0)
            } else {
                RMat::from_columns(&span)
            };
            cones.push(Cone::from_parts(&span, gens, radius));
        }
    }
    Ok(Derived {
        set: ConicSet::from_cones(total, cones, ledger.output_order),
        ledger,
        notes: Vec::new(),
    })
}

fn injective_rank_check(l: &RMat) -> Result<()> {
    let sv = l.clone().svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    if sv.len() < l.ncols() || max == 0.0 || min <= 1e-12 * max {
        return Err(Error::Condition {
            rule: "pullback",
            detail: "L must have full column rank".into(),
        });
    }
    Ok(())
}

/// `{(x', Lᵀξ) : (Lx', ξ) ∈ set}` for injective `L : R^m → R^n`, order `s − μ`.
pub fn pullback(set: &ConicSet, l: &RMat, mu: f64) -> Result<Derived> {
    let n = set.half_dim();
    let m = l.ncols();
    if l.nrows() != n || m > n || m == 0 {
        return Err(Error::Invalid(format!("L must be {n}x m with 1 <= m <= {n}")));
    }
    injective_rank_check(l)?;
    let threshold = (n - m) as f64 / 2.0;
    check_loss("pullback", mu, threshold)?;
    // transversality: the set avoids {(0, ξ) : Lᵀξ = 0}
    let ker_lt = linalg::null_space(&l.transpose(), linalg::DEFAULT_TOL_RANK);
    let mut bad = RMat::zeros(2 * n, ker_lt.ncols());
    bad.view_mut((n, 0), (n, ker_lt.ncols())).copy_from(&ker_lt);
    let cores = set.cores();
    if ker_lt.ncols() > 0 {
        let bad_cone = Cone::subspace(&bad);
        if cores.iter().any(|c| cones_meet(c, &bad_cone, ANG_TOL)) {
            return Err(Error::Condition {
                rule: "pullback",
                detail: "the set meets {(0, ξ) : Lᵀξ = 0}".into(),
            });
        }
    }
    // E(x', ξ) = (Lx', ξ), T(x', ξ) = (x', Lᵀξ)
    let mut e = RMat::zeros(2 * n, m + n);
    e.view_mut((0, 0), (n, m)).copy_from(l);
    e.view_mut((n, m), (n, n)).fill_with_identity();
    let mut t = RMat::zeros(2 * m, m + n);
    t.view_mut((0, 0), (m, m)).fill_with_identity();
    t.view_mut((m, m), (m, n)).copy_from(&l.transpose());
    let range_e = linalg::column_span(&e, linalg::DEFAULT_TOL_RANK);
    let e_pinv = e.clone().pseudo_inverse(1e-14).map_err(|e| Error::Invalid(e.into()))?;
    let map = &t * &e_pinv;
    let mut notes = Vec::new();
    let mut cones = Vec::new();
    for c in &cores {
        let cut = c.intersect_subspace(&range_e, ANG_TOL);
        if cut.is_trivial() {
            continue;
        }
        match cut.map(&map, None) {
            Ok(img) => cones.push(img),
            Err(Error::FanRadius(r)) => {
                notes.push(format!(
                    "dropped a fan whose image radius {r:.3} exceeds pi/4 (near-zero image)"
                ));
            }
            Err(e) => return Err(e),
        }
    }
    let mut ledger = OrderLedger::new("pullback");
    ledger.s = set.order();
    ledger.mu = Some(mu);
    ledger.threshold = Some(threshold);
    ledger.output_order = set.order().map(|s| s - mu);
    Ok(Derived {
        set: ConicSet::from_cones(2 * m, cones, ledger.output_order),
        ledger,
        notes,
    })
}

/// `{(x, Lᵀξ') : (Lx, ξ') ∈ set} ∪ (Ker L × {0})` for surjective `L : R^N → R^n`.
pub fn pullback_surjective(set: &ConicSet, l: &RMat, mu: f64) -> Result<Derived> {
    let n = set.half_dim();
    let big = l.ncols();
    if l.nrows() != n || big < n {
        return Err(Error::Invalid(format!("L must be {n}xN with N >= {n}")));
    }
    injective_rank_check(&l.transpose())?;
    let threshold = (big - n) as f64 / 2.0;
    check_loss("pullback-surjective", mu, threshold)?;
    let ker_l = linalg::null_space(l, linalg::DEFAULT_TOL_RANK);
    let mut kernel_block = RMat::zeros(2 * big, ker_l.ncols());
    kernel_block.view_mut((0, 0), (big, ker_l.ncols())).copy_from(&ker_l);
    // E(x, ξ') = (Lx, ξ'), T(x, ξ') = (x, Lᵀξ'); E is onto, Ker E = Ker L × {0}
    let mut e = RMat::zeros(2 * n, big + n);
    e.view_mut((0, 0), (n, big)).copy_from(l);
    e.view_mut((n, big), (n, n)).fill_with_identity();
    let mut t = RMat::zeros(2 * big, big + n);
    t.view_mut((0, 0), (big, big)).fill_with_identity();
    t.view_mut((big, big), (big, n)).copy_from(&l.transpose());
    let e_pinv = e.clone().pseudo_inverse(1e-14).map_err(|e| Error::Invalid(e.into()))?;
    let map = &t * &e_pinv;
    let mut cones = Vec::new();
    for c in set.cores() {
        let img = c.map(&map, None)?;
        let mut span: Vec<DVector<f64>> = img.span.column_iter().map(|col| col.into_owned()).collect();
        span.extend(kernel_block.column_iter().map(|col| col.into_owned()));
        let span = if span.is_empty() {
            RMat::zeros(2 * big, 0)
        } else {
            RMat::from_columns(&span)
        };
        cones.push(Cone::from_parts(&span, img.gens, img.radius));
    }
    if ker_l.ncols() > 0 {
        cones.push(Cone::subspace(&kernel_block));
    }
    let mut ledger = OrderLedger::new("pullback-surjective");
    ledger.s = set.order();
    ledger.mu = Some(mu);
    ledger.threshold = Some(threshold);
    ledger.output_order = set.order().map(|s| s - mu);
    Ok(Derived {
        set: ConicSet::from_cones(2 * big, cones, ledger.output_order),
        ledger,
        notes: Vec::new(),
    })
}

/// Integration over the last `n − m` variables:
/// `{(x', ξ') : (x', x'', ξ', 0) ∈ set for some x''}`.
pub fn integrate_out(set: &ConicSet, m: usize, mu: f64) -> Result<Derived> {
    let n = set.half_dim();
    if m == 0 || m > n {
        return Err(Error::Invalid(format!("kept dimension m = {m} must lie in 1..={n}")));
    }
    let threshold = (n - m) as f64 / 2.0;
    check_loss("integrate-out", mu, threshold)?;
    let dim = 2 * n;
    let cores = set.cores();
    if m < n {
        let fibre_axes: Vec<usize> = (m..n).collect();
        let fibre = Cone::subspace(&coordinate_subspace(dim, &fibre_axes));
        if cores.iter().any(|c| cones_meet(c, &fibre, ANG_TOL)) {
            return Err(Error::Condition {
                rule: "integrate-out",
                detail: "the set meets {(0, x'', 0, 0)}".into(),
            });
        }
    }
    let keep_axes: Vec<usize> = (0..n).chain(n..n + m).collect();
    let slice = coordinate_subspace(dim, &keep_axes);
    let mut proj = RMat::zeros(2 * m, dim);
    for k in 0..m {
        proj[(k, k)] = 1.0;
        proj[(m + k, n + k)] = 1.0;
    }
    let mut cones = Vec::new();
    for c in &cores {
        let cut = c.intersect_subspace(&slice, ANG_TOL);
        if !cut.is_trivial() {
            cones.push(cut.map(&proj, None)?);
        }
    }
    let mut ledger = OrderLedger::new("integrate-out");
    ledger.s = set.order();
    ledger.mu = Some(mu);
    ledger.threshold = Some(threshold);
    ledger.output_order = set.order().map(|s| s - mu);
    Ok(Derived {
        set: ConicSet::from_cones(2 * m, cones, ledger.output_order),
        ledger,
        notes: Vec::new(),
    })
}

/// `WF_X(K) ∪ (WF(K)' ∘ WF(u))` for a kernel on `R^m × R^n`.
///
/// `WF_X(K) = {(x, ξ) : (x, 0, ξ, 0) ∈ WF(K)}` and
/// `WF_Y(K) = {(y, η) : (0, y, 0, −η) ∈ WF(K)}`; the input must avoid `WF_Y(K)`.
pub fn kernel_compose(k: &ConicSet, u: &ConicSet, r1: f64, r2: f64, mu: f64) -> Result<Derived> {
    let n = u.half_dim();
    let total = k.dim();
    if total <= 2 * n {
        return Err(Error::Invalid("kernel set must live in R^{2(m+n)} with m >= 1".into()));
    }
    let m = total / 2 - n;
    check_loss("kernel-compose", mu, n as f64)?;
    let (ex, ey) = product_embeddings(m, n);
    // σ(y, η) = (0, y, 0, −η)
    let mut flip = RMat::identity(2 * n, 2 * n);
    for j in n..2 * n {
        flip[(j, j)] = -1.0;
    }
    let sigma = &ey * flip;
    let x_block = linalg::column_span(&ex, linalg::DEFAULT_TOL_RANK);
    let y_block = linalg::column_span(&ey, linalg::DEFAULT_TOL_RANK);
    let to_x = ex.transpose();
    let from_y = sigma.transpose();
    let k_cores = k.cores();
    let u_cores = u.cores();

    let mut wf_y = Vec::new();
    for c in &k_cores {
        let cut = c.intersect_subspace(&y_block, ANG_TOL);
        if !cut.is_trivial() {
            wf_y.push(cut.map(&from_y, None)?);
        }
    }
    for a in &u_cores {
        if wf_y.iter().any(|b| cones_meet(a, b, ANG_TOL)) {
            return Err(Error::Condition {
                rule: "kernel-compose",
                detail: "WF(u) meets WF_Y(K)".into(),
            });
        }
    }

    let mut cones = Vec::new();
    for c in &k_cores {
        let cut = c.intersect_subspace(&x_block, ANG_TOL);
        if !cut.is_trivial() {
            cones.push(cut.map(&to_x, None)?);
        }
    }
    for a in &u_cores {
        let mut span: Vec<DVector<f64>> = x_block.column_iter().map(|col| col.into_owned()).collect();
        span.extend(a.span.column_iter().map(|col| &sigma * col));
        let lifted = Cone::from_parts(
            &RMat::from_columns(&span),
            a.gens.iter().map(|g| &sigma * g).collect(),
            a.radius,
        );
        for c in &k_cores {
            let cut = c.intersect(&lifted);
            if cut.is_trivial() {
                continue;
            }
            let img = cut.map(&to_x, None)?;
            if !img.is_trivial() {
                cones.push(img);
            }
        }
    }
    let mut ledger = OrderLedger::new("kernel-compose");
    ledger.s1 = k.order();
    ledger.s2 = u.order();
    ledger.r1 = Some(r1);
    ledger.r2 = Some(r2);
    ledger.mu = Some(mu);
    ledger.threshold = Some(n as f64);
    if let (Some(s1), Some(s2)) = (k.order(), u.order()) {
        ledger.output_order = Some((s1 - r2).min(s2 - r1) - mu);
    }
    Ok(Derived {
        set: ConicSet::from_cones(2 * m, cones, ledger.output_order),
        ledger,
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefront::ConicAtom;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn axis(dim: usize, i: usize) -> RMat {
        coordinate_subspace(dim, &[i])
    }

    #[test]
    fn fourier_map_swaps_axes() {
        let set = ConicSet::from_subspace(axis(2, 0)).unwrap();
        let chi = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let out = linear_image(&set, &chi).unwrap().set;
        assert!(out.member(&v(&[0.0, 1.0]), 1e-9).unwrap());
        assert!(!out.member(&v(&[1.0, 0.0]), 1e-3).unwrap());
    }

    #[test]
    fn rotated_fan() {
        let t = 0.3f64;
        let set = ConicSet::from_fan(vec![v(&[0.0, 1.0])], 0.0).unwrap();
        let (c, s) = ((2.0 * t).cos(), (2.0 * t).sin());
        let rot = RMat::from_row_slice(2, 2, &[c, -s, s, c]);
        let out = linear_image(&set, &rot).unwrap().set;
        let ang = std::f64::consts::FRAC_PI_2 + 2.0 * t;
        assert!(out.member(&v(&[ang.cos(), ang.sin()]), 1e-9).unwrap());
    }

    #[test]
    fn singular_map_rejected() {
        let set = ConicSet::from_subspace(axis(2, 0)).unwrap();
        let m = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(linear_image(&set, &m), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn tensor_with_empty_factor() {
        let u = ConicSet::from_subspace(axis(2, 1)).unwrap();
        let v_set = ConicSet::empty(2);
        let out = tensor(&u, &v_set, 0.0, 0.0).unwrap().set;
        // {(0, 0, ξ, 0)}: the ξ-axis of R⁴ in (x, y, ξ, η)
        assert!(out.member(&v(&[0.0, 0.0, 1.0, 0.0]), 1e-9).unwrap());
        assert!(!out.member(&v(&[0.0, 1.0, 0.0, 0.0]), 1e-3).unwrap());
        let both = tensor(&ConicSet::empty(2), &ConicSet::empty(2), 0.0, 0.0).unwrap();
        assert!(both.set.is_empty());
    }

    #[test]
    fn tensor_orders() {
        let u = ConicSet::empty(2).with_order(Some(2.0));
        let w = ConicSet::empty(2).with_order(Some(3.0));
        let d = tensor(&u, &w, 1.0, 0.0).unwrap();
        assert_eq!(d.ledger.output_order, Some(2.0));
        let bad = tensor(
            &ConicSet::empty(2).with_order(Some(-1.0)),
            &ConicSet::empty(2).with_order(Some(-1.0)),
            -2.0,
            -2.0,
        );
        assert!(matches!(bad, Err(Error::OrderRule { .. })));
    }

    #[test]
    fn tensor_of_rays_is_a_quadrant_sector() {
        let u = ConicSet::from_fan(vec![v(&[1.0, 0.0])], 0.0).unwrap();
        let w = ConicSet::from_fan(vec![v(&[0.0, 1.0])], 0.0).unwrap();
        let out = tensor(&u, &w, 0.0, 0.0).unwrap().set;
        // (x, y, ξ, η) = (1, 0, 0, 1), (1, 0, 0, 0), (2, 0, 0, 1)
        for p in [[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 1.0]] {
            assert!(out.member(&v(&p), 1e-9).unwrap());
        }
        assert!(!out.member(&v(&[-1.0, 0.0, 0.0, 1.0]), 1e-3).unwrap());
        assert!(out.atoms().iter().any(|a| matches!(a, ConicAtom::Sector { .. })));
    }

    #[test]
    fn pullback_identity() {
        let set = ConicSet::from_fan(vec![v(&[1.0, 2.0])], 0.0).unwrap();
        let out = pullback(&set, &RMat::identity(1, 1), 0.1).unwrap().set;
        assert!(out.member(&v(&[1.0, 2.0]), 1e-9).unwrap());
        assert!(!out.member(&v(&[1.0, 0.0]), 1e-3).unwrap());
    }

    #[test]
    fn pullback_restriction_to_line() {
        // {x = 0, η = 0} in (x, y, ξ, η), L : x' ↦ (x', 0)
        let set = ConicSet::from_subspace(coordinate_subspace(4, &[1, 2])).unwrap();
        let l = RMat::from_column_slice(2, 1, &[1.0, 0.0]);
        let d = pullback(&set, &l, 0.6).unwrap();
        assert!(d.set.member(&v(&[0.0, 1.0]), 1e-9).unwrap());
        assert!(!d.set.member(&v(&[1.0, 0.0]), 1e-3).unwrap());
        assert!(matches!(pullback(&set, &l, 0.5), Err(Error::LossBelowThreshold { .. })));
    }

    #[test]
    fn pullback_transversality_violation() {
        let set = ConicSet::from_subspace(axis(4, 3)).unwrap();
        let l = RMat::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(pullback(&set, &l, 1.0), Err(Error::Condition { .. })));
    }

    #[test]
    fn surjective_pullback_adds_kernel() {
        // L(x', x'') = x', set = ξ-axis in R²
        let set = ConicSet::from_subspace(axis(2, 1)).unwrap();
        let l = RMat::from_row_slice(1, 2, &[1.0, 0.0]);
        let out = pullback_surjective(&set, &l, 0.6).unwrap().set;
        // (x', x'', ξ', ξ'')
        assert!(out.member(&v(&[0.0, 0.0, 1.0, 0.0]), 1e-9).unwrap());
        assert!(out.member(&v(&[0.0, 1.0, 1.0, 0.0]), 1e-9).unwrap());
        assert!(out.member(&v(&[0.0, 1.0, 0.0, 0.0]), 1e-9).unwrap());
        assert!(!out.member(&v(&[1.0, 0.0, 0.0, 0.0]), 1e-3).unwrap());
        assert!(!out.member(&v(&[0.0, 0.0, 0.0, 1.0]), 1e-3).unwrap());
    }

    #[test]
    fn integrate_out_projects_slice() {
        // span{ξ', x''}: the x'' direction alone is forbidden, so use ξ' + x''
        let b = RMat::from_column_slice(4, 1, &[0.0, 1.0, 1.0, 0.0]);
        let set = ConicSet::from_subspace(b).unwrap().with_order(Some(1.0));
        let d = integrate_out(&set, 1, 0.51).unwrap();
        assert!(d.set.member(&v(&[0.0, 1.0]), 1e-9).unwrap());
        assert!((d.ledger.output_order.unwrap() - 0.49).abs() < 1e-15);
        let forbidden = ConicSet::from_subspace(axis(4, 1)).unwrap();
        assert!(matches!(
            integrate_out(&forbidden, 1, 0.6),
            Err(Error::Condition { .. })
        ));
        assert!(integrate_out(&ConicSet::empty(4), 1, 0.6).unwrap().set.is_empty());
    }

    fn graph_kernel(r: &RMat) -> ConicSet {
        // {(x, y, ξ, −η) : (x, ξ) = R (y, η)}
        let mut cols = Vec::new();
        for j in 0..2 {
            let mut y = DVector::zeros(2);
            y[j] = 1.0;
            let xr = r * &y;
            cols.push(v(&[xr[0], y[0], xr[1], -y[1]]));
        }
        ConicSet::from_subspace(RMat::from_columns(&cols)).unwrap()
    }

    #[test]
    fn compose_with_rotation_graph() {
        let th: f64 = 0.7;
        let r = RMat::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let k = graph_kernel(&r).with_order(Some(0.0));
        let ray = v(&[0.6, 0.8]);
        let u = ConicSet::from_fan(vec![ray.clone()], 0.0)
            .unwrap()
            .with_order(Some(0.0));
        let d = kernel_compose(&k, &u, 1.1, 0.0, 1.1).unwrap();
        let want = &r * &ray;
        assert!(d.set.member(&want, 1e-9).unwrap());
        assert!(!d.set.member(&(-want), 1e-3).unwrap());
        assert!((d.ledger.output_order.unwrap() - (-1.1 - 1.1)).abs() < 1e-15);
        let empty = kernel_compose(&k, &ConicSet::empty(2), 1.1, 0.0, 1.1).unwrap();
        assert!(empty.set.is_empty());
    }

    #[test]
    fn compose_rejects_wf_y_overlap() {
        // K contains (0, y, 0, 0); u contains the y-direction
        let k = ConicSet::from_subspace(axis(4, 1)).unwrap();
        let u = ConicSet::from_subspace(axis(2, 0)).unwrap();
        assert!(matches!(
            kernel_compose(&k, &u, 0.0, 0.0, 1.5),
            Err(Error::Condition { .. })
        ));
        assert!(matches!(
            kernel_compose(&k, &ConicSet::empty(2), 0.0, 0.0, 1.0),
            Err(Error::LossBelowThreshold { .. })
        ));
    }
}
