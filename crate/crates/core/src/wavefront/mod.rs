//! Conic subsets of `R^{2n} \ {0}` as finite unions of atoms, with the
//! operation rules for wave-front sets and the propagation predictors.
//!
//! Coordinates are `(x, ξ)`; for products and kernels the blocks interleave
//! as `(x, y, ξ, η)`.

pub(crate) mod cone;
mod predict;
mod rules;

pub use predict::{coarse_prediction, predict_propagation, PropagationParams};
pub use rules::{
    integrate_out, kernel_compose, linear_image, pullback, pullback_surjective, tensor, Derived, OrderLedger,
};

use std::f64::consts::FRAC_PI_4;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use cone::Cone;

/// Default angular tolerance for exact-algebra results.
pub const ANG_TOL: f64 = 1e-6;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConicAtom {
    /// Rays of a linear subspace, orthonormal columns.
    Subspace { basis: RMat },
    /// Thickened rays: every direction within `radius` of one of `dirs`.
    Fan { dirs: Vec<DVector<f64>>, radius: f64 },
    /// Convex cone `span(span) + pos(gens)` thickened by `radius`. Products
    /// and compositions of fans land here.
    Sector {
        span: RMat,
        gens: Vec<DVector<f64>>,
        radius: f64,
    },
}

impl ConicAtom {
    pub fn subspace(basis: RMat) -> Result<Self> {
        let basis = orthonormal_or_fix(basis)?;
        Ok(Self::Subspace { basis })
    }

    pub fn fan(dirs: Vec<DVector<f64>>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let dirs = dirs.into_iter().map(unit).collect::<Result<Vec<_>>>()?;
        Ok(Self::Fan { dirs, radius })
    }

    pub fn sector(span: RMat, gens: Vec<DVector<f64>>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let span = orthonormal_or_fix(span)?;
        let gens = gens.into_iter().map(unit).collect::<Result<Vec<_>>>()?;
        Ok(Self::Sector { span, gens, radius })
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Self::Subspace { basis } => Some(basis.nrows()),
            Self::Fan { dirs, .. } => dirs.first().map(|d| d.len()),
            Self::Sector { span, gens, .. } => {
                if span.nrows() > 0 {
                    Some(span.nrows())
                } else {
                    gens.first().map(|g| g.len())
                }
            }
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Self::Subspace { .. } => 0.0,
            Self::Fan { radius, .. } | Self::Sector { radius, .. } => *radius,
        }
    }

    pub(crate) fn cores(&self, dim: usize) -> Vec<Cone> {
        match self {
            Self::Subspace { basis } => vec![Cone::subspace(basis)],
            Self::Fan { dirs, radius } => dirs.iter().map(|d| Cone::ray(d.clone(), *radius)).collect(),
            Self::Sector { span, gens, radius } => {
                let span = if span.ncols() == 0 {
                    RMat::zeros(dim, 0)
                } else {
                    span.clone()
                };
                vec![Cone::from_parts(&span, gens.clone(), *radius)]
            }
        }
        .into_iter()
        .filter(|c| !c.is_trivial())
        .collect()
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_4 + 1e-12).contains(&radius) {
        return Err(Error::FanRadius(radius));
    }
    Ok(())
}

fn unit(v: DVector<f64>) -> Result<DVector<f64>> {
    let norm = v.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::Invalid("fan direction must be a finite nonzero vector".into()));
    }
    Ok(if (norm - 1.0).abs() > UNIT_TOL { v / norm } else { v })
}

fn orthonormal_or_fix(basis: RMat) -> Result<RMat> {
    if basis.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("basis has non-finite entries".into()));
    }
    if basis.ncols() == 0 {
        return Ok(basis);
    }
    let gram = basis.transpose() * &basis;
    let k = basis.ncols();
    if (gram - RMat::identity(k, k)).amax() <= UNIT_TOL {
        Ok(basis)
    } else {
        Ok(linalg::column_span(&basis, linalg::DEFAULT_TOL_RANK))
    }
}

/// A finite union of conic atoms in `R^{dim}` with an optional Sobolev order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConicSetJson", into = "ConicSetJson")]
pub struct ConicSet {
    dim: usize,
    order: Option<f64>,
    atoms: Vec<ConicAtom>,
}

impl ConicSet {
    pub fn new(dim: usize, atoms: Vec<ConicAtom>, order: Option<f64>) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "ambient dimension {dim} must be even and positive"
            )));
        }
        for atom in &atoms {
            if let Some(d) = atom.dim() {
                if d != dim {
                    return Err(Error::Invalid(format!(
                        "atom of dimension {d} in a set of dimension {dim}"
                    )));
                }
            }
        }
        Ok(Self { dim, order, atoms }.normalized())
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            order: None,
            atoms: Vec::new(),
        }
    }

    pub fn from_subspace(basis: RMat) -> Result<Self> {
        let dim = basis.nrows();
        Self::new(dim, vec![ConicAtom::subspace(basis)?], None)
    }

    pub fn from_fan(dirs: Vec<DVector<f64>>, radius: f64) -> Result<Self> {
        let dim = dirs
            .first()
            .map(|d| d.len())
            .ok_or_else(|| Error::Invalid("fan needs at least one direction".into()))?;
        Self::new(dim, vec![ConicAtom::fan(dirs, radius)?], None)
    }

    pub fn with_order(mut self, order: Option<f64>) -> Self {
        self.order = order;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_dim(&self) -> usize {
        self.dim / 2
    }

    pub fn order(&self) -> Option<f64> {
        self.order
    }

    pub fn atoms(&self) -> &[ConicAtom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Smallest angle, less the atom radius, from `x` to any atom.
    pub fn excess_angle(&self, x: &DVector<f64>) -> f64 {
        self.cores()
            .iter()
            .map(|c| c.angle_to(x) - c.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn member(&self, x: &DVector<f64>, ang_tol: f64) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::Invalid(format!(
                "vector of length {} for a set in R^{}",
                x.len(),
                self.dim
            )));
        }
        if x.norm() == 0.0 {
            return Err(Error::Invalid("membership of the zero vector is undefined".into()));
        }
        Ok(self.excess_angle(x) <= ang_tol)
    }

    pub(crate) fn cores(&self) -> Vec<Cone> {
        self.atoms.iter().flat_map(|a| a.cores(self.dim)).collect()
    }

    pub(crate) fn from_cones(dim: usize, cones: Vec<Cone>, order: Option<f64>) -> Self {
        let mut subspaces = Vec::new();
        let mut fans: Vec<(f64, Vec<DVector<f64>>)> = Vec::new();
        let mut sectors = Vec::new();
        for c in cones.into_iter().filter(|c| !c.is_trivial()) {
            if c.is_subspace() {
                subspaces.push(ConicAtom::Subspace { basis: c.span });
            } else if c.is_single_ray() {
                let g = c.gens.into_iter().next().expect("single ray");
                match fans.iter_mut().find(|(r, _)| *r == c.radius) {
                    Some((_, dirs)) => dirs.push(g),
                    None => fans.push((c.radius, vec![g])),
                }
            } else {
                sectors.push(ConicAtom::Sector {
                    span: c.span,
                    gens: c.gens,
                    radius: c.radius,
                });
            }
        }
        let mut atoms = subspaces;
        atoms.extend(fans.into_iter().map(|(radius, dirs)| ConicAtom::Fan { dirs, radius }));
        atoms.extend(sectors);
        Self { dim, order, atoms }.normalized()
    }

    /// Canonical atom order; drops empty atoms, duplicate directions and
    /// subspaces contained in other subspaces.
    pub fn normalized(self) -> Self {
        let Self { dim, order, atoms } = self;
        let mut subspaces: Vec<RMat> = Vec::new();
        let mut fans: Vec<(f64, Vec<DVector<f64>>)> = Vec::new();
        let mut sectors: Vec<ConicAtom> = Vec::new();
        for atom in atoms {
            match atom {
                ConicAtom::Subspace { basis } if basis.ncols() > 0 => {
                    subspaces.push(linalg::canonical_basis(&basis));
                }
                ConicAtom::Subspace { .. } => {}
                ConicAtom::Fan { dirs, radius } => {
                    if dirs.is_empty() {
                        continue;
                    }
                    match fans.iter_mut().find(|(r, _)| *r == radius) {
                        Some((_, d)) => d.extend(dirs),
                        None => fans.push((radius, dirs)),
                    }
                }
                ConicAtom::Sector { span, gens, radius } => {
                    if span.ncols() == 0 && gens.is_empty() {
                        continue;
                    }
                    let span = if span.ncols() > 0 {
                        linalg::canonical_basis(&span)
                    } else {
                        span
                    };
                    sectors.push(ConicAtom::Sector { span, gens, radius });
                }
            }
        }
        // keep the larger of nested subspaces
        subspaces.sort_by_key(|b| std::cmp::Reverse(b.ncols()));
        let mut kept: Vec<RMat> = Vec::new();
        for b in subspaces {
            if !kept.iter().any(|k| linalg::containment_angle(&b, k) < 1e-9) {
                kept.push(b);
            }
        }
        kept.sort_by(|a, b| a.ncols().cmp(&b.ncols()).then_with(|| lex(a.as_slice(), b.as_slice())));
        let mut out: Vec<ConicAtom> = kept.into_iter().map(|basis| ConicAtom::Subspace { basis }).collect();
        fans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (radius, dirs) in fans {
            let mut uniq: Vec<DVector<f64>> = Vec::new();
            for d in dirs {
                if !uniq.iter().any(|u| (u - &d).norm() < 1e-12) {
                    uniq.push(d);
                }
            }
            uniq.sort_by(|a, b| lex(a.as_slice(), b.as_slice()));
            out.push(ConicAtom::Fan { dirs: uniq, radius });
        }
        sectors.sort_by(|a, b| match (a, b) {
            (ConicAtom::Sector { span: sa, gens: ga, .. }, ConicAtom::Sector { span: sb, gens: gb, .. }) => sa
                .ncols()
                .cmp(&sb.ncols())
                .then(ga.len().cmp(&gb.len()))
                .then_with(|| lex(sa.as_slice(), sb.as_slice()))
                .then_with(|| {
                    let fa: Vec<f64> = ga.iter().flat_map(|g| g.iter().copied()).collect();
                    let fb: Vec<f64> = gb.iter().flat_map(|g| g.iter().copied()).collect();
                    lex(&fa, &fb)
                }),
            _ => std::cmp::Ordering::Equal,
        });
        out.extend(sectors);
        Self { dim, order, atoms: out }
    }

    pub fn union(&self, other: &ConicSet) -> Result<ConicSet> {
        if self.dim != other.dim {
            return Err(Error::Invalid("union of sets in different dimensions".into()));
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let order = match (self.order, other.order) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Ok(Self {
            dim: self.dim,
            order,
            atoms,
        }
        .normalized())
    }

    /// Random unit directions drawn from the atom cores, `per_core` each.
    pub fn sample_directions<R: Rng>(&self, rng: &mut R, per_core: usize) -> Vec<DVector<f64>> {
        self.cores().iter().flat_map(|c| c.sample(rng, per_core)).collect()
    }

    /// Sampled inclusion test: every sampled core direction of `self` lies in
    /// `other` within `ang_tol` plus the radius of `self`'s atom.
    pub fn sampled_subset_of<R: Rng>(&self, other: &ConicSet, rng: &mut R, per_core: usize, ang_tol: f64) -> bool {
        self.cores().iter().all(|c| {
            c.sample(rng, per_core)
                .iter()
                .all(|x| other.excess_angle(x) <= ang_tol + c.radius)
        })
    }
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AtomJson {
    Subspace {
        basis: Vec<Vec<f64>>,
    },
    Fan {
        dirs: Vec<Vec<f64>>,
        radius: f64,
    },
    Sector {
        span: Vec<Vec<f64>>,
        gens: Vec<Vec<f64>>,
        radius: f64,
    },
}

/// Wire form: `{"dim", "order", "atoms": [...]}` with basis vectors listed as rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicSetJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub dim: usize,
    #[serde(default)]
    pub order: Option<f64>,
    pub atoms: Vec<AtomJson>,
}

fn cols_from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<RMat> {
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Invalid(format!("vector length differs from dim = {dim}")));
    }
    let cols: Vec<DVector<f64>> = rows.iter().map(|r| DVector::from_column_slice(r)).collect();
    Ok(if cols.is_empty() {
        RMat::zeros(dim, 0)
    } else {
        RMat::from_columns(&cols)
    })
}

fn rows_from_cols(m: &RMat) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

impl TryFrom<ConicSetJson> for ConicSet {
    type Error = Error;

    fn try_from(js: ConicSetJson) -> Result<Self> {
        let dim = js.dim;
        let vecs = |rows: &[Vec<f64>]| -> Result<Vec<DVector<f64>>> {
            Ok(cols_from_rows(dim, rows)?
                .column_iter()
                .map(|c| c.into_owned())
                .collect())
        };
        let atoms = js
            .atoms
            .iter()
            .map(|a| match a {
                AtomJson::Subspace { basis } => ConicAtom::subspace(cols_from_rows(dim, basis)?),
                AtomJson::Fan { dirs, radius } => ConicAtom::fan(vecs(dirs)?, *radius),
                AtomJson::Sector { span, gens, radius } => {
                    ConicAtom::sector(cols_from_rows(dim, span)?, vecs(gens)?, *radius)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        ConicSet::new(dim, atoms, js.order)
    }
}

impl From<ConicSet> for ConicSetJson {
    fn from(set: ConicSet) -> Self {
        let vec_rows = |v: &[DVector<f64>]| v.iter().map(|d| d.iter().copied().collect()).collect();
        ConicSetJson {
            schema: Some(1),
            dim: set.dim,
            order: set.order,
            atoms: set
                .atoms
                .iter()
                .map(|a| match a {
                    ConicAtom::Subspace { basis } => AtomJson::Subspace {
                        basis: rows_from_cols(basis),
                    },
                    ConicAtom::Fan { dirs, radius } => AtomJson::Fan {
                        dirs: vec_rows(dirs),
                        radius: *radius,
                    },
                    ConicAtom::Sector { span, gens, radius } => AtomJson::Sector {
                        span: rows_from_cols(span),
                        gens: vec_rows(gens),
                        radius: *radius,
                    },
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn subspace_membership() {
        let set = ConicSet::from_subspace(RMat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(set.member(&v(&[3.0, 0.0]), 1e-6).unwrap());
        assert!(!set.member(&v(&[0.0, 1.0]), 1e-6).unwrap());
        assert!(set.member(&v(&[-3.0, 0.0]), 1e-6).unwrap());
    }

    #[test]
    fn fan_membership() {
        let set = ConicSet::from_fan(vec![v(&[0.1f64.cos(), 0.1f64.sin()])], 0.05).unwrap();
        assert!(!set.member(&v(&[1.0, 0.0]), 1e-6).unwrap());
        assert!(set.member(&v(&[0.12f64.cos(), 0.12f64.sin()]), 1e-6).unwrap());
    }

    #[test]
    fn zero_vector_rejected() {
        let set = ConicSet::empty(2);
        assert!(set.member(&v(&[0.0, 0.0]), 1e-6).is_err());
    }

    #[test]
    fn radius_bound_enforced() {
        assert!(matches!(
            ConicAtom::fan(vec![v(&[1.0, 0.0])], 1.0),
            Err(Error::FanRadius(_))
        ));
    }

    #[test]
    fn nested_subspaces_collapse() {
        let line = ConicAtom::subspace(RMat::from_column_slice(3 + 1, 1, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let plane =
            ConicAtom::subspace(RMat::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])).unwrap();
        let set = ConicSet::new(4, vec![line, plane], None).unwrap();
        assert_eq!(set.atoms().len(), 1);
    }

    #[test]
    fn json_round_trip() {
        let set = ConicSet::new(
            2,
            vec![
                ConicAtom::subspace(RMat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap(),
                ConicAtom::fan(vec![v(&[1.0, 1.0])], 0.1).unwrap(),
            ],
            Some(1.5),
        )
        .unwrap();
        let text = serde_json::to_string(&set).unwrap();
        assert!(text.contains("\"kind\":\"subspace\""));
        let back: ConicSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn non_orthonormal_input_is_orthonormalized() {
        let js = r#"{"dim":2,"order":null,"atoms":[{"kind":"subspace","basis":[[2.0,0.0]]}]}"#;
        let set: ConicSet = serde_json::from_str(js).unwrap();
        match &set.atoms()[0] {
            ConicAtom::Subspace { basis } => assert!((basis.column(0).norm() - 1.0).abs() < 1e-12),
            _ => panic!("expected subspace"),
        }
    }
}
