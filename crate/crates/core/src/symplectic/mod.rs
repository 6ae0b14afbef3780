//! Quadratic symbols, their Hamilton maps, flows and singular spaces.

mod poly;

pub use poly::{poisson_bracket, weyl_product2, PolySymbol2, Polynomial};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ExpLog, RMat, C64};

const TOL_PSD: f64 = 1e-10;
const TOL_SYM: f64 = 1e-10;

/// `a(X) = ⟨X, QX⟩` with `Q` complex symmetric and `Re Q ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSymbol {
    n: usize,
    q: CMat,
}

impl QuadraticSymbol {
    pub fn new(n: usize, q: CMat) -> Result<Self> {
        if n == 0 || q.nrows() != 2 * n || q.ncols() != 2 * n {
            return Err(Error::Invalid(format!(
                "Q must be {0}x{0} for n = {1}, got {2}x{3}",
                2 * n,
                n,
                q.nrows(),
                q.ncols()
            )));
        }
        if q.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("Q has non-finite entries".into()));
        }
        let scale = q.norm().max(1.0);
        let asym = (&q - q.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > TOL_SYM * scale {
            return Err(Error::NotSymmetric {
                asym,
                bound: TOL_SYM * scale,
            });
        }
        let q = (&q + q.transpose()).scale(0.5);
        let re_q = linalg::re(&q);
        let eig = SymmetricEigen::new(re_q.clone()).eigenvalues;
        let min_eig = eig.min();
        let spectral = eig.amax();
        if min_eig < -TOL_PSD * spectral {
            return Err(Error::NotPositive {
                min_eig,
                bound: -TOL_PSD * spectral,
            });
        }
        Ok(Self { n, q })
    }

    pub fn from_real_imag(re_q: &RMat, im_q: &RMat) -> Result<Self> {
        let n = re_q.nrows() / 2;
        let q = CMat::from_fn(re_q.nrows(), re_q.ncols(), |i, j| C64::new(re_q[(i, j)], im_q[(i, j)]));
        Self::new(n, q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.q
    }

    pub fn real_part(&self) -> RMat {
        linalg::re(&self.q)
    }

    pub fn imag_part(&self) -> RMat {
        linalg::im(&self.q)
    }

    /// `a(X)` for real `X`.
    pub fn eval(&self, x: &[f64]) -> C64 {
        let v = nalgebra::DVector::from_iterator(x.len(), x.iter().map(|&r| C64::new(r, 0.0)));
        (v.transpose() * &self.q * &v)[(0, 0)]
    }

    pub fn to_poly(&self) -> PolySymbol2 {
        PolySymbol2::quadratic(self.q.clone()).expect("shape validated on construction")
    }

    pub fn to_json(&self) -> QuadraticJson {
        QuadraticJson {
            schema: Some(1),
            n: self.n,
            q: (0..2 * self.n)
                .map(|i| {
                    (0..2 * self.n)
                        .map(|j| [self.q[(i, j)].re, self.q[(i, j)].im])
                        .collect()
                })
                .collect(),
        }
    }
}

/// Wire form: `{"n": int, "Q": [[[re, im], ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<&QuadraticJson> for QuadraticSymbol {
    type Error = Error;

    fn try_from(js: &QuadraticJson) -> Result<Self> {
        let dim = 2 * js.n;
        if js.q.len() != dim || js.q.iter().any(|row| row.len() != dim) {
            return Err(Error::Invalid(format!(
                "Q must be a {dim}x{dim} array of [re, im] pairs"
            )));
        }
        let q = CMat::from_fn(dim, dim, |i, j| C64::new(js.q[i][j][0], js.q[i][j][1]));
        QuadraticSymbol::new(js.n, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    /// `e^{−2itF}`
    Full,
    /// `e^{2t Im F}`
    ImaginaryPart,
}

#[derive(Debug, Clone)]
pub struct Flow {
    pub kind: FlowKind,
    pub t: f64,
    pub matrix: CMat,
    pub log: ExpLog,
}

impl Flow {
    pub fn real(&self) -> RMat {
        linalg::re(&self.matrix)
    }

    pub fn imag(&self) -> RMat {
        linalg::im(&self.matrix)
    }
}

/// `F = JQ` with its real and imaginary parts.
#[derive(Debug, Clone)]
pub struct HamiltonMap {
    n: usize,
    f: CMat,
    re_f: RMat,
    im_f: RMat,
}

pub fn hamilton_map(sym: &QuadraticSymbol) -> HamiltonMap {
    let n = sym.n();
    let j = linalg::to_complex(&linalg::symplectic_j(n));
    let f = j * sym.matrix();
    HamiltonMap {
        n,
        re_f: linalg::re(&f),
        im_f: linalg::im(&f),
        f,
    }
}

impl HamiltonMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.f
    }

    pub fn re_f(&self) -> &RMat {
        &self.re_f
    }

    pub fn im_f(&self) -> &RMat {
        &self.im_f
    }

    pub fn j(&self) -> RMat {
        linalg::symplectic_j(self.n)
    }

    /// Symplectic form `σ((x,ξ),(y,η)) = ⟨y,ξ⟩ − ⟨x,η⟩`, bilinear on complex vectors.
    pub fn sigma(&self, a: &[C64], b: &[C64]) -> C64 {
        let n = self.n;
        (0..n).map(|k| b[k] * a[n + k] - a[k] * b[n + k]).sum()
    }

    /// `σ(X, FX)` for real `X`.
    pub fn sigma_form(&self, x: &[f64]) -> C64 {
        let v = nalgebra::DVector::from_iterator(x.len(), x.iter().map(|&r| C64::new(r, 0.0)));
        let fx = &self.f * &v;
        self.sigma(v.as_slice(), fx.as_slice())
    }

    /// `S = ∩_{j<2n} Ker(Re F (Im F)^j) ∩ R^{2n}` as an orthonormal basis.
    ///
    /// The blocks use `Im F / ‖Im F‖` so that powers stay on a common scale.
    pub fn singular_space(&self, tol_rank: f64) -> RMat {
        let dim = 2 * self.n;
        let im_norm = self.im_f.norm();
        let step = if im_norm > 0.0 {
            self.im_f.scale(1.0 / im_norm)
        } else {
            self.im_f.clone()
        };
        let mut stacked = RMat::zeros(dim * dim, dim);
        let mut power = RMat::identity(dim, dim);
        for j in 0..dim {
            let block = &self.re_f * &power;
            stacked.view_mut((j * dim, 0), (dim, dim)).copy_from(&block);
            power = &power * &step;
        }
        linalg::null_space(&stacked, tol_rank)
    }

    pub fn flow_exp(&self, t: f64, kind: FlowKind) -> Flow {
        let generator = match kind {
            FlowKind::Full => self.f.scale(-2.0 * t) * C64::new(0.0, 1.0),
            FlowKind::ImaginaryPart => linalg::to_complex(&self.im_f.scale(2.0 * t)),
        };
        let (mut matrix, log) = linalg::expm(&generator);
        if kind == FlowKind::ImaginaryPart {
            matrix.iter_mut().for_each(|z| z.im = 0.0);
        }
        Flow { kind, t, matrix, log }
    }

    /// `Ker_R(Im e^{−2itF})`.
    pub fn ker_im_flow(&self, t: f64, tol_rank: f64) -> RMat {
        let flow = self.flow_exp(t, FlowKind::Full);
        linalg::null_space_scaled(&flow.imag(), tol_rank, flow.matrix.norm())
    }

    /// Intersection of `Ker_R(Im e^{−2it'F})` over `samples` equispaced `t' ∈ (0, t]`.
    pub fn sampled_kernel_intersection(&self, t: f64, samples: usize, tol_rank: f64) -> RMat {
        let dim = 2 * self.n;
        let mut stacked = RMat::zeros(dim * samples, dim);
        let mut scale: f64 = 0.0;
        for k in 0..samples {
            let tk = t * (k + 1) as f64 / samples as f64;
            let flow = self.flow_exp(tk, FlowKind::Full);
            scale = scale.max(flow.matrix.norm());
            stacked.view_mut((k * dim, 0), (dim, dim)).copy_from(&flow.imag());
        }
        linalg::null_space_scaled(&stacked, tol_rank, scale)
    }
}
