//! Weyl quantization of polynomial symbols in the Hermite basis, anti-Wick
//! smoothing and Shubin-Sobolev norms.

mod antiwick;
mod hermite;
mod norms;

pub use antiwick::{anti_wick_smooth, AntiWick, PhaseGrid};
pub use hermite::{hermite_functions, hermite_table, HermiteBasis};
pub use norms::{
    calibrate_norm_ratio, hermite_coefficients, hermite_synthesize, indicator_box_norm, shubin_norm_hermite,
    shubin_norm_stft, ShubinNorm,
};

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::symplectic::{PolySymbol2, Polynomial};

/// Matrix of `Op^w(a)` on a truncated Hermite basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: CMat,
    pub symbol: Option<PolySymbol2>,
    /// States `0..interior` have degree `≤ K − 2`.
    pub interior: usize,
}

impl OperatorMatrix {
    pub fn interior_block(&self) -> CMat {
        self.matrix.view((0, 0), (self.interior, self.interior)).into_owned()
    }
}

#[derive(Clone, Copy)]
enum Ladder {
    X(usize),
    D(usize),
}

type Sparse = BTreeMap<Vec<u16>, C64>;

fn apply(op: Ladder, v: &Sparse) -> Sparse {
    let mut out = Sparse::new();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (j, lower_c, raise_c) = match op {
        // X = (a + a†)/√2, D = −i(a − a†)/√2
        Ladder::X(j) => (j, C64::new(r, 0.0), C64::new(r, 0.0)),
        Ladder::D(j) => (j, C64::new(0.0, -r), C64::new(0.0, r)),
    };
    for (k, &c) in v {
        let kj = k[j] as f64;
        if k[j] > 0 {
            let mut down = k.clone();
            down[j] -= 1;
            *out.entry(down).or_insert(C64::new(0.0, 0.0)) += c * lower_c * kj.sqrt();
        }
        let mut up = k.clone();
        up[j] += 1;
        *out.entry(up).or_insert(C64::new(0.0, 0.0)) += c * raise_c * (kj + 1.0).sqrt();
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Words (right to left) and weights realizing `Op^w(x^p ξ^q)` in one
/// coordinate: `2^{−p} Σ_l C(p,l) X^{p−l} D^q X^l`.
fn monomial_words(j: usize, p: usize, q: usize) -> Vec<(f64, Vec<Ladder>)> {
    (0..=p)
        .map(|l| {
            let mut word = Vec::with_capacity(p + q);
            word.extend(std::iter::repeat_n(Ladder::X(j), l));
            word.extend(std::iter::repeat_n(Ladder::D(j), q));
            word.extend(std::iter::repeat_n(Ladder::X(j), p - l));
            (binomial(p, l) / 2f64.powi(p as i32), word)
        })
        .collect()
}

/// `Op^w(a)` for a polynomial symbol, exact on every retained entry: the
/// ladder actions run on the untruncated basis and only the result is cut.
pub fn opw_polynomial(a: &Polynomial, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    let n = basis.n();
    if a.half_dim() != n {
        return Err(Error::Invalid(format!(
            "symbol in {} variables for a basis in {n}",
            a.half_dim()
        )));
    }
    // expand each monomial into weighted words over all coordinates
    let mut words: Vec<(C64, Vec<Ladder>)> = Vec::new();
    for (exps, coef) in a.terms() {
        let mut combos: Vec<(f64, Vec<Ladder>)> = vec![(1.0, Vec::new())];
        for j in 0..n {
            let per = monomial_words(j, exps[j] as usize, exps[n + j] as usize);
            let mut next = Vec::with_capacity(combos.len() * per.len());
            for (w0, word0) in &combos {
                for (w1, word1) in &per {
                    let mut word = word0.clone();
                    word.extend(word1.iter().copied());
                    next.push((w0 * w1, word));
                }
            }
            combos = next;
        }
        words.extend(combos.into_iter().map(|(w, word)| (coef * w, word)));
    }
    let dim = basis.len();
    let columns: Vec<Vec<(usize, C64)>> = crate::par_map(basis.indices(), |k| {
        let mut col: Vec<(usize, C64)> = Vec::new();
        for (coef, word) in &words {
            let mut v = Sparse::new();
            v.insert(k.clone(), Complex64::new(1.0, 0.0));
            for &op in word {
                v = apply(op, &v);
            }
            for (m, c) in v {
                if let Some(i) = basis.index_of(&m) {
                    col.push((i, c * coef));
                }
            }
        }
        col
    });
    let mut matrix = CMat::zeros(dim, dim);
    for (j, col) in columns.into_iter().enumerate() {
        for (i, c) in col {
            matrix[(i, j)] += c;
        }
    }
    Ok(OperatorMatrix {
        matrix,
        symbol: PolySymbol2::from_polynomial(a).ok(),
        interior: basis.interior_len(),
    })
}

/// `Op^w(a)` for a symbol of degree at most two.
pub fn opw_quadratic(sym: &PolySymbol2, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    let mut out = opw_polynomial(&sym.to_polynomial(), basis)?;
    out.symbol = Some(sym.clone());
    Ok(out)
}

/// Interior-block norm of `[Op^w(a), Op^w(ā)]`.
pub fn normality_defect(sym: &PolySymbol2, basis: &HermiteBasis) -> Result<f64> {
    let a = opw_quadratic(sym, basis)?.matrix;
    let b = opw_quadratic(&sym.conj(), basis)?.matrix;
    let comm = &a * &b - &b * &a;
    let k = basis.interior_len();
    Ok(comm.view((0, 0), (k, k)).norm())
}
