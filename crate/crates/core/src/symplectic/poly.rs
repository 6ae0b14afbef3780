//! Polynomial symbols on phase space, Poisson brackets and the Weyl product.
//!
//! Variables are ordered `(x_1..x_n, ξ_1..ξ_n)`. Coefficients are complex
//! floats; differentiation and multiplication are exact on the exponents so
//! integer-coefficient inputs produce exact outputs.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

type Exponents = Vec<u8>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Exponents, C64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![0; 2 * n], c);
        p
    }

    /// `x_k` for `k < n`, `ξ_{k-n}` for `n <= k < 2n`.
    pub fn var(n: usize, k: usize) -> Self {
        let mut e = vec![0; 2 * n];
        e[k] = 1;
        let mut p = Self::zero(n);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    pub fn x(n: usize, j: usize) -> Self {
        Self::var(n, j)
    }

    pub fn xi(n: usize, j: usize) -> Self {
        Self::var(n, n + j)
    }

    /// `⟨X, QX⟩` for a symmetric `2n × 2n` matrix.
    pub fn quadratic_form(q: &CMat) -> Self {
        let n = q.nrows() / 2;
        let mut p = Self::zero(n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                let mut e = vec![0; 2 * n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, q[(i, j)]);
            }
        }
        p
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], C64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn coefficient(&self, exps: &[u8]) -> C64 {
        self.terms.get(exps).copied().unwrap_or_default()
    }

    fn add_term(&mut self, e: Exponents, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert(C64::new(0.0, 0.0));
        *entry += c;
        if *entry == C64::new(0.0, 0.0) {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&d| d as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Largest coefficient modulus, zero for the zero polynomial.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.conj())).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn derivative(&self, k: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                let power = d[k];
                d[k] -= 1;
                out.add_term(d, c * power as f64);
            }
        }
        out
    }

    pub fn eval(&self, point: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let m: f64 = e.iter().zip(point).map(|(&d, &v)| v.powi(d as i32)).product();
                c * m
            })
            .sum()
    }

    /// `{a, b} = ⟨∇_ξ a, ∇_x b⟩ − ⟨∇_x a, ∇_ξ b⟩`.
    pub fn poisson(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zero(n);
        for k in 0..n {
            let t1 = self.derivative(n + k).mul(&other.derivative(k));
            let t2 = self.derivative(k).mul(&other.derivative(n + k));
            out = out.add(&t1).sub(&t2);
        }
        out
    }

    /// Weyl product `a ♯ b`, exact for polynomials.
    ///
    /// With `D = −i∂` the j-th term `(i/2)^j/j! σ(D_X; D_Y)^j a(X) b(Y)|_{Y=X}`
    /// equals `(−i/2)^j/j!` times the j-fold bidifferential
    /// `P(f, g) = Σ_k ∂_{ξ_k} f ∂_{x_k} g − ∂_{x_k} f ∂_{ξ_k} g`.
    pub fn weyl(&self, other: &Self) -> Self {
        let n = self.n;
        let max_order = self.degree().min(other.degree());
        let mut pairs: Vec<(Polynomial, Polynomial)> = vec![(self.clone(), other.clone())];
        let mut out = self.mul(other);
        let mut factor = C64::new(1.0, 0.0);
        for j in 1..=max_order {
            factor *= C64::new(0.0, -0.5) / j as f64;
            let mut next = Vec::new();
            for (f, g) in &pairs {
                for k in 0..n {
                    let a = f.derivative(n + k);
                    let b = g.derivative(k);
                    if !a.is_zero() && !b.is_zero() {
                        next.push((a, b));
                    }
                    let a = f.derivative(k);
                    let b = g.derivative(n + k);
                    if !a.is_zero() && !b.is_zero() {
                        next.push((a.scale(C64::new(-1.0, 0.0)), b));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            let mut term = Self::zero(n);
            for (f, g) in &next {
                term = term.add(&f.mul(g));
            }
            out = out.add(&term.scale(factor));
            pairs = next;
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names: Vec<String> = (0..2 * self.n)
            .map(|k| {
                if k < self.n {
                    format!("x{}", k + 1)
                } else {
                    format!("xi{}", k - self.n + 1)
                }
            })
            .collect();
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)", c.re, c.im)?;
            for (k, &d) in e.iter().enumerate() {
                match d {
                    0 => {}
                    1 => write!(f, "*{}", names[k])?,
                    _ => write!(f, "*{}^{}", names[k], d)?,
                }
            }
        }
        Ok(())
    }
}

/// Complex polynomial of total degree at most two:
/// `⟨X, quad X⟩ + ⟨lin, X⟩ + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySymbol2 {
    pub quad: CMat,
    pub lin: DVector<C64>,
    pub constant: C64,
}

impl PolySymbol2 {
    pub fn new(quad: CMat, lin: DVector<C64>, constant: C64) -> Result<Self> {
        let dim = quad.nrows();
        if quad.ncols() != dim || !dim.is_multiple_of(2) || lin.len() != dim {
            return Err(Error::Invalid(format!(
                "symbol shapes {}x{} and {} do not describe a phase space",
                quad.nrows(),
                quad.ncols(),
                lin.len()
            )));
        }
        let quad = (&quad + quad.transpose()).scale(0.5);
        Ok(Self { quad, lin, constant })
    }

    pub fn quadratic(quad: CMat) -> Result<Self> {
        let dim = quad.nrows();
        Self::new(quad, DVector::zeros(dim), C64::new(0.0, 0.0))
    }

    pub fn half_dim(&self) -> usize {
        self.quad.nrows() / 2
    }

    pub fn to_polynomial(&self) -> Polynomial {
        let n = self.half_dim();
        let mut p = Polynomial::quadratic_form(&self.quad);
        for k in 0..2 * n {
            p = p.add(&Polynomial::var(n, k).scale(self.lin[k]));
        }
        p.add(&Polynomial::constant(n, self.constant))
    }

    pub fn from_polynomial(p: &Polynomial) -> Result<Self> {
        let degree = p.degree();
        if degree > 2 {
            return Err(Error::DegreeTooHigh(degree));
        }
        let n = p.half_dim();
        let dim = 2 * n;
        let mut quad = CMat::zeros(dim, dim);
        let mut lin = DVector::zeros(dim);
        let mut constant = C64::new(0.0, 0.0);
        for (e, c) in p.terms() {
            let nz: Vec<usize> = (0..dim).filter(|&k| e[k] > 0).collect();
            match (nz.as_slice(), e.iter().map(|&d| d as usize).sum::<usize>()) {
                ([], _) => constant = c,
                ([k], 1) => lin[*k] = c,
                ([k], 2) => quad[(*k, *k)] = c,
                ([i, j], 2) => {
                    quad[(*i, *j)] = c * 0.5;
                    quad[(*j, *i)] = c * 0.5;
                }
                _ => unreachable!("degree checked above"),
            }
        }
        Ok(Self { quad, lin, constant })
    }

    pub fn conj(&self) -> Self {
        Self {
            quad: self.quad.map(|z| z.conj()),
            lin: self.lin.map(|z| z.conj()),
            constant: self.constant.conj(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_polynomial().is_zero()
    }
}

pub fn poisson_bracket(a: &PolySymbol2, b: &PolySymbol2) -> PolySymbol2 {
    let p = a.to_polynomial().poisson(&b.to_polynomial());
    PolySymbol2::from_polynomial(&p).expect("bracket of degree-2 symbols has degree <= 2")
}

/// `a ♯ b` for symbols of degree at most two; the result has degree at most four.
pub fn weyl_product2(a: &PolySymbol2, b: &PolySymbol2) -> Polynomial {
    a.to_polynomial().weyl(&b.to_polynomial())
}
