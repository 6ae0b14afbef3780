use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use serde::Serialize;

use super::kernel::GaussianKernel;
use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, C64};
use crate::stft::gauss_legendre;

/// Box half-widths of the growing-box sequence.
pub const PROBE_RADII: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 80.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelProbe {
    pub order: f64,
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    /// `(I_{k+1} − I_k) / (I_k − I_{k−1})` for the squared norms `I`.
    pub increment_ratios: Vec<f64>,
    /// Directions of phase space along which `|V|` does not decay.
    pub null_directions: usize,
    pub plateau: bool,
    /// Order at which the last increment ratio would reach 1.
    pub critical_order_estimate: f64,
}

/// Gauss-Hermite nodes and weights for `e^{−x²}` by Golub-Welsch.
fn gauss_hermite(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = RMat::zeros(k, k);
    for i in 1..k {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], PI.sqrt() * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `|V_ψK(Z)|² = amp · exp(−ZᵀPZ)` on `R^{2N}`, `N = 2n`.
fn stft_gaussian(kernel: &GaussianKernel) -> Result<(f64, RMat)> {
    let q = kernel.q_matrix();
    let big_n = q.nrows();
    let b = CMat::identity(big_n, big_n) * C64::new(0.5, 0.0) - q;
    let det = b.determinant();
    let binv = b.try_inverse().ok_or(Error::SingularMatrix(f64::INFINITY))?;
    let c = binv * C64::new(0.25, 0.0);
    // v = z − iζ = L Z
    let mut l = CMat::zeros(big_n, 2 * big_n);
    for i in 0..big_n {
        l[(i, i)] = C64::new(1.0, 0.0);
        l[(i, big_n + i)] = C64::new(0.0, -1.0);
    }
    let m = l.transpose() * c * l;
    let mut p = RMat::zeros(2 * big_n, 2 * big_n);
    for i in 0..2 * big_n {
        for j in 0..2 * big_n {
            let e = if i == j && i < big_n { 1.0 } else { 0.0 };
            p[(i, j)] = e - (m[(i, j)].re + m[(j, i)].re);
        }
    }
    let amp = kernel.amplitude().norm_sqr() * PI.powf(big_n as f64 / 2.0) / det.norm();
    Ok((amp, p))
}

/// Panels `[0, ½, 1, 2, 4, …, R]` with Gauss-Legendre nodes.
fn half_line_rule(r: f64) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(12);
    let mut cuts = vec![0.0, 0.5];
    let mut c = 1.0;
    while c < r {
        cuts.push(c);
        c *= 2.0;
    }
    cuts.push(r);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (x, wt) in gx.iter().zip(&gw) {
            xs.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            ws.push(0.5 * (b - a) * wt);
        }
    }
    (xs, ws)
}

/// Tensor quadrature nodes for a list of 1-D rules: (sum of squares, weight).
fn tensor_nodes(rules: &[(Vec<f64>, Vec<f64>)]) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 1.0)];
    for (xs, ws) in rules {
        out = out
            .iter()
            .flat_map(|&(s, w)| xs.iter().zip(ws).map(move |(x, wx)| (s + x * x, w * wx)))
            .collect();
    }
    out
}

/// Growing-box STFT norms of order `s` for a one-axis kernel, integrated in the
/// eigen-coordinates of the Gaussian `|V|²`.
pub fn probe_at_order(kernel: &GaussianKernel, s: f64) -> Result<KernelProbe> {
    if kernel.n() != 1 {
        return Err(Error::NotApplicable("the kernel probe handles one-axis kernels".into()));
    }
    let (amp, p) = stft_gaussian(kernel)?;
    let eig = SymmetricEigen::new(p).eigenvalues;
    let top = eig.iter().copied().fold(1.0, f64::max);
    let decaying: Vec<f64> = eig.iter().copied().filter(|&l| l > 1e-10 * top).collect();
    let null = eig.len() - decaying.len();
    let (hx, hw) = gauss_hermite(32);
    let dec_rules: Vec<(Vec<f64>, Vec<f64>)> = decaying
        .iter()
        .map(|&l| {
            (
                hx.iter().map(|x| x / l.sqrt()).collect(),
                hw.iter().map(|w| w / l.sqrt()).collect(),
            )
        })
        .collect();
    let dec_nodes = tensor_nodes(&dec_rules);
    let big_n = 2 * kernel.n();
    let norms: Vec<f64> = PROBE_RADII
        .iter()
        .map(|&r| {
            let half = half_line_rule(r);
            let null_rules = vec![half; null];
            let null_nodes = tensor_nodes(&null_rules);
            let sym_factor = 2f64.powi(null as i32);
            let total: f64 = crate::par_map(&null_nodes, |&(sn, wn)| {
                dec_nodes
                    .iter()
                    .map(|&(sd, wd)| wd * (1.0 + sn + sd).powf(s))
                    .sum::<f64>()
                    * wn
            })
            .iter()
            .sum();
            (amp * sym_factor * total).sqrt() / (2.0 * PI).powf(big_n as f64 / 2.0)
        })
        .collect();
    let squares: Vec<f64> = norms.iter().map(|v| v * v).collect();
    let increments: Vec<f64> = squares.windows(2).map(|w| w[1] - w[0]).collect();
    let increment_ratios: Vec<f64> = increments
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            if w[1].abs() <= 1e-13 * squares[k + 2] {
                0.0
            } else {
                w[1] / w[0]
            }
        })
        .collect();
    let last = *increment_ratios.last().expect("five radii give three ratios");
    let critical_order_estimate = if last > 0.0 {
        s - last.log2() / 2.0
    } else {
        f64::INFINITY
    };
    Ok(KernelProbe {
        order: s,
        radii: PROBE_RADII.to_vec(),
        norms,
        increment_ratios,
        null_directions: null,
        plateau: last < 0.95,
        critical_order_estimate,
    })
}

/// Probe at the order `−n − ε` of the kernel's Sobolev membership.
pub fn kernel_sobolev_probe(kernel: &GaussianKernel, eps: f64) -> Result<KernelProbe> {
    probe_at_order(kernel, -(kernel.n() as f64) - eps)
}
