use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `e^{τ∂²}` with `Re τ ≥ 0`: heat for real `τ`, free Schrödinger for imaginary `τ`.
    Diffusion,
    /// `e^{−τ(−∂² + x²)}` for real `τ`.
    MehlerHyperbolic,
    /// `e^{−iθ(−∂² + x²)}` for real `θ`.
    MehlerOscillatory,
}

/// One-dimensional `c · exp(q_xx x² + 2 q_xy xy + q_yy y²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisKernel {
    pub family: KernelFamily,
    pub tau: C64,
    pub q_xx: C64,
    pub q_xy: C64,
    pub q_yy: C64,
    pub c: C64,
}

impl AxisKernel {
    pub fn diffusion(tau: C64) -> Result<Self> {
        if tau.norm() == 0.0 || tau.re < 0.0 {
            return Err(Error::Invalid(format!(
                "diffusion time {tau} must be nonzero with Re >= 0"
            )));
        }
        let q = -1.0 / (4.0 * tau);
        Ok(Self {
            family: KernelFamily::Diffusion,
            tau,
            q_xx: q,
            q_xy: -q,
            q_yy: q,
            c: (4.0 * PI * tau).sqrt().inv(),
        })
    }

    pub fn mehler_hyperbolic(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < PI / 2.0) {
            return Err(Error::TimeOutOfRange(t));
        }
        let (sh, ch) = ((2.0 * t).sinh(), (2.0 * t).cosh());
        Ok(Self {
            family: KernelFamily::MehlerHyperbolic,
            tau: C64::new(t, 0.0),
            q_xx: C64::new(-ch / (2.0 * sh), 0.0),
            q_xy: C64::new(1.0 / (2.0 * sh), 0.0),
            q_yy: C64::new(-ch / (2.0 * sh), 0.0),
            c: C64::new((2.0 * PI * sh).powf(-0.5), 0.0),
        })
    }

    /// Negative `θ` gives the time-reversed (conjugate) kernel.
    pub fn mehler_oscillatory(theta: f64) -> Result<Self> {
        if theta == 0.0 || !(theta.abs() < PI / 2.0) {
            return Err(Error::TimeOutOfRange(theta));
        }
        let (s, c) = ((2.0 * theta).sin(), (2.0 * theta).cos());
        let i = C64::i();
        Ok(Self {
            family: KernelFamily::MehlerOscillatory,
            tau: C64::new(0.0, theta),
            q_xx: i * (c / (2.0 * s)),
            q_xy: -i / (2.0 * s),
            q_yy: i * (c / (2.0 * s)),
            // principal root, continuous in θ on (0, π/2)
            c: (2.0 * PI * i * s).sqrt().inv(),
        })
    }

    pub fn exponent(&self, x: f64, y: f64) -> C64 {
        self.q_xx * (x * x) + self.q_xy * (2.0 * x * y) + self.q_yy * (y * y)
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        self.c * self.exponent(x, y).exp()
    }

    pub fn is_oscillatory(&self) -> bool {
        self.q_xx.im != 0.0 || self.q_xy.im != 0.0 || self.q_yy.im != 0.0
    }

    /// `max |∂_y Im exponent|` over the rectangle `|x| ≤ x_max`, `y ∈ [y_lo, y_hi]`.
    pub fn max_phase_gradient(&self, x_max: f64, y_lo: f64, y_hi: f64) -> f64 {
        let (a, b) = (2.0 * self.q_xy.im, 2.0 * self.q_yy.im);
        [y_lo, y_hi]
            .iter()
            .flat_map(|&y| [-x_max, x_max].map(|x| (a * x + b * y).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest eigenvalue of the real part of the 2×2 exponent matrix.
    pub fn real_part_max_eig(&self) -> f64 {
        let (a, b, d) = (self.q_xx.re, self.q_xy.re, self.q_yy.re);
        0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt()
    }
}

/// Tensor product of one-dimensional kernels, `K(x, y) = Π_j K_j(x_j, y_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianKernel {
    pub schema: u32,
    pub axes: Vec<AxisKernel>,
}

impl GaussianKernel {
    pub fn new(axes: Vec<AxisKernel>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Invalid("kernel needs at least one axis".into()));
        }
        let worst = axes
            .iter()
            .map(AxisKernel::real_part_max_eig)
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > 1e-12 {
            return Err(Error::Invalid(format!(
                "kernel exponent has Re q with eigenvalue {worst:e} > 0"
            )));
        }
        Ok(Self { schema: 1, axes })
    }

    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn amplitude(&self) -> C64 {
        self.axes.iter().map(|a| a.c).product()
    }

    /// Exponent matrix on `(x, y) ∈ R^{2n}`.
    pub fn q_matrix(&self) -> CMat {
        let n = self.n();
        let mut q = CMat::zeros(2 * n, 2 * n);
        for (j, a) in self.axes.iter().enumerate() {
            q[(j, j)] = a.q_xx;
            q[(j, n + j)] = a.q_xy;
            q[(n + j, j)] = a.q_xy;
            q[(n + j, n + j)] = a.q_yy;
        }
        q
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> C64 {
        self.axes.iter().enumerate().map(|(j, a)| a.eval(x[j], y[j])).product()
    }
}

/// Mehler kernel of `e^{−tA}` for `Q = diag(I_{n1}, iI_{n2}, I_{n1}, iI_{n2})`.
pub fn mehler_kernel(n1: usize, n2: usize, t: f64) -> Result<GaussianKernel> {
    if !(t > 0.0 && t < PI / 2.0) {
        return Err(Error::TimeOutOfRange(t));
    }
    let mut axes = Vec::with_capacity(n1 + n2);
    for _ in 0..n1 {
        axes.push(AxisKernel::mehler_hyperbolic(t)?);
    }
    for _ in 0..n2 {
        axes.push(AxisKernel::mehler_oscillatory(t)?);
    }
    GaussianKernel::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillatory_matches_display() {
        let t = PI / 8.0;
        let k = mehler_kernel(0, 1, t).unwrap();
        let pts = [
            (0.0, 0.0),
            (1.0, 0.5),
            (-2.0, 0.3),
            (0.7, -1.1),
            (3.0, 3.0),
            (-0.4, 2.2),
            (1.5, -2.5),
            (0.1, 0.9),
            (-3.0, -1.0),
            (2.5, 0.0),
        ];
        for (x, y) in pts {
            let (s, c) = ((2.0 * t).sin(), (2.0 * t).cos());
            let root = (C64::new(0.0, 2.0 * PI * s)).sqrt();
            let want = (C64::i() * (((x * x + y * y) * c - 2.0 * x * y) / (2.0 * s))).exp() / root;
            assert!((k.eval(&[x], &[y]) - want).norm() < 1e-14);
        }
        // principal root of 2πi sin(π/4): argument π/4
        let c = k.amplitude().inv();
        assert!((c.arg() - PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_small_time_is_heat_like() {
        let t = 1e-3;
        let k = mehler_kernel(1, 0, t).unwrap();
        let heat = AxisKernel::diffusion(C64::new(t, 0.0)).unwrap();
        for (x, y) in [(0.0, 0.0), (0.1, 0.05), (0.5, 0.52)] {
            let (a, b) = (k.eval(&[x], &[y]), heat.eval(x, y));
            assert!((a - b).norm() < 2e-3 * b.norm().max(1e-3), "{x} {y}: {a} vs {b}");
        }
        // peak on the diagonal
        assert!(k.eval(&[0.3], &[0.3]).norm() > 10.0 * k.eval(&[0.3], &[0.5]).norm());
    }

    #[test]
    fn kernels_are_symmetric() {
        let k = mehler_kernel(1, 1, 0.4).unwrap();
        for (x, y) in [([0.3, -1.0], [1.2, 0.4]), ([2.0, 0.1], [-0.5, 0.9])] {
            assert_eq!(k.eval(&x, &y), k.eval(&y, &x));
        }
    }

    #[test]
    fn time_window_enforced() {
        assert!(matches!(mehler_kernel(1, 0, 0.0), Err(Error::TimeOutOfRange(_))));
        assert!(matches!(mehler_kernel(0, 1, PI / 2.0), Err(Error::TimeOutOfRange(_))));
        assert!(mehler_kernel(1, 1, 1.5).is_ok());
    }

    #[test]
    fn schrodinger_root_is_principal() {
        let k = AxisKernel::diffusion(C64::new(0.0, 0.25)).unwrap();
        assert!((k.c.inv().arg() - PI / 4.0).abs() < 1e-14);
        assert!(k.is_oscillatory());
        assert!(k.real_part_max_eig().abs() < 1e-15);
    }
}
