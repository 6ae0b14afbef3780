use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::sampled::{Grid, SampledDistribution};
use crate::error::{Error, Result};
use crate::linalg::{RMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Metaplectic {
    Fourier,
    /// Multiplication by `e^{icx²}`.
    Chirp {
        c: f64,
    },
    /// `f ↦ |κ|^{1/2} f(κ·)`.
    Linear {
        kappa: f64,
    },
}

impl Metaplectic {
    /// The phase-space map carried along by the operator.
    pub fn symplectic_matrix(&self) -> RMat {
        match *self {
            Metaplectic::Fourier => RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Metaplectic::Chirp { c } => RMat::from_row_slice(2, 2, &[1.0, 0.0, 2.0 * c, 1.0]),
            Metaplectic::Linear { kappa } => RMat::from_row_slice(2, 2, &[1.0 / kappa, 0.0, 0.0, kappa]),
        }
    }
}

/// Centred unitary DFT onto the grid of step `2π/(N h)`.
fn fourier(u: &SampledDistribution) -> Result<SampledDistribution> {
    let grid = u.grid();
    let np = grid.points;
    let half = np / 2;
    let h = grid.step();
    let mut buf = u.values().to_vec();
    FftPlanner::new().plan_fft_forward(np).process(&mut buf);
    let freqs = grid.freqs();
    let scale = h / (2.0 * PI).sqrt();
    let values = (0..np)
        .map(|m| buf[(m + np - half) % np] * C64::from_polar(scale, freqs[m] * grid.extent / 2.0))
        .collect();
    let new_grid = Grid::new(np as f64 * grid.freq_step(), np)?;
    SampledDistribution::new(1, new_grid, values)
}

/// Trigonometric interpolant of the samples evaluated at arbitrary points.
fn interpolate(u: &SampledDistribution, at: &[f64]) -> Vec<C64> {
    let grid = u.grid();
    let np = grid.points;
    let half = np as isize / 2;
    let mut coef = u.values().to_vec();
    FftPlanner::new().plan_fft_forward(np).process(&mut coef);
    let w0 = 2.0 * PI / grid.extent;
    crate::par_map(at, |&y| {
        if y < grid.coord(0) || y > grid.coord(np - 1) {
            return C64::new(0.0, 0.0);
        }
        let s = y + grid.extent / 2.0;
        let mut acc = C64::new(0.0, 0.0);
        for p in -half..=half {
            let idx = p.rem_euclid(np as isize) as usize;
            let weight = if p.abs() == half { 0.5 } else { 1.0 };
            acc += coef[idx] * C64::from_polar(weight, w0 * p as f64 * s);
        }
        acc / np as f64
    })
}

pub fn metaplectic(u: &SampledDistribution, kind: Metaplectic) -> Result<SampledDistribution> {
    if u.n() != 1 {
        return Err(Error::NotApplicable(
            "metaplectic transforms act on one-dimensional data".into(),
        ));
    }
    let out = match kind {
        Metaplectic::Fourier => fourier(u)?,
        Metaplectic::Chirp { c } => {
            let grid = u.grid();
            let values = u
                .values()
                .iter()
                .zip(grid.coords())
                .map(|(v, x)| v * C64::from_polar(1.0, c * x * x))
                .collect();
            SampledDistribution::new(1, grid, values)?
        }
        Metaplectic::Linear { kappa } => {
            if !kappa.is_finite() || kappa.abs() < 1e-12 {
                return Err(Error::SingularMatrix(f64::INFINITY));
            }
            let grid = u.grid();
            if kappa == 1.0 {
                u.clone()
            } else {
                let at: Vec<f64> = grid.coords().iter().map(|x| kappa * x).collect();
                let amp = kappa.abs().sqrt();
                let values = interpolate(u, &at).into_iter().map(|v| v * amp).collect();
                SampledDistribution::new(1, grid, values)?
            }
        }
    };
    Ok(match &u.class {
        Some(c) => out.with_class(c.clone()),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::sampled::Datum;

    fn grid() -> Grid {
        Grid::new(40.0, 1024).unwrap()
    }

    #[test]
    fn fourier_of_gaussian() {
        let u = Datum::GaussianBump {
            center: 0.0,
            width: 1.0,
        }
        .sample(grid())
        .unwrap();
        let f = metaplectic(&u, Metaplectic::Fourier).unwrap();
        assert!((f.norm() - u.norm()).abs() < 1e-8);
        // the unit Gaussian is a fixed point
        let back = Datum::GaussianBump {
            center: 0.0,
            width: 1.0,
        }
        .sample(f.grid())
        .unwrap();
        assert!(f.rel_error(&back) < 1e-10);
    }

    #[test]
    fn fourier_moves_center_to_modulation() {
        let u = Datum::GaussianBump {
            center: 2.0,
            width: 1.0,
        }
        .sample(grid())
        .unwrap();
        let f = metaplectic(&u, Metaplectic::Fourier).unwrap();
        let want = Datum::ModulatedBump {
            center: 0.0,
            width: 1.0,
            freq: -2.0,
        }
        .sample(f.grid())
        .unwrap();
        assert!(f.rel_error(&want) < 1e-10);
    }

    #[test]
    fn chirp_and_linear_preserve_norm() {
        let u = Datum::GaussianBump {
            center: 0.5,
            width: 1.2,
        }
        .sample(grid())
        .unwrap();
        let c = metaplectic(&u, Metaplectic::Chirp { c: 1.0 }).unwrap();
        assert!((c.norm() - u.norm()).abs() < 1e-8);
        let l = metaplectic(&u, Metaplectic::Linear { kappa: 1.5 }).unwrap();
        assert!((l.norm() - u.norm()).abs() < 1e-4);
        let want = Datum::GaussianBump {
            center: 0.5 / 1.5,
            width: 1.2 / 1.5,
        }
        .sample(grid())
        .unwrap();
        assert!(l.rel_error(&want) < 1e-8);
        let same = metaplectic(&u, Metaplectic::Linear { kappa: 1.0 }).unwrap();
        assert_eq!(same.values(), u.values());
        assert!(metaplectic(&u, Metaplectic::Linear { kappa: 0.0 }).is_err());
    }
}
