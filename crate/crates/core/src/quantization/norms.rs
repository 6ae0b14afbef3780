use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::Serialize;

use super::hermite::{hermite_table, HermiteBasis};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::stft::{window, Grid, STFTField, SampledDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShubinNorm {
    pub value: f64,
    /// Share of `Σ|c_k|²` in the top degree shell.
    pub tail_fraction: f64,
    pub flagged: bool,
}

/// Hermite coefficients of sampled data by trapezoid quadrature.
pub fn hermite_coefficients(u: &SampledDistribution, basis: &HermiteBasis) -> Result<Vec<C64>> {
    if u.n() != basis.n() {
        return Err(Error::Invalid(format!(
            "data in dimension {} for a basis in dimension {}",
            u.n(),
            basis.n()
        )));
    }
    let grid = u.grid();
    let table = hermite_table(basis.k_max(), &grid.coords());
    let np = grid.points;
    let vals = u.values();
    let h = grid.step();
    let coeff = |k: &Vec<u16>| -> C64 {
        match u.n() {
            1 => (0..np).map(|j| vals[j] * table[(k[0] as usize, j)]).sum::<C64>() * h,
            _ => {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..np {
                    let ta = table[(k[0] as usize, a)];
                    if ta == 0.0 {
                        continue;
                    }
                    let row: C64 = (0..np).map(|b| vals[a * np + b] * table[(k[1] as usize, b)]).sum();
                    acc += row * ta;
                }
                acc * h * h
            }
        }
    };
    Ok(crate::par_map(basis.indices(), coeff))
}

/// Samples of `Σ c_k h_k` on the grid.
pub fn hermite_synthesize(basis: &HermiteBasis, coeffs: &[C64], grid: Grid) -> Result<SampledDistribution> {
    if coeffs.len() != basis.len() {
        return Err(Error::Invalid(format!(
            "{} coefficients for a basis of {}",
            coeffs.len(),
            basis.len()
        )));
    }
    let table = hermite_table(basis.k_max(), &grid.coords());
    let np = grid.points;
    let n = basis.n();
    let mut values = vec![C64::new(0.0, 0.0); np.pow(n as u32)];
    for (k, c) in basis.indices().iter().zip(coeffs) {
        if *c == C64::new(0.0, 0.0) {
            continue;
        }
        if n == 1 {
            for j in 0..np {
                values[j] += c * table[(k[0] as usize, j)];
            }
        } else {
            for a in 0..np {
                let ta = table[(k[0] as usize, a)];
                for b in 0..np {
                    values[a * np + b] += c * (ta * table[(k[1] as usize, b)]);
                }
            }
        }
    }
    SampledDistribution::new(n, grid, values)
}

/// `(Σ (2|k|+n)^s |c_k|²)^{1/2}`, flagged when the top shell holds over 1%.
pub fn shubin_norm_hermite(basis: &HermiteBasis, coeffs: &[C64], s: f64) -> Result<ShubinNorm> {
    if coeffs.len() != basis.len() {
        return Err(Error::Invalid(format!(
            "{} coefficients for a basis of {}",
            coeffs.len(),
            basis.len()
        )));
    }
    let n = basis.n() as f64;
    let mut weighted = 0.0;
    let (mut total, mut top) = (0.0, 0.0);
    for (i, c) in coeffs.iter().enumerate() {
        let deg = basis.degree(i);
        let m = c.norm_sqr();
        weighted += (2.0 * deg as f64 + n).powf(s) * m;
        total += m;
        if deg == basis.k_max() {
            top += m;
        }
    }
    let tail_fraction = if total > 0.0 { top / total } else { 0.0 };
    Ok(ShubinNorm {
        value: weighted.sqrt(),
        tail_fraction,
        flagged: tail_fraction > 0.01,
    })
}

/// `(2π)^{−1/2} ‖⟨·⟩^s V_ψu‖` over the whole STFT grid.
pub fn shubin_norm_stft(field: &STFTField, s: f64) -> f64 {
    (field.weighted_mass(s, f64::INFINITY) / (2.0 * PI)).sqrt()
}

/// Ratio band `stft / hermite` over `h_k`, `k ∈ ks`, measured on the given grid.
pub fn calibrate_norm_ratio(s: f64, ks: &[usize], grid: Grid) -> Result<(f64, f64)> {
    let k_top = ks.iter().copied().max().unwrap_or(0);
    let basis = HermiteBasis::new(1, k_top + 2);
    let mut band = (f64::INFINITY, 0.0f64);
    for &k in ks {
        let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
        coeffs[k] = C64::new(1.0, 0.0);
        let u = hermite_synthesize(&basis, &coeffs, grid)?;
        let field = crate::stft::stft(&u, 1.0)?;
        let r = shubin_norm_stft(&field, s) / shubin_norm_hermite(&basis, &coeffs, s)?.value;
        band = (band.0.min(r), band.1.max(r));
    }
    Ok(band)
}

/// STFT-method norm of order `s` of the indicator of `[−R, R]`.
///
/// The jump rules out the grid STFT, so each x-slice of `V` is an FFT of the
/// windowed indicator on a fine auxiliary grid, with half weight at the edges.
pub fn indicator_box_norm(half_width: f64, s: f64) -> Result<f64> {
    if !(half_width > 0.0) {
        return Err(Error::Invalid(format!("box half-width {half_width} must be positive")));
    }
    let reach = 9.0;
    let h = 0.01;
    let np = 8192usize;
    let dx = 0.125;
    let xs: Vec<f64> = {
        let m = ((half_width + reach) / dx).ceil() as i64;
        (-m..=m).map(|i| i as f64 * dx).collect()
    };
    let freq_step = 2.0 * PI / (np as f64 * h);
    let slice = |&x: &f64| -> f64 {
        let mut buf: Vec<C64> = (0..np)
            .map(|j| {
                let y = x - np as f64 * h / 2.0 + j as f64 * h;
                let ind = if (y.abs() - half_width).abs() < 0.5 * h {
                    0.5
                } else if y.abs() < half_width {
                    1.0
                } else {
                    0.0
                };
                C64::new(ind * window(1.0, y - x), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(np).process(&mut buf);
        buf.iter()
            .enumerate()
            .map(|(m, z)| {
                let xi = if m < np / 2 { m as f64 } else { m as f64 - np as f64 } * freq_step;
                (1.0 + x * x + xi * xi).powf(s) * (z.norm_sqr() * h * h)
            })
            .sum::<f64>()
            * freq_step
    };
    let mass: f64 = crate::par_map(&xs, slice).iter().sum::<f64>() * dx;
    Ok((mass / (2.0 * PI)).sqrt())
}
