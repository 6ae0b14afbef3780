use std::collections::HashMap;
use std::f64::consts::PI;

use rustfft::FftPlanner;

use super::sampled::{Grid, SampledDistribution};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Unit-norm Gaussian `(πw²)^{−1/4} e^{−y²/(2w²)}`.
pub fn window(width: f64, y: f64) -> f64 {
    (PI * width * width).powf(-0.25) * (-y * y / (2.0 * width * width)).exp()
}

/// Half-width beyond which the window is below roundoff.
fn window_reach(width: f64) -> f64 {
    9.0 * width
}

/// Fraction of the discrete spectral mass within 3 bins of Nyquist.
pub fn nyquist_fraction(u: &[C64]) -> f64 {
    let np = u.len();
    let mut buf = u.to_vec();
    FftPlanner::new().plan_fft_forward(np).process(&mut buf);
    let total: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let half = np / 2;
    let edge: f64 = (half - 3..=half + 3).map(|p| buf[p % np].norm_sqr()).sum();
    edge / total
}

/// `V_ψu` on the phase-space grid `(x_{k·stride}, ξ_m)` for one-dimensional data.
#[derive(Debug, Clone)]
pub struct STFTField {
    pub grid: Grid,
    pub width: f64,
    pub stride: usize,
    /// Row per retained x position, column per centred FFT frequency.
    pub values: Vec<Vec<C64>>,
    pub isometry_residual: f64,
    source: SampledDistribution,
}

impl STFTField {
    pub fn x_positions(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|k| self.grid.coord(k * self.stride))
            .collect()
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.grid.freqs()
    }

    /// Phase-space cell `stride·h × 2π/(N h)`.
    pub fn cell(&self) -> f64 {
        self.stride as f64 * self.grid.step() * self.grid.freq_step()
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() * self.cell()).sqrt()
    }

    pub fn source(&self) -> &SampledDistribution {
        &self.source
    }

    /// `Σ ⟨X⟩^{2s} |V|² · cell` over the box `|x|, |ξ| ≤ half_width`.
    pub fn weighted_mass(&self, s: f64, half_width: f64) -> f64 {
        let xs = self.x_positions();
        let fs = self.freqs();
        let mut acc = 0.0;
        for (k, row) in self.values.iter().enumerate() {
            if xs[k].abs() > half_width {
                continue;
            }
            for (m, v) in row.iter().enumerate() {
                if fs[m].abs() <= half_width {
                    acc += (1.0 + xs[k] * xs[k] + fs[m] * fs[m]).powf(s) * v.norm_sqr();
                }
            }
        }
        acc * self.cell()
    }

    /// Magnitudes as rows of text for CSV dumps.
    pub fn magnitude_rows(&self, x_every: usize, f_every: usize) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .step_by(x_every.max(1))
            .map(|row| row.iter().step_by(f_every.max(1)).map(|z| z.norm()).collect())
            .collect()
    }
}

/// STFT of one-dimensional samples, every x position.
pub fn stft(u: &SampledDistribution, width: f64) -> Result<STFTField> {
    stft_strided(u, width, 1)
}

pub fn stft_strided(u: &SampledDistribution, width: f64, stride: usize) -> Result<STFTField> {
    if u.n() != 1 {
        return Err(Error::NotApplicable(
            "grid STFT is one-dimensional; use a product field for n = 2".into(),
        ));
    }
    if !(width > 0.0) {
        return Err(Error::Invalid(format!("window width {width} must be positive")));
    }
    let stride = stride.max(1);
    let grid = u.grid();
    let np = grid.points;
    let fraction = nyquist_fraction(u.values());
    if fraction > 1e-6 {
        return Err(Error::Aliasing { fraction });
    }
    let h = grid.step();
    let xs = grid.coords();
    let freqs = grid.freqs();
    let half = np / 2;
    let phase: Vec<C64> = freqs
        .iter()
        .map(|&f| C64::from_polar(h, f * grid.extent / 2.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(np);
    let slices: Vec<usize> = (0..np).step_by(stride).collect();
    let values: Vec<Vec<C64>> = crate::par_map(&slices, |&k| {
        let xk = xs[k];
        let mut buf: Vec<C64> = u
            .values()
            .iter()
            .zip(&xs)
            .map(|(v, &x)| v * window(width, x - xk))
            .collect();
        fft.process(&mut buf);
        (0..np).map(|m| buf[(m + np - half) % np] * phase[m]).collect()
    });
    let mut field = STFTField {
        grid,
        width,
        stride,
        values,
        isometry_residual: 0.0,
        source: u.clone(),
    };
    let un = u.norm();
    field.isometry_residual = if un > 0.0 {
        (field.norm() - (2.0 * PI).sqrt() * un).abs() / un
    } else {
        field.norm()
    };
    Ok(field)
}

/// `(2π)^{−1} V_ψ^*` realized slice by slice, normalized by the discrete
/// window energy `Σ_k h ψ(x − x_k)²`.
pub fn istft(field: &STFTField, width: f64) -> Result<SampledDistribution> {
    if (width - field.width).abs() > 1e-12 * field.width {
        return Err(Error::WindowMismatch {
            field: field.width,
            asked: width,
        });
    }
    let grid = field.grid;
    let np = grid.points;
    let half = np / 2;
    let h = grid.step();
    let xs = grid.coords();
    let freqs = grid.freqs();
    let ifft = FftPlanner::new().plan_fft_inverse(np);
    let xk = field.x_positions();
    let mut num = vec![C64::new(0.0, 0.0); np];
    let mut den = vec![0.0; np];
    for (k, row) in field.values.iter().enumerate() {
        let mut buf = vec![C64::new(0.0, 0.0); np];
        for m in 0..np {
            buf[(m + np - half) % np] = row[m] * C64::from_polar(1.0 / h, -freqs[m] * grid.extent / 2.0);
        }
        ifft.process(&mut buf);
        for j in 0..np {
            let w = window(width, xs[j] - xk[k]);
            num[j] += buf[j] / np as f64 * w;
            den[j] += w * w;
        }
    }
    let values = num
        .into_iter()
        .zip(den)
        .map(|(a, d)| if d > 0.0 { a / d } else { C64::new(0.0, 0.0) })
        .collect();
    SampledDistribution::new(1, grid, values)
}

/// Anything that can report `V_ψu` at an arbitrary phase-space point.
pub trait PhaseSpaceField: Sync {
    fn n(&self) -> usize;

    fn eval(&self, point: &[f64]) -> C64;

    fn eval_many(&self, points: &[Vec<f64>]) -> Vec<C64> {
        crate::par_map(points, |p| self.eval(p))
    }

    /// Full widths of the resolved region per phase-space axis.
    fn extent(&self) -> Vec<f64>;
}

/// Exact `V_ψu(x, ξ)` by direct quadrature over the samples.
#[derive(Debug, Clone)]
pub struct DirectField {
    u: SampledDistribution,
    width: f64,
}

impl DirectField {
    pub fn new(u: SampledDistribution, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Invalid(format!("window width {width} must be positive")));
        }
        Ok(Self { u, width })
    }

    pub fn source(&self) -> &SampledDistribution {
        &self.u
    }

    fn index_range(&self, center: f64) -> std::ops::Range<usize> {
        let grid = self.u.grid();
        let h = grid.step();
        let reach = window_reach(self.width);
        let lo = ((center - reach + grid.extent / 2.0) / h).floor().max(0.0) as usize;
        let hi =
            (((center + reach + grid.extent / 2.0) / h).ceil() as isize + 1).clamp(0, grid.points as isize) as usize;
        lo.min(hi)..hi
    }
}

impl PhaseSpaceField for DirectField {
    fn n(&self) -> usize {
        self.u.n()
    }

    fn eval(&self, p: &[f64]) -> C64 {
        let grid = self.u.grid();
        let h = grid.step();
        let vals = self.u.values();
        match self.u.n() {
            1 => {
                let (x, xi) = (p[0], p[1]);
                let mut acc = C64::new(0.0, 0.0);
                for j in self.index_range(x) {
                    let y = grid.coord(j);
                    acc += vals[j] * C64::from_polar(window(self.width, y - x), -xi * y);
                }
                acc * h
            }
            _ => {
                let np = grid.points;
                let (x1, x2, f1, f2) = (p[0], p[1], p[2], p[3]);
                let r2: Vec<(usize, C64)> = self
                    .index_range(x2)
                    .map(|j| {
                        let y = grid.coord(j);
                        (j, C64::from_polar(window(self.width, y - x2), -f2 * y))
                    })
                    .collect();
                let mut acc = C64::new(0.0, 0.0);
                for i in self.index_range(x1) {
                    let y = grid.coord(i);
                    let w1 = C64::from_polar(window(self.width, y - x1), -f1 * y);
                    let row: C64 = r2.iter().map(|(j, w)| vals[i * np + j] * w).sum();
                    acc += w1 * row;
                }
                acc * h * h
            }
        }
    }

    fn extent(&self) -> Vec<f64> {
        let g = self.u.grid();
        let n = self.u.n();
        let mut out = vec![g.extent; n];
        out.extend(std::iter::repeat_n(2.0 * PI / g.step(), n));
        out
    }
}

/// `V_ψ(u_1 ⊗ … ⊗ u_n) = Π V_ψu_j` for separable data.
#[derive(Debug, Clone)]
pub struct ProductField {
    factors: Vec<DirectField>,
}

impl ProductField {
    pub fn new(factors: Vec<DirectField>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.n() != 1) {
            return Err(Error::Invalid("product field needs one-dimensional factors".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[DirectField] {
        &self.factors
    }
}

fn key(a: f64, b: f64) -> (u64, u64) {
    (a.to_bits(), b.to_bits())
}

impl PhaseSpaceField for ProductField {
    fn n(&self) -> usize {
        self.factors.len()
    }

    fn eval(&self, p: &[f64]) -> C64 {
        let n = self.factors.len();
        self.factors
            .iter()
            .enumerate()
            .map(|(j, f)| f.eval(&[p[j], p[n + j]]))
            .product()
    }

    fn eval_many(&self, points: &[Vec<f64>]) -> Vec<C64> {
        let n = self.factors.len();
        let mut out = vec![C64::new(1.0, 0.0); points.len()];
        for (j, f) in self.factors.iter().enumerate() {
            let mut uniq: HashMap<(u64, u64), usize> = HashMap::new();
            let mut coords: Vec<Vec<f64>> = Vec::new();
            let slots: Vec<usize> = points
                .iter()
                .map(|p| {
                    *uniq.entry(key(p[j], p[n + j])).or_insert_with(|| {
                        coords.push(vec![p[j], p[n + j]]);
                        coords.len() - 1
                    })
                })
                .collect();
            let vals = f.eval_many(&coords);
            for (o, s) in out.iter_mut().zip(slots) {
                *o *= vals[s];
            }
        }
        out
    }

    fn extent(&self) -> Vec<f64> {
        let n = self.factors.len();
        let mut out = vec![0.0; 2 * n];
        for (j, f) in self.factors.iter().enumerate() {
            let e = f.extent();
            out[j] = e[0];
            out[n + j] = e[1];
        }
        out
    }
}
