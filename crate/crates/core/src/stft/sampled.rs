use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RMat, C64};
use crate::quantization::hermite_functions;
use crate::wavefront::{self, ConicSet};

/// Origin-centred grid `x_j = −L/2 + j·h`, `h = L/N`, `N` even.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub extent: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if points < 2 || !points.is_multiple_of(2) {
            return Err(Error::Invalid(format!("grid needs an even point count, got {points}")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Invalid(format!("grid extent {extent} must be positive")));
        }
        Ok(Self { extent, points })
    }

    pub fn step(&self) -> f64 {
        self.extent / self.points as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.extent + j as f64 * self.step()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.coord(j)).collect()
    }

    /// Frequency step of the FFT grid, `2π/(N h)`.
    pub fn freq_step(&self) -> f64 {
        2.0 * PI / (self.points as f64 * self.step())
    }

    /// Centred FFT frequencies `ξ_m = (m − N/2)·2π/(N h)`.
    pub fn freqs(&self) -> Vec<f64> {
        let half = (self.points / 2) as f64;
        (0..self.points).map(|m| (m as f64 - half) * self.freq_step()).collect()
    }
}

/// Samples of a function on `R^n` over the tensor grid, axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDistribution {
    n: usize,
    grid: Grid,
    values: Vec<C64>,
    pub class: Option<String>,
}

impl SampledDistribution {
    pub fn new(n: usize, grid: Grid, values: Vec<C64>) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(Error::Invalid(format!("sampled data supports n = 1 or 2, got {n}")));
        }
        if values.len() != grid.points.pow(n as u32) {
            return Err(Error::Invalid(format!(
                "{} samples for an {}-point grid in {n} dimensions",
                values.len(),
                grid.points
            )));
        }
        Ok(Self {
            n,
            grid,
            values,
            class: None,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> C64>(n: usize, grid: Grid, f: F) -> Result<Self> {
        let xs = grid.coords();
        let values = match n {
            1 => xs.iter().map(|&x| f(&[x])).collect(),
            2 => xs
                .iter()
                .flat_map(|&a| xs.iter().map(move |&b| (a, b)))
                .map(|(a, b)| f(&[a, b]))
                .collect(),
            _ => return Err(Error::Invalid(format!("sampled data supports n = 1 or 2, got {n}"))),
        };
        Self::new(n, grid, values)
    }

    pub fn zeros(n: usize, grid: Grid) -> Result<Self> {
        Self::new(n, grid, vec![C64::new(0.0, 0.0); grid.points.pow(n as u32)])
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.class = Some(class.into());
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn cell(&self) -> f64 {
        self.grid.step().powi(self.n as i32)
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell()).sqrt()
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖`.
    pub fn rel_error(&self, other: &SampledDistribution) -> f64 {
        let diff: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let base: f64 = other.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if base == 0.0 {
            diff
        } else {
            diff / base
        }
    }

    /// Largest magnitude on the outermost grid layer relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let np = self.grid.points;
        let edge = |j: usize| j == 0 || j == np - 1;
        let worst = match self.n {
            1 => self.values[0].norm().max(self.values[np - 1].norm()),
            _ => (0..np * np)
                .filter(|&i| edge(i / np) || edge(i % np))
                .map(|i| self.values[i].norm())
                .fold(0.0, f64::max),
        };
        worst / peak
    }

    /// Warning text when the data do not decay before the grid edge.
    pub fn boundary_warning(&self) -> Option<String> {
        let ratio = self.boundary_ratio();
        (ratio >= 1e-8).then(|| format!("boundary magnitude {ratio:.2e} of peak exceeds 1e-8"))
    }

    pub fn scale(&mut self, s: C64) {
        self.values.iter_mut().for_each(|z| *z *= s);
    }
}

fn default_zero() -> f64 {
    0.0
}

fn default_cells() -> f64 {
    2.5
}

/// Initial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Datum {
    /// `e^{−(x−x0)²/(2w²)}`, L²-normalized.
    GaussianBump {
        #[serde(default = "default_zero")]
        center: f64,
        width: f64,
    },
    /// Gaussian bump modulated by `e^{iξ0 x}`.
    ModulatedBump {
        #[serde(default = "default_zero")]
        center: f64,
        width: f64,
        freq: f64,
    },
    /// δ-approximant: a centred bump of width `cells` grid steps.
    Delta {
        #[serde(default = "default_cells")]
        cells: f64,
    },
    /// `e^{icx²} e^{−x²/(2W²)}`, L²-normalized.
    Chirp {
        c: f64,
        width: f64,
    },
    Hermite {
        k: usize,
    },
    /// Tensor product, one factor per coordinate.
    Product {
        factors: Vec<Datum>,
    },
}

/// Bumps at most this wide are declared singular along the frequency axis.
pub const NARROW_WIDTH: f64 = 0.3;

impl Datum {
    pub fn n(&self) -> usize {
        match self {
            Datum::Product { factors } => factors.iter().map(Datum::n).sum(),
            _ => 1,
        }
    }

    fn bump(x: f64, center: f64, width: f64) -> f64 {
        (PI * width * width).powf(-0.25) * (-(x - center).powi(2) / (2.0 * width * width)).exp()
    }

    /// Pointwise value of a one-dimensional family.
    pub fn eval1(&self, x: f64, grid: &Grid) -> Result<C64> {
        Ok(match self {
            Datum::GaussianBump { center, width } => C64::new(Self::bump(x, *center, *width), 0.0),
            Datum::ModulatedBump { center, width, freq } => C64::from_polar(Self::bump(x, *center, *width), freq * x),
            Datum::Delta { cells } => C64::new(Self::bump(x, 0.0, cells * grid.step()), 0.0),
            Datum::Chirp { c, width } => C64::from_polar(Self::bump(x, 0.0, *width), c * x * x),
            Datum::Hermite { k } => C64::new(hermite_functions(*k, x)[*k], 0.0),
            Datum::Product { .. } => return Err(Error::Invalid("product data have no one-dimensional value".into())),
        })
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Datum::GaussianBump { width, .. } | Datum::ModulatedBump { width, .. } | Datum::Chirp { width, .. }
                if !(*width > 0.0) =>
            {
                Err(Error::Invalid(format!("bump width {width} must be positive")))
            }
            Datum::Delta { cells } if !(*cells > 0.0) => {
                Err(Error::Invalid(format!("delta width {cells} cells must be positive")))
            }
            Datum::Product { factors } => {
                if factors.is_empty() || factors.iter().any(|f| matches!(f, Datum::Product { .. })) {
                    return Err(Error::Invalid("product needs one-dimensional factors".into()));
                }
                factors.iter().try_for_each(Datum::check)
            }
            _ => Ok(()),
        }
    }

    /// One-dimensional factors; a single factor for non-product data.
    pub fn factors(&self) -> Vec<Datum> {
        match self {
            Datum::Product { factors } => factors.clone(),
            other => vec![other.clone()],
        }
    }

    pub fn class(&self) -> String {
        match self {
            Datum::GaussianBump { .. } => "gaussian-bump".into(),
            Datum::ModulatedBump { .. } => "modulated-bump".into(),
            Datum::Delta { .. } => "delta".into(),
            Datum::Chirp { .. } => "chirp".into(),
            Datum::Hermite { .. } => "hermite".into(),
            Datum::Product { factors } => {
                let parts: Vec<String> = factors.iter().map(Datum::class).collect();
                format!("product({})", parts.join(","))
            }
        }
    }

    pub fn sample(&self, grid: Grid) -> Result<SampledDistribution> {
        self.check()?;
        let factors = self.factors();
        let n = factors.len();
        let tables = factors
            .iter()
            .map(|f| {
                grid.coords()
                    .iter()
                    .map(|&x| f.eval1(x, &grid))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let values = match n {
            1 => tables[0].clone(),
            2 => tables[0]
                .iter()
                .flat_map(|a| tables[1].iter().map(move |b| a * b))
                .collect(),
            _ => return Err(Error::Invalid(format!("sampled data support n = 1 or 2, got {n}"))),
        };
        Ok(SampledDistribution::new(n, grid, values)?.with_class(self.class()))
    }

    /// Declared isotropic wave-front set of the family at desk scale.
    pub fn declared_wf(&self) -> Result<ConicSet> {
        let line = |v: [f64; 2]| ConicSet::from_subspace(RMat::from_column_slice(2, 1, &v));
        match self {
            Datum::Delta { .. } => line([0.0, 1.0]),
            Datum::GaussianBump { width, .. } | Datum::ModulatedBump { width, .. } => {
                if *width <= NARROW_WIDTH {
                    line([0.0, 1.0])
                } else {
                    Ok(ConicSet::empty(2))
                }
            }
            Datum::Chirp { c, .. } => {
                let d = DVector::from_vec(vec![1.0, 2.0 * c]).normalize();
                line([d[0], d[1]])
            }
            Datum::Hermite { .. } => Ok(ConicSet::empty(2)),
            Datum::Product { factors } => {
                let mut acc = factors[0].declared_wf()?;
                for f in &factors[1..] {
                    acc = wavefront::tensor(&acc, &f.declared_wf()?, 0.0, 0.0)?.set;
                }
                Ok(acc)
            }
        }
    }
}
