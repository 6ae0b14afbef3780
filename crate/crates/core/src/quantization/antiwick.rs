use crate::error::{Error, Result};

/// Uniform tensor grid on phase space, row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub starts: Vec<f64>,
    pub steps: Vec<f64>,
    pub counts: Vec<usize>,
}

impl PhaseGrid {
    /// `count` points per axis on `[−half_width, half_width]`, endpoints included.
    pub fn uniform(dim: usize, half_width: f64, count: usize) -> Self {
        let step = 2.0 * half_width / (count as f64 - 1.0);
        Self {
            starts: vec![-half_width; dim],
            steps: vec![step; dim],
            counts: vec![count; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps.iter().product()
    }

    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for ax in (0..self.dim()).rev() {
            let i = flat % self.counts[ax];
            flat /= self.counts[ax];
            p[ax] = self.starts[ax] + i as f64 * self.steps[ax];
        }
        p
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AntiWick {
    pub values: Vec<f64>,
    pub warning: Option<String>,
}

/// `b = π^{−n} e^{−|·|²} * a` by separable direct convolution, zero outside the grid.
pub fn anti_wick_smooth(grid: &PhaseGrid, a: &[f64]) -> Result<AntiWick> {
    if a.len() != grid.len() {
        return Err(Error::Invalid(format!(
            "{} samples for a grid of {} points",
            a.len(),
            grid.len()
        )));
    }
    let coarsest = grid.steps.iter().copied().fold(0.0, f64::max);
    let warning = (coarsest > 1.0 / 6.0)
        .then(|| format!("grid step {coarsest} resolves fewer than 6 points per unit; the Gaussian is under-sampled"));
    let mut cur = a.to_vec();
    let dim = grid.dim();
    for ax in 0..dim {
        let h = grid.steps[ax];
        let reach = (8.5 / h).ceil() as isize;
        let weights: Vec<f64> = (-reach..=reach)
            .map(|m| {
                let y = m as f64 * h;
                std::f64::consts::PI.powf(-0.5) * (-y * y).exp() * h
            })
            .collect();
        let count = grid.counts[ax] as isize;
        let stride: usize = grid.counts[ax + 1..].iter().product();
        let outer: usize = grid.counts[..ax].iter().product();
        let mut next = vec![0.0; cur.len()];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * grid.counts[ax] * stride + inner;
                for i in 0..count {
                    let lo = (i - reach).max(0);
                    let hi = (i + reach).min(count - 1);
                    let mut acc = 0.0;
                    for j in lo..=hi {
                        acc += weights[(j - i + reach) as usize] * cur[base + j as usize * stride];
                    }
                    next[base + i as usize * stride] = acc;
                }
            }
        }
        cur = next;
    }
    Ok(AntiWick { values: cur, warning })
}
