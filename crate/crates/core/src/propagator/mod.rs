//! Evolution `u(t) = e^{−tA}u₀` for quadratic `A = Op^w(a)`.

mod kernel;
mod probe;

pub use kernel::{mehler_kernel, AxisKernel, GaussianKernel, KernelFamily};
pub use probe::{kernel_sobolev_probe, probe_at_order, KernelProbe};

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ExpLog, C64};
use crate::quantization::{hermite_coefficients, hermite_synthesize, opw_quadratic, HermiteBasis};
use crate::stft::{Grid, SampledDistribution};
use crate::symplectic::QuadraticSymbol;

/// Samples below this fraction of the peak are outside the data support.
const SUPPORT_REL: f64 = 1e-13;
/// Longest Mehler step when splitting.
const MEHLER_STEP: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    HermiteSpectral,
    FourierMultiplier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSpec {
    pub sym: QuadraticSymbol,
    pub t: f64,
    pub method: Method,
    /// Hermite truncation degree for the spectral method.
    pub k_max: Option<usize>,
    /// Compose Mehler steps when the time leaves `(0, π/2)`.
    pub splitting: bool,
}

impl PropagatorSpec {
    pub fn new(sym: QuadraticSymbol, t: f64, method: Method) -> Self {
        Self {
            sym,
            t,
            method,
            k_max: None,
            splitting: true,
        }
    }

    pub fn with_time(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }

    /// First applicable method in the order closed form, Fourier multiplier, spectral.
    pub fn auto_method(sym: &QuadraticSymbol) -> Method {
        if axis_families(sym).is_some() {
            Method::ClosedForm
        } else if depends_on_frequency_only(sym) {
            Method::FourierMultiplier
        } else {
            Method::HermiteSpectral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AxisFamily {
    Identity,
    Diffusion(C64),
    Potential(C64),
    MehlerHyperbolic(f64),
    MehlerOscillatory(f64),
}

fn negligible(z: C64, scale: f64) -> bool {
    z.norm() <= 1e-14 * scale
}

/// Per-axis 1-D symbols when `Q` has no coupling between axes.
pub fn split_axes(sym: &QuadraticSymbol) -> Option<Vec<QuadraticSymbol>> {
    let n = sym.n();
    let q = sym.matrix();
    let scale = q.norm().max(1.0);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        for &row in &[j, n + j] {
            for col in 0..2 * n {
                if col != j && col != n + j && !negligible(q[(row, col)], scale) {
                    return None;
                }
            }
        }
        let block = CMat::from_row_slice(2, 2, &[q[(j, j)], q[(j, n + j)], q[(n + j, j)], q[(n + j, n + j)]]);
        out.push(QuadraticSymbol::new(1, block).ok()?);
    }
    Some(out)
}

fn axis_families(sym: &QuadraticSymbol) -> Option<Vec<AxisFamily>> {
    let scale = sym.matrix().norm().max(1.0);
    split_axes(sym)?
        .iter()
        .map(|s| {
            let q = s.matrix();
            let (alpha, beta, gamma) = (q[(0, 0)], q[(1, 1)], q[(0, 1)]);
            if !negligible(gamma, scale) {
                return None;
            }
            match (negligible(alpha, scale), negligible(beta, scale)) {
                (true, true) => Some(AxisFamily::Identity),
                (true, false) => Some(AxisFamily::Diffusion(beta)),
                (false, true) => Some(AxisFamily::Potential(alpha)),
                (false, false) if (alpha - beta).norm() <= 1e-12 * alpha.norm() => {
                    if negligible(C64::new(0.0, alpha.im), scale) {
                        Some(AxisFamily::MehlerHyperbolic(alpha.re))
                    } else if negligible(C64::new(alpha.re, 0.0), scale) {
                        Some(AxisFamily::MehlerOscillatory(alpha.im))
                    } else {
                        None
                    }
                }
                _ => None,
            }
        })
        .collect()
}

fn depends_on_frequency_only(sym: &QuadraticSymbol) -> bool {
    let n = sym.n();
    let q = sym.matrix();
    let scale = q.norm().max(1.0);
    (0..2 * n).all(|i| (0..2 * n).all(|j| (i >= n && j >= n) || negligible(q[(i, j)], scale)))
}

/// Closed-form kernel of `e^{−tA}` when every axis carries a single registered Gaussian.
pub fn closed_form_kernel(sym: &QuadraticSymbol, t: f64) -> Result<GaussianKernel> {
    let fams =
        axis_families(sym).ok_or_else(|| Error::NotApplicable("symbol is not in a registered kernel family".into()))?;
    let axes = fams
        .into_iter()
        .map(|f| match f {
            AxisFamily::Diffusion(beta) => AxisKernel::diffusion(beta * t),
            AxisFamily::MehlerHyperbolic(l) => AxisKernel::mehler_hyperbolic(l * t),
            AxisFamily::MehlerOscillatory(l) => AxisKernel::mehler_oscillatory(l * t),
            AxisFamily::Identity | AxisFamily::Potential(_) => Err(Error::NotApplicable(
                "identity and potential axes have no Gaussian kernel".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianKernel::new(axes)
}

#[derive(Debug, Clone)]
enum AxisStep {
    Identity,
    Multiply(C64),
    Kernels(Vec<AxisKernel>),
}

#[derive(Debug, Clone)]
enum Plan {
    Identity,
    Closed(Vec<AxisStep>),
    Fourier(CMat),
    Spectral {
        basis: HermiteBasis,
        exp: CMat,
        log: ExpLog,
    },
}

/// A prepared `e^{−tA}`; spectral exponentials are computed once here.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: PropagatorSpec,
    plan: Plan,
}

fn mehler_steps(tau: f64, splitting: bool) -> Result<Vec<f64>> {
    let steps = (tau.abs() / MEHLER_STEP).ceil().max(1.0) as usize;
    if steps > 1 && !splitting {
        return Err(Error::TimeOutOfRange(tau));
    }
    Ok(vec![tau / steps as f64; steps])
}

impl Propagator {
    pub fn new(spec: PropagatorSpec) -> Result<Self> {
        if !(spec.t >= 0.0) || !spec.t.is_finite() {
            return Err(Error::Invalid(format!("time {} must be finite and >= 0", spec.t)));
        }
        if spec.sym.n() > 2 {
            return Err(Error::NotApplicable("sampled evolution supports n <= 2".into()));
        }
        if spec.t == 0.0 {
            return Ok(Self {
                spec,
                plan: Plan::Identity,
            });
        }
        let t = spec.t;
        let plan = match spec.method {
            Method::ClosedForm => {
                let fams = axis_families(&spec.sym).ok_or_else(|| {
                    Error::NotApplicable("closed form needs decoupled axes in a registered family".into())
                })?;
                let steps = fams
                    .into_iter()
                    .map(|f| -> Result<AxisStep> {
                        Ok(match f {
                            AxisFamily::Identity => AxisStep::Identity,
                            AxisFamily::Potential(alpha) => AxisStep::Multiply(alpha * t),
                            AxisFamily::Diffusion(beta) => AxisStep::Kernels(vec![AxisKernel::diffusion(beta * t)?]),
                            AxisFamily::MehlerHyperbolic(l) => AxisStep::Kernels(
                                mehler_steps(l * t, spec.splitting)?
                                    .into_iter()
                                    .map(AxisKernel::mehler_hyperbolic)
                                    .collect::<Result<_>>()?,
                            ),
                            AxisFamily::MehlerOscillatory(l) => AxisStep::Kernels(
                                mehler_steps(l * t, spec.splitting)?
                                    .into_iter()
                                    .map(AxisKernel::mehler_oscillatory)
                                    .collect::<Result<_>>()?,
                            ),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Plan::Closed(steps)
            }
            Method::FourierMultiplier => {
                if !depends_on_frequency_only(&spec.sym) {
                    return Err(Error::NotApplicable(
                        "Fourier multiplier needs a symbol of ξ alone".into(),
                    ));
                }
                let n = spec.sym.n();
                Plan::Fourier(spec.sym.matrix().view((n, n), (n, n)).into_owned() * C64::new(t, 0.0))
            }
            Method::HermiteSpectral => {
                let n = spec.sym.n();
                let basis = match spec.k_max {
                    Some(k) => HermiteBasis::new(n, k),
                    None => HermiteBasis::default_for(n),
                };
                let m = opw_quadratic(&spec.sym.to_poly(), &basis)?.matrix;
                let (exp, log) = linalg::expm(&(m * C64::new(-t, 0.0)));
                Plan::Spectral { basis, exp, log }
            }
        };
        Ok(Self { spec, plan })
    }

    pub fn spec(&self) -> &PropagatorSpec {
        &self.spec
    }

    pub fn method(&self) -> Method {
        self.spec.method
    }

    pub fn expm_log(&self) -> Option<&ExpLog> {
        match &self.plan {
            Plan::Spectral { log, .. } => Some(log),
            _ => None,
        }
    }

    pub fn apply(&self, u0: &SampledDistribution) -> Result<SampledDistribution> {
        if u0.n() != self.spec.sym.n() {
            return Err(Error::Invalid(format!(
                "data in dimension {} for a symbol in dimension {}",
                u0.n(),
                self.spec.sym.n()
            )));
        }
        let grid = u0.grid();
        let n = u0.n();
        let values = match &self.plan {
            Plan::Identity => return Ok(u0.clone()),
            Plan::Closed(steps) => {
                let mut cur = u0.values().to_vec();
                for (axis, step) in steps.iter().enumerate() {
                    cur = match step {
                        AxisStep::Identity => cur,
                        AxisStep::Multiply(at) => {
                            let xs = grid.coords();
                            let factors: Vec<C64> = xs.iter().map(|x| (-at * (x * x)).exp()).collect();
                            map_lines(&cur, n, grid.points, axis, |line| {
                                line.iter().zip(&factors).map(|(v, f)| v * f).collect()
                            })
                        }
                        AxisStep::Kernels(ks) => {
                            let mut v = cur;
                            for k in ks {
                                v = apply_kernel_axis(&v, n, grid, axis, k)?;
                            }
                            v
                        }
                    };
                }
                cur
            }
            Plan::Fourier(qxi) => fourier_multiplier(u0, qxi),
            Plan::Spectral { basis, exp, .. } => {
                let c = hermite_coefficients(u0, basis)?;
                let total = u0.norm().powi(2);
                let captured: f64 = c.iter().map(|z| z.norm_sqr()).sum();
                if total > 0.0 && 1.0 - captured / total > 0.01 {
                    return Err(Error::TruncationTail {
                        fraction: 1.0 - captured / total,
                    });
                }
                let cv = nalgebra::DVector::from_vec(c);
                let ct = exp * cv;
                let top: f64 = ct
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| basis.degree(*i) == basis.k_max())
                    .map(|(_, z)| z.norm_sqr())
                    .sum();
                let all: f64 = ct.iter().map(|z| z.norm_sqr()).sum();
                if all > 0.0 && top / all > 0.01 {
                    return Err(Error::TruncationTail { fraction: top / all });
                }
                hermite_synthesize(basis, ct.as_slice(), grid)?.into_values()
            }
        };
        let out = SampledDistribution::new(n, grid, values)?;
        Ok(match &u0.class {
            Some(c) => out.with_class(c.clone()),
            None => out,
        })
    }
}

pub fn evolve(u0: &SampledDistribution, spec: &PropagatorSpec) -> Result<SampledDistribution> {
    Propagator::new(spec.clone())?.apply(u0)
}

/// Evolves tensor-product data factor by factor; needs decoupled axes.
pub fn evolve_product(factors: &[SampledDistribution], spec: &PropagatorSpec) -> Result<Vec<SampledDistribution>> {
    let axes = split_axes(&spec.sym).ok_or_else(|| {
        Error::NotApplicable("symbol couples the axes; product data cannot be evolved per factor".into())
    })?;
    if axes.len() != factors.len() {
        return Err(Error::Invalid(format!(
            "{} factors for {} axes",
            factors.len(),
            axes.len()
        )));
    }
    axes.into_iter()
        .zip(factors)
        .map(|(sym, f)| {
            let method = match spec.method {
                Method::ClosedForm if axis_families(&sym).is_none() => PropagatorSpec::auto_method(&sym),
                m => m,
            };
            let k_max = spec.k_max.or(Some(HermiteBasis::default_for(1).k_max()));
            evolve(
                f,
                &PropagatorSpec {
                    sym,
                    method,
                    k_max,
                    ..spec.clone()
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupReport {
    pub t1: f64,
    pub t2: f64,
    pub method: Method,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// `max ‖U(t1)U(t2)u − U(t1+t2)u‖ / ‖U(t1+t2)u‖` over the corpus.
pub fn check_semigroup(
    spec: &PropagatorSpec,
    t1: f64,
    t2: f64,
    corpus: &[SampledDistribution],
) -> Result<SemigroupReport> {
    let p1 = Propagator::new(spec.with_time(t1))?;
    let p2 = Propagator::new(spec.with_time(t2))?;
    let p12 = Propagator::new(spec.with_time(t1 + t2))?;
    let residuals = corpus
        .iter()
        .map(|u| -> Result<f64> {
            let two = p1.apply(&p2.apply(u)?)?;
            let one = p12.apply(u)?;
            Ok(two.rel_error(&one))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SemigroupReport {
        t1,
        t2,
        method: spec.method,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
    })
}

/// Applies `f` to every 1-D line of the array along `axis`.
fn map_lines<F>(values: &[C64], n: usize, np: usize, axis: usize, f: F) -> Vec<C64>
where
    F: Fn(&[C64]) -> Vec<C64> + Sync + Send,
{
    if n == 1 {
        return f(values);
    }
    let stride = if axis == 0 { np } else { 1 };
    let starts: Vec<usize> = (0..np).map(|l| if axis == 0 { l } else { l * np }).collect();
    let lines = crate::par_map(&starts, |&s| {
        let line: Vec<C64> = (0..np).map(|i| values[s + i * stride]).collect();
        f(&line)
    });
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for (s, line) in starts.iter().zip(lines) {
        for (i, v) in line.into_iter().enumerate() {
            out[s + i * stride] = v;
        }
    }
    out
}

/// Indices of grid points along `axis` where some line exceeds the support cut.
fn axis_support(values: &[C64], n: usize, np: usize, axis: usize) -> Vec<usize> {
    let peak = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cut = SUPPORT_REL * peak;
    let mut marginal = vec![0.0f64; np];
    for (idx, v) in values.iter().enumerate() {
        let i = if n == 1 || axis == 1 { idx % np } else { idx / np };
        marginal[i] = marginal[i].max(v.norm());
    }
    (0..np).filter(|&i| marginal[i] > cut).collect()
}

fn apply_kernel_axis(values: &[C64], n: usize, grid: Grid, axis: usize, k: &AxisKernel) -> Result<Vec<C64>> {
    let np = grid.points;
    let h = grid.step();
    let xs = grid.coords();
    let support = axis_support(values, n, np, axis);
    if support.is_empty() {
        return Ok(values.to_vec());
    }
    if k.is_oscillatory() {
        let (lo, hi) = (xs[support[0]], xs[*support.last().expect("nonempty")]);
        let x_max = xs[0].abs().max(xs[np - 1].abs());
        let value = h * k.max_phase_gradient(x_max, lo, hi);
        if value >= PI / 2.0 {
            return Err(Error::Unresolved { value });
        }
    }
    let scaled = k.c * h;
    if n == 1 {
        // exp of the exponent along y by a multiplicative recurrence, restarted
        // every BLOCK points to bound roundoff
        const BLOCK: usize = 64;
        let (lo, hi) = (support[0], *support.last().expect("nonempty"));
        let rho = (k.q_yy * (2.0 * h * h)).exp();
        let idx: Vec<usize> = (0..np).collect();
        return Ok(crate::par_map(&idx, |&i| {
            let x = xs[i];
            let mut acc = C64::new(0.0, 0.0);
            let mut j = lo;
            while j <= hi {
                let end = (j + BLOCK).min(hi + 1);
                let mut kv = k.exponent(x, xs[j]).exp();
                let mut ratio = (k.q_xy * (2.0 * x * h) + k.q_yy * (2.0 * xs[j] * h + h * h)).exp();
                for v in &values[j..end] {
                    acc += kv * v;
                    kv *= ratio;
                    ratio *= rho;
                }
                j = end;
            }
            acc * scaled
        }));
    }
    let matrix: Vec<Vec<C64>> = {
        let idx: Vec<usize> = (0..np).collect();
        crate::par_map(&idx, |&i| {
            support
                .iter()
                .map(|&j| k.exponent(xs[i], xs[j]).exp() * scaled)
                .collect()
        })
    };
    Ok(map_lines(values, n, np, axis, |line| {
        matrix
            .iter()
            .map(|row| row.iter().zip(&support).map(|(kv, &j)| kv * line[j]).sum())
            .collect()
    }))
}

fn fft_axis(values: &[C64], n: usize, np: usize, axis: usize, inverse: bool) -> Vec<C64> {
    let plan = if inverse {
        FftPlanner::new().plan_fft_inverse(np)
    } else {
        FftPlanner::new().plan_fft_forward(np)
    };
    map_lines(values, n, np, axis, |line| {
        let mut buf = line.to_vec();
        plan.process(&mut buf);
        buf
    })
}

fn fourier_multiplier(u: &SampledDistribution, tq: &CMat) -> Vec<C64> {
    let grid = u.grid();
    let (n, np) = (u.n(), grid.points);
    let fstep = grid.freq_step();
    let freq = |m: usize| if m < np / 2 { m as f64 } else { m as f64 - np as f64 } * fstep;
    let mut v = u.values().to_vec();
    for axis in 0..n {
        v = fft_axis(&v, n, np, axis, false);
    }
    for (idx, z) in v.iter_mut().enumerate() {
        let xi: Vec<f64> = if n == 1 {
            vec![freq(idx)]
        } else {
            vec![freq(idx / np), freq(idx % np)]
        };
        let mut a = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                a += tq[(i, j)] * (xi[i] * xi[j]);
            }
        }
        *z *= (-a).exp();
    }
    for axis in 0..n {
        v = fft_axis(&v, n, np, axis, true);
    }
    let norm = (np as f64).powi(n as i32);
    v.into_iter().map(|z| z / norm).collect()
}
