//! Self-checks behind `isowf verify`: worked matrices, singular-space
//! identities, normality, STFT isometry, propagator consistency and the
//! indicator-norm plateau.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SCHEMA;
use crate::error::Result;
use crate::linalg::{self, CMat, RMat, C64};
use crate::propagator::{check_semigroup, evolve, Method, PropagatorSpec};
use crate::quantization::{indicator_box_norm, normality_defect, HermiteBasis};
use crate::stft::{istft, stft, Datum, Grid, SampledDistribution};
use crate::symplectic::{hamilton_map, poisson_bracket, FlowKind, QuadraticSymbol};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn at_most(&mut self, criterion: u8, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(Check {
            criterion,
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        });
    }

    fn at_least(&mut self, criterion: u8, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(Check {
            criterion,
            name: name.into(),
            value,
            limit,
            passed: value >= limit,
        });
    }
}

fn diag_symbol(n: usize, entries: &[C64]) -> Result<QuadraticSymbol> {
    QuadraticSymbol::new(n, CMat::from_diagonal(&DVector::from_column_slice(entries)))
}

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn im(v: f64) -> C64 {
    C64::new(0.0, v)
}

/// `|X'|² + i|X''|²` with `n1 = n2 = 1`, coordinates `(x', x'', ξ', ξ'')`.
pub fn mixed_oscillator() -> QuadraticSymbol {
    diag_symbol(2, &[re(1.0), im(1.0), re(1.0), im(1.0)]).expect("admissible")
}

/// `ξ² + i x²`: bracket `{a, ā}` nonzero and `S = {0}`, a strict subset of
/// `Ker Re F`.
pub fn non_normal_example() -> QuadraticSymbol {
    diag_symbol(1, &[im(1.0), re(1.0)]).expect("admissible")
}

/// Heat, free Schrödinger, real potential, both oscillators, mixed oscillator.
pub fn named_symbols() -> Vec<(&'static str, QuadraticSymbol)> {
    vec![
        ("heat", diag_symbol(1, &[re(0.0), re(1.0)])),
        ("free-schrodinger", diag_symbol(1, &[re(0.0), im(1.0)])),
        ("potential", diag_symbol(1, &[re(1.0), re(0.0)])),
        ("oscillator", diag_symbol(1, &[re(1.0), re(1.0)])),
        ("imaginary-oscillator", diag_symbol(1, &[im(1.0), im(1.0)])),
    ]
    .into_iter()
    .map(|(name, s)| (name, s.expect("admissible")))
    .chain(std::iter::once(("mixed-oscillator", mixed_oscillator())))
    .collect()
}

fn random_symmetric<R: Rng>(rng: &mut R, dim: usize, amp: f64) -> RMat {
    let a = RMat::from_fn(dim, dim, |_, _| rng.gen_range(-amp..amp));
    (&a + a.transpose()) * 0.5
}

/// Random admissible `Q` in dimension `n`. Half the draws are a block form
/// with a nontrivial singular space moved by a random symplectic shear.
pub fn random_symbol<R: Rng>(rng: &mut R, n: usize) -> Result<QuadraticSymbol> {
    let dim = 2 * n;
    if n == 1 || rng.gen_bool(0.5) {
        let rank = rng.gen_range(1..=dim);
        let g = RMat::from_fn(dim, rank, |_, _| rng.gen_range(-1.0..1.0));
        let re_q = &g * g.transpose();
        let im_q = random_symmetric(rng, dim, 1.0);
        return QuadraticSymbol::from_real_imag(&re_q, &im_q);
    }
    // dissipative block on (x', ξ'), the last n2 coordinates carry Im only
    let n1 = rng.gen_range(1..n);
    let idx1: Vec<usize> = (0..n1).chain(n..n + n1).collect();
    let idx2: Vec<usize> = (n1..n).chain(n + n1..dim).collect();
    let g = RMat::from_fn(2 * n1, 2 * n1, |_, _| rng.gen_range(-1.0..1.0));
    let block_re = &g * g.transpose() + RMat::identity(2 * n1, 2 * n1) * 0.2;
    let block_im1 = random_symmetric(rng, 2 * n1, 1.0);
    let block_im2 = random_symmetric(rng, 2 * (n - n1), 1.0);
    let mut re_q = RMat::zeros(dim, dim);
    let mut im_q = RMat::zeros(dim, dim);
    for (a, &i) in idx1.iter().enumerate() {
        for (b, &j) in idx1.iter().enumerate() {
            re_q[(i, j)] = block_re[(a, b)];
            im_q[(i, j)] = block_im1[(a, b)];
        }
    }
    for (a, &i) in idx2.iter().enumerate() {
        for (b, &j) in idx2.iter().enumerate() {
            im_q[(i, j)] = block_im2[(a, b)];
        }
    }
    // M = [[I, A], [0, I]]·[[I, 0], [B, I]] with A, B symmetric is symplectic
    let mut upper = RMat::identity(dim, dim);
    upper.view_mut((0, n), (n, n)).copy_from(&random_symmetric(rng, n, 0.5));
    let mut lower = RMat::identity(dim, dim);
    lower.view_mut((n, 0), (n, n)).copy_from(&random_symmetric(rng, n, 0.5));
    let m = upper * lower;
    let conj = |q: &RMat| m.transpose() * q * &m;
    QuadraticSymbol::from_real_imag(&conj(&re_q), &conj(&im_q))
}

fn example_matrices(out: &mut Checks, tol_rank: f64) {
    let f = hamilton_map(&mixed_oscillator());
    let mut want_re = RMat::zeros(4, 4);
    want_re[(0, 2)] = 1.0;
    want_re[(2, 0)] = -1.0;
    let mut want_im = RMat::zeros(4, 4);
    want_im[(1, 3)] = 1.0;
    want_im[(3, 1)] = -1.0;
    let want_f = linalg::to_complex(&want_re) + linalg::to_complex(&want_im) * im(1.0);
    out.at_most(
        1,
        "F = JQ",
        (f.matrix() - want_f).iter().map(|z| z.norm()).fold(0.0, f64::max),
        1e-12,
    );
    out.at_most(1, "Re F", (f.re_f() - &want_re).amax(), 1e-12);
    out.at_most(1, "Im F", (f.im_f() - &want_im).amax(), 1e-12);
    let mut want_s = RMat::zeros(4, 2);
    want_s[(1, 0)] = 1.0;
    want_s[(3, 1)] = 1.0;
    out.at_most(
        1,
        "S = span(e_x'', e_xi'')",
        linalg::subspace_distance(&f.singular_space(tol_rank), &want_s),
        1e-12,
    );
    let worst = [0.1f64, 0.3, 0.7, 1.3]
        .iter()
        .map(|&t| {
            let (c, s) = ((2.0 * t).cos(), (2.0 * t).sin());
            let mut want = RMat::identity(4, 4);
            want[(1, 1)] = c;
            want[(3, 3)] = c;
            want[(1, 3)] = s;
            want[(3, 1)] = -s;
            (f.flow_exp(t, FlowKind::ImaginaryPart).real() - want).amax()
        })
        .fold(0.0, f64::max);
    out.at_most(1, "e^{2t Im F} block display", worst, 1e-12);
}

fn singular_space_properties(out: &mut Checks, rng: &mut ChaCha8Rng, tol_rank: f64) -> Result<()> {
    let mut symbols: Vec<QuadraticSymbol> = named_symbols().into_iter().map(|(_, s)| s).collect();
    for k in 0..20 {
        symbols.push(random_symbol(rng, 1 + k % 3)?);
    }
    let (mut re_f_res, mut invariance, mut sampled) = (0.0f64, 0.0f64, 0.0f64);
    for sym in &symbols {
        let f = hamilton_map(sym);
        let b = f.singular_space(tol_rank);
        let dim = 2 * f.n();
        if b.ncols() > 0 {
            re_f_res = re_f_res.max((f.re_f() * &b).norm());
            let comp = RMat::identity(dim, dim) - linalg::projector(&b);
            invariance = invariance.max((comp * f.im_f() * &b).norm());
        }
        let sampled_ker = f.sampled_kernel_intersection(1.0, 50, tol_rank);
        sampled = sampled.max(linalg::subspace_distance(&sampled_ker, &b));
    }
    out.at_most(2, "max |Re F B_S|", re_f_res, 1e-10);
    out.at_most(2, "max |(I - P_S) Im F B_S|", invariance, 1e-10);
    out.at_most(2, "sampled kernel intersection vs S (rad)", sampled, 1e-6);
    Ok(())
}

fn normality(out: &mut Checks, tol_rank: f64) -> Result<()> {
    for (name, sym, normal) in [
        ("mixed oscillator", mixed_oscillator(), true),
        ("xi^2 + i x^2", non_normal_example(), false),
    ] {
        let poly = sym.to_poly();
        let bracket = poisson_bracket(&poly, &poly.conj()).to_polynomial().max_abs();
        let f = hamilton_map(&sym);
        let ker_re = linalg::null_space(f.re_f(), tol_rank);
        let angle = linalg::subspace_distance(&f.singular_space(tol_rank), &ker_re);
        let basis = HermiteBasis::new(sym.n(), if sym.n() == 1 { 24 } else { 12 });
        let defect = normality_defect(&poly, &basis)?;
        if normal {
            out.at_most(3, format!("{name}: |{{a, conj a}}|"), bracket, 0.0);
            out.at_most(3, format!("{name}: angle(S, Ker Re F)"), angle, 1e-8);
            out.at_most(3, format!("{name}: commutator interior norm"), defect, 1e-8);
        } else {
            out.at_least(3, format!("{name}: |{{a, conj a}}|"), bracket, 1e-8);
            out.at_least(3, format!("{name}: angle(S, Ker Re F)"), angle, 1e-8);
            out.at_least(3, format!("{name}: commutator interior norm"), defect, 1e-8);
        }
    }
    Ok(())
}

/// The twelve one-dimensional STFT corpus members on `[−20, 20]`, 1024 points.
pub fn stft_corpus() -> Result<Vec<(String, SampledDistribution)>> {
    let grid = Grid::new(40.0, 1024)?;
    let data = [
        Datum::GaussianBump {
            center: 0.0,
            width: 1.0,
        },
        Datum::GaussianBump {
            center: 3.0,
            width: 0.7,
        },
        Datum::GaussianBump {
            center: -2.0,
            width: 1.5,
        },
        Datum::ModulatedBump {
            center: 0.0,
            width: 1.0,
            freq: 4.0,
        },
        Datum::ModulatedBump {
            center: 1.0,
            width: 1.2,
            freq: -3.0,
        },
        Datum::Delta { cells: 2.5 },
        Datum::Chirp { c: 1.0, width: 3.0 },
        Datum::Chirp { c: -0.5, width: 4.0 },
        Datum::Chirp { c: 2.0, width: 2.0 },
        Datum::Hermite { k: 3 },
        Datum::Hermite { k: 10 },
        Datum::GaussianBump {
            center: 0.0,
            width: 0.3,
        },
    ];
    data.into_iter()
        .map(|d| Ok((serde_json::to_string(&d)?, d.sample(grid)?)))
        .collect()
}

fn stft_suite(out: &mut Checks) -> Result<()> {
    let (mut iso, mut round) = (0.0f64, 0.0f64);
    for (_, u) in stft_corpus()? {
        let field = stft(&u, 1.0)?;
        iso = iso.max((field.norm() - (2.0 * PI).sqrt() * u.norm()).abs() / u.norm());
        round = round.max(istft(&field, 1.0)?.rel_error(&u));
    }
    out.at_most(4, "STFT isometry residual", iso, 1e-6);
    out.at_most(4, "istft round trip", round, 1e-5);
    Ok(())
}

fn propagator_suite(out: &mut Checks) -> Result<()> {
    let grid = Grid::new(16.0, 1024)?;
    let corpus: Vec<SampledDistribution> = [
        Datum::GaussianBump {
            center: 1.0,
            width: 0.6,
        },
        Datum::ModulatedBump {
            center: -0.5,
            width: 1.0,
            freq: 1.5,
        },
        Datum::Hermite { k: 4 },
    ]
    .iter()
    .map(|d| d.sample(grid))
    .collect::<Result<_>>()?;
    let heat = diag_symbol(1, &[re(0.0), re(1.0)])?;
    let osc = diag_symbol(1, &[re(1.0), re(1.0)])?;
    let rot = diag_symbol(1, &[im(1.0), im(1.0)])?;
    let schr = diag_symbol(1, &[re(0.0), im(1.0)])?;

    let mut growth = 0.0f64;
    let mut unitarity = 0.0f64;
    for (sym, method) in [
        (&heat, Method::ClosedForm),
        (&heat, Method::FourierMultiplier),
        (&osc, Method::ClosedForm),
        (&osc, Method::HermiteSpectral),
        (&rot, Method::ClosedForm),
        (&rot, Method::HermiteSpectral),
        (&schr, Method::FourierMultiplier),
    ] {
        let spec = PropagatorSpec::new(sym.clone(), 0.3, method);
        for u in &corpus {
            let ratio = evolve(u, &spec)?.norm() / u.norm();
            growth = growth.max(ratio - 1.0);
            if sym.real_part().amax() == 0.0 {
                unitarity = unitarity.max((ratio - 1.0).abs());
            }
        }
    }
    out.at_most(5, "contraction excess", growth, 1e-10);
    out.at_most(5, "unitarity for imaginary symbols", unitarity, 1e-8);

    let spectral = check_semigroup(
        &PropagatorSpec::new(osc.clone(), 0.0, Method::HermiteSpectral),
        0.2,
        0.1,
        &corpus,
    )?;
    out.at_most(5, "semigroup residual (spectral)", spectral.max_residual, 1e-6);
    let quad = check_semigroup(&PropagatorSpec::new(heat, 0.0, Method::ClosedForm), 0.1, 0.1, &corpus)?;
    out.at_most(5, "semigroup residual (quadrature)", quad.max_residual, 1e-5);

    let mut cross = 0.0f64;
    for sym in [&osc, &rot] {
        for t in [0.2, 0.4] {
            let mut spec = PropagatorSpec::new(sym.clone(), t, Method::HermiteSpectral);
            spec.k_max = Some(64);
            for u in &corpus {
                let a = evolve(u, &spec)?;
                let b = evolve(
                    u,
                    &PropagatorSpec {
                        method: Method::ClosedForm,
                        ..spec.clone()
                    },
                )?;
                cross = cross.max(a.rel_error(&b));
            }
        }
    }
    out.at_most(5, "spectral vs Mehler, K = 64", cross, 1e-6);
    Ok(())
}

/// Successive ratios of the order `−μ` indicator norms on boxes of the given
/// half-widths.
pub fn indicator_ratios(mu: f64, half_widths: &[f64]) -> Result<Vec<f64>> {
    let norms = half_widths
        .iter()
        .map(|&r| indicator_box_norm(r, -mu))
        .collect::<Result<Vec<_>>>()?;
    Ok(norms.windows(2).map(|w| w[1] / w[0]).collect())
}

fn indicator_plateau(out: &mut Checks) -> Result<()> {
    let widths = [5.0, 10.0, 20.0, 40.0];
    let above = indicator_ratios(0.75, &widths)?;
    let below = indicator_ratios(0.25, &widths)?;
    out.at_most(
        8,
        "mu = 0.75: last ratio - 1",
        (above[above.len() - 1] - 1.0).abs(),
        0.05,
    );
    out.at_least(
        8,
        "mu = 0.25: smallest ratio",
        below.iter().copied().fold(f64::INFINITY, f64::min),
        1.05,
    );
    Ok(())
}

/// Runs the numerical self-checks. Scenario containment and the randomized
/// set-algebra oracle live in the scenario suite and the test suite.
pub fn run_checks(seed: u64, tol_rank: f64) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    for criterion in CRITERIA {
        checks.extend(run_criterion(criterion, seed, tol_rank)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        schema: SCHEMA,
        seed,
        checks,
        passed,
    })
}

/// Criteria covered by [`run_criterion`].
pub const CRITERIA: [u8; 6] = [1, 2, 3, 4, 5, 8];

/// The checks of one criterion; empty for criteria not covered here.
pub fn run_criterion(criterion: u8, seed: u64, tol_rank: f64) -> Result<Vec<Check>> {
    let mut out = Checks(Vec::new());
    match criterion {
        1 => example_matrices(&mut out, tol_rank),
        2 => singular_space_properties(&mut out, &mut ChaCha8Rng::seed_from_u64(seed), tol_rank)?,
        3 => normality(&mut out, tol_rank)?,
        4 => stft_suite(&mut out)?,
        5 => propagator_suite(&mut out)?,
        8 => indicator_plateau(&mut out)?,
        _ => {}
    }
    Ok(out.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_symbols_are_admissible_and_some_have_singular_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut nontrivial = 0;
        for k in 0..30 {
            let sym = random_symbol(&mut rng, 2 + k % 2).unwrap();
            if hamilton_map(&sym).singular_space(1e-10).ncols() > 0 {
                nontrivial += 1;
            }
        }
        assert!(nontrivial >= 5, "{nontrivial}");
    }

    #[test]
    fn non_normal_example_separates() {
        let f = hamilton_map(&non_normal_example());
        assert_eq!(f.singular_space(1e-10).ncols(), 0);
        assert_eq!(linalg::null_space(f.re_f(), 1e-10).ncols(), 1);
    }
}
