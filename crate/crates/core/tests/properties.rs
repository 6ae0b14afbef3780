mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_set, random_subspace, random_unit, Mat};
use isowf::harness::verify::random_symbol;
use isowf::linalg::{self, CMat, RMat, C64, DEFAULT_TOL_RANK};
use isowf::propagator::{evolve, PropagatorSpec};
use isowf::stft::{stft, Datum, Grid};
use isowf::symplectic::{hamilton_map, poisson_bracket, FlowKind, Polynomial, QuadraticSymbol};
use isowf::wavefront::{
    integrate_out, linear_image, predict_propagation, pullback, tensor, ConicAtom, ConicSet, PropagationParams,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cmax(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_poly<R: Rng>(rng: &mut R, n: usize) -> Polynomial {
    let mut c = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut p = Polynomial::constant(n, c());
    for k in 0..2 * n {
        p = p.add(&Polynomial::var(n, k).scale(c()));
        for l in k..2 * n {
            p = p.add(&Polynomial::var(n, k).mul(&Polynomial::var(n, l)).scale(c()));
        }
    }
    p
}

fn poly_distance(a: &Polynomial, b: &Polynomial) -> f64 {
    a.sub(b).max_abs()
}

/// A set with some atoms and the same set with extra atoms.
fn nested_sets<R: Rng>(rng: &mut R, dim: usize) -> (ConicSet, ConicSet) {
    let small = random_set(rng, dim, 3, dim / 2, |r| random_unit(r, dim));
    let extra = random_set(rng, dim, 2, dim / 2, |r| random_unit(r, dim));
    let big = small.union(&extra.with_order(small.order())).unwrap();
    (small, big)
}

fn random_symplectic<R: Rng>(rng: &mut R, n: usize) -> RMat {
    let sym = |rng: &mut R| {
        let a = RMat::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        (&a + a.transpose()) * 0.5
    };
    let mut upper = RMat::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&sym(rng));
    let mut lower = RMat::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&sym(rng));
    upper * lower
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamilton_map_reproduces_the_symbol(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let sym = random_symbol(&mut r, n).unwrap();
        let f = hamilton_map(&sym);
        let x: Vec<f64> = (0..2 * n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let a = sym.eval(&x);
        prop_assert!((f.sigma_form(&x) - a).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn flow_group_law(seed in any::<u64>(), n in 1usize..=2, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let f = hamilton_map(&random_symbol(&mut rng(seed), n).unwrap());
        for kind in [FlowKind::Full, FlowKind::ImaginaryPart] {
            let whole = f.flow_exp(t1 + t2, kind).matrix;
            let split = f.flow_exp(t1, kind).matrix * f.flow_exp(t2, kind).matrix;
            prop_assert!(cmax(&(&whole - split)) <= 1e-10 * cmax(&whole).max(1.0));
        }
    }

    #[test]
    fn singular_space_is_invariant_and_inside_ker_re_f(seed in any::<u64>(), n in 1usize..=3) {
        let f = hamilton_map(&random_symbol(&mut rng(seed), n).unwrap());
        let s = f.singular_space(DEFAULT_TOL_RANK);
        if s.ncols() > 0 {
            prop_assert!((f.re_f() * &s).norm() <= 1e-10 * f.re_f().norm().max(1.0));
            let comp = RMat::identity(2 * n, 2 * n) - linalg::projector(&s);
            prop_assert!((comp * f.im_f() * &s).norm() <= 1e-10 * f.im_f().norm().max(1.0));
        }
    }

    #[test]
    fn normal_symbols_have_singular_space_ker_re_f(seed in any::<u64>(), n in 1usize..=2) {
        // functions of the same actions |X_j|² commute; a symplectic change of
        // variables preserves the bracket
        let mut r = rng(seed);
        let alpha: Vec<f64> = (0..n).map(|_| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(0.1..2.0) }).collect();
        let beta: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let diag = |v: &[f64]| RMat::from_diagonal(&DVector::from_iterator(2 * n, v.iter().chain(v).copied()));
        let m = random_symplectic(&mut r, n);
        let sym = QuadraticSymbol::from_real_imag(&(m.transpose() * diag(&alpha) * &m), &(m.transpose() * diag(&beta) * &m)).unwrap();
        let poly = sym.to_poly();
        let bracket = poisson_bracket(&poly, &poly.conj()).to_polynomial().max_abs();
        prop_assert!(bracket <= 1e-10 * sym.matrix().norm().powi(2).max(1.0));
        let f = hamilton_map(&sym);
        let ker = linalg::null_space(f.re_f(), DEFAULT_TOL_RANK);
        prop_assert!(linalg::subspace_distance(&f.singular_space(DEFAULT_TOL_RANK), &ker) <= 1e-8);
    }

    #[test]
    fn weyl_product_is_associative_and_brackets_exactly(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = rng(seed);
        let (a, b, c) = (random_poly(&mut r, n), random_poly(&mut r, n), random_poly(&mut r, n));
        let left = a.weyl(&b).weyl(&c);
        let right = a.weyl(&b.weyl(&c));
        prop_assert!(poly_distance(&left, &right) <= 1e-12 * left.max_abs().max(1.0));
        let commutator = a.weyl(&b).sub(&b.weyl(&a));
        let bracket = a.poisson(&b).scale(C64::new(0.0, -1.0));
        prop_assert!(poly_distance(&commutator, &bracket) <= 1e-12);
    }

    #[test]
    fn prediction_lies_in_singular_space_and_composes(seed in any::<u64>(), n in 1usize..=2, t1 in 0.0f64..0.8, t2 in 0.0f64..0.8) {
        let mut r = rng(seed);
        let f = hamilton_map(&random_symbol(&mut r, n).unwrap());
        let s = f.singular_space(DEFAULT_TOL_RANK);
        let dim = 2 * n;
        let u0 = random_set(&mut r, dim, 4, dim - 1, |r| random_unit(r, dim));
        let params = PropagationParams::for_dimension(n);
        let once = predict_propagation(&f, &s, &u0, t1 + t2, params).unwrap().set;
        let half = predict_propagation(&f, &s, &u0, t1, params).unwrap().set;
        let twice = predict_propagation(&f, &s, &half, t2, params).unwrap().set;
        for x in once.sample_directions(&mut r, 20) {
            let inside = linalg::containment_angle(&RMat::from_column_slice(dim, 1, x.as_slice()), &s);
            prop_assert!(s.ncols() > 0 && inside <= 1e-6);
        }
        prop_assert!(once.sampled_subset_of(&twice, &mut r, 10, 1e-6));
        prop_assert!(twice.sampled_subset_of(&once, &mut r, 10, 1e-6));
    }

    #[test]
    fn linear_image_inverts(seed in any::<u64>(), n in 1usize..=2) {
        let mut r = rng(seed);
        let dim = 2 * n;
        let set = random_set(&mut r, dim, 4, dim - 1, |r| random_unit(r, dim));
        let m = random_symplectic(&mut r, n);
        let back = linear_image(&linear_image(&set, &m).unwrap().set, &m.clone().try_inverse().unwrap()).unwrap().set;
        let radius = set.atoms().iter().map(ConicAtom::radius).fold(0.0, f64::max);
        let tol = 2.0 * radius * linalg::condition_number(&m) + 1e-6;
        prop_assert!(set.sampled_subset_of(&back, &mut r, 10, tol));
        prop_assert!(back.sampled_subset_of(&set, &mut r, 10, tol));
    }

    #[test]
    fn rules_are_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 2;
        let dim = 2 * n;
        let (small, big) = nested_sets(&mut r, dim);
        let m = Mat::from_fn(dim, dim, |_, _| r.gen_range(-1.0..1.0));
        if let (Ok(a), Ok(b)) = (linear_image(&small, &m), linear_image(&big, &m)) {
            prop_assert!(a.set.sampled_subset_of(&b.set, &mut r, 8, 1e-6));
        }
        let other = random_set(&mut r, 2, 2, 1, |r| random_unit(r, 2)).with_order(Some(0.0));
        let (a, b) = (tensor(&small, &other, 0.5, 0.5).unwrap(), tensor(&big, &other, 0.5, 0.5).unwrap());
        prop_assert!(a.set.sampled_subset_of(&b.set, &mut r, 8, 1e-6));
        if let Ok(b) = integrate_out(&big, 1, 1.0) {
            let a = integrate_out(&small, 1, 1.0).unwrap();
            prop_assert!(a.set.sampled_subset_of(&b.set, &mut r, 8, 1e-6));
        }
        let l = random_subspace(&mut r, n, 1) * 2.0;
        if let Ok(b) = pullback(&big, &l, 1.0) {
            let a = pullback(&small, &l, 1.0).unwrap();
            prop_assert!(a.set.sampled_subset_of(&b.set, &mut r, 8, 1e-6));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stft_is_an_isometry(c in -2.0f64..2.0, width in 0.5f64..3.0, center in -4.0f64..4.0, freq in -5.0f64..5.0) {
        let grid = Grid::new(40.0, 512).unwrap();
        for datum in [Datum::Chirp { c, width }, Datum::ModulatedBump { center, width, freq }] {
            let u = datum.sample(grid).unwrap();
            let field = stft(&u, 1.0).unwrap();
            let want = (2.0 * std::f64::consts::PI).sqrt() * u.norm();
            prop_assert!((field.norm() - want).abs() <= 1e-6 * want);
        }
    }

    #[test]
    fn one_dimensional_evolution_contracts(seed in any::<u64>(), t in 0.0f64..0.5) {
        let sym = random_symbol(&mut rng(seed), 1).unwrap();
        let method = PropagatorSpec::auto_method(&sym);
        let u0 = Datum::GaussianBump { center: 0.5, width: 1.0 }.sample(Grid::new(16.0, 512).unwrap()).unwrap();
        match evolve(&u0, &PropagatorSpec::new(sym, t, method)) {
            Ok(u) => prop_assert!(u.norm() <= u0.norm() * (1.0 + 1e-10), "{method:?}: {}", u.norm() / u0.norm()),
            // truncation and resolution guards may refuse a draw; refusing is not growth
            Err(e) => prop_assume!(false, "{}", e),
        }
    }
}
