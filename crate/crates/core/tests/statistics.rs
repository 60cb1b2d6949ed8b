use num_complex::Complex64;
use proptest::prelude::*;
use single_ring::laurent::{eval_statistic, LaurentPoly, Observable, Weight};
use single_ring::linalg::{matmul, ComplexMatrix};
use single_ring::model::{Composition, SingleRingModel, SingularProfile};
use single_ring::montecarlo::{run, ExperimentPlan, NamedStatistic};
use single_ring::rng::{ginibre, SeededStream};

const N: usize = 6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn laurent() -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec((-3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..6)
        .prop_map(|t| LaurentPoly::new(t.into_iter().map(|(n, re, im)| (n, c(re, im)))))
}

fn scalar() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| c(re, im))
}

/// A well-conditioned random matrix: identity plus a small Ginibre part.
fn matrix(seed: u64) -> ComplexMatrix {
    let g = ginibre(N, &mut SeededStream::new(seed, 0).rng());
    ComplexMatrix::identity(N).add(&g.scaled(c(0.3, 0.0))).unwrap()
}

fn weight_matrix(seed: u64) -> ComplexMatrix {
    ginibre(N, &mut SeededStream::new(seed, 1).rng())
}

fn close(x: Complex64, y: Complex64, scale: f64) -> bool {
    (x - y).norm() <= 1e-12 * (1.0 + scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_in_f(f in laurent(), g in laurent(), s in scalar(), t in scalar(), seed in 0u64..1000) {
        let a = matrix(seed);
        let m = Weight::custom(weight_matrix(seed)).unwrap();
        let ev = |p: &LaurentPoly| eval_statistic(&Observable::new(p.clone(), m.clone()), &a).unwrap();
        let lhs = ev(&f.scaled(s).plus(&g.scaled(t)));
        let rhs = s * ev(&f) + t * ev(&g);
        prop_assert!(close(lhs, rhs, lhs.norm() + rhs.norm()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn linear_in_weight(f in laurent(), s in scalar(), seed in 0u64..1000) {
        let a = matrix(seed);
        let (m1, m2) = (weight_matrix(seed), weight_matrix(seed + 5000));
        let ev = |m: ComplexMatrix| eval_statistic(&Observable::new(f.clone(), Weight::custom(m).unwrap()), &a).unwrap();
        let lhs = ev(m1.scaled(s).add(&m2).unwrap());
        let rhs = s * ev(m1) + ev(m2);
        prop_assert!(close(lhs, rhs, lhs.norm() + rhs.norm()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn dyad_weight_agrees_with_dense_weight(f in laurent(), seed in 0u64..1000) {
        let a = matrix(seed);
        let w = weight_matrix(seed);
        let (left, right) = (w.column(0), w.column(1));
        let dense = ComplexMatrix::from_fn(N, N, |i, j| (N as f64).sqrt() * left[i] * right[j].conj());
        let x = eval_statistic(&Observable::new(f.clone(), Weight::dyad(left, right).unwrap()), &a).unwrap();
        let y = eval_statistic(&Observable::new(f.clone(), Weight::custom(dense).unwrap()), &a).unwrap();
        prop_assert!(close(x, y, x.norm()), "{} vs {}", x, y);
    }

    #[test]
    fn rotation_multiplies_by_phase(n in -4i32..=4, theta in 0.0f64..6.3, seed in 0u64..1000) {
        prop_assume!(n != 0);
        let a = matrix(seed);
        let rot = Complex64::from_polar(1.0, theta);
        let f = LaurentPoly::monomial(n, c(1.0, 0.0));
        let base = eval_statistic(&Observable::trace(f.clone()), &a).unwrap();
        let turned = eval_statistic(&Observable::trace(f), &a.scaled(rot)).unwrap();
        let expected = base * rot.powi(n);
        prop_assert!(close(turned, expected, base.norm()), "{} vs {}", turned, expected);
    }
}

#[test]
fn matrix_entry_weight_reads_entries_of_f_of_a() {
    let a = matrix(3);
    let f = LaurentPoly::from_triples(&[(2, 1.0, 0.0), (-1, 0.0, 2.0)]);
    let a2 = matmul(&a, &a).unwrap();
    let inv = single_ring::linalg::lu_factor(&a).unwrap().invert();
    let fa = a2.add(&inv.scaled(c(0.0, 2.0))).unwrap();
    for (i, j) in [(0, 0), (1, 4), (5, 2)] {
        let got = eval_statistic(&Observable::new(f.clone(), Weight::matrix_entry(i, j, N)), &a).unwrap();
        let expected = (N as f64).sqrt() * fa[(i, j)];
        assert!(close(got, expected, expected.norm()), "({i},{j}) {got} vs {expected}");
    }
}

fn uniform_model(n: usize, composition: Composition) -> SingleRingModel {
    SingleRingModel::new(SingularProfile::uniform(0.5, 4.0, n).unwrap(), composition)
}

#[test]
fn power_trace_variances_stay_under_tail_bound() {
    let model = uniform_model(256, Composition::UTV);
    let b = model.b();
    let stats: Vec<NamedStatistic> = (1..=6)
        .map(|n| NamedStatistic::trace(format!("z{n}"), LaurentPoly::monomial(n, c(1.0, 0.0))))
        .collect();
    let est = run(&ExperimentPlan::new(model, stats, 100, 21).unwrap()).unwrap();
    let var = |n: usize| est.pair(n - 1, n - 1).hermitian.value.re;
    let bound = |n: usize| (n * n) as f64 * (b + 0.1).powi(2 * n as i32);
    let c_fit = 2.0 * var(1) / bound(1);
    for n in 1..=6 {
        assert!(var(n) <= c_fit * bound(n), "n = {n}: {} > {}", var(n), c_fit * bound(n));
    }
}

#[test]
fn ut_and_utv_compositions_agree_in_distribution() {
    let trials = 2000;
    let stats = || {
        vec![
            NamedStatistic::trace("z", LaurentPoly::monomial(1, c(1.0, 0.0))),
            NamedStatistic::trace("z2", LaurentPoly::monomial(2, c(1.0, 0.0))),
            NamedStatistic::trace("zinv", LaurentPoly::monomial(-1, c(1.0, 0.0))),
        ]
    };
    let ut = run(&ExperimentPlan::new(uniform_model(32, Composition::UT), stats(), trials, 1).unwrap()).unwrap();
    let utv = run(&ExperimentPlan::new(uniform_model(32, Composition::UTV), stats(), trials, 2).unwrap()).unwrap();
    for i in 0..3 {
        let (x, y) = (ut.pair(i, i).hermitian, utv.pair(i, i).hermitian);
        let se = (x.se_re.powi(2) + y.se_re.powi(2)).sqrt();
        let z = (x.value.re - y.value.re).abs() / se;
        assert!(z < 4.0, "statistic {i}: {} vs {} (z = {z})", x.value.re, y.value.re);
    }
}
