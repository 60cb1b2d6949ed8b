use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use single_ring::montecarlo::Estimate;
use single_ring::rng::{haar_unitary, SeededStream};
use single_ring::weingarten::*;

const DIM: usize = 5;

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap()
}

/// Index tuples `(i, j)` and a shuffled conjugate pair `(i', j')` of the same multisets.
fn moment_indices() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>)> {
    (1usize..=3).prop_flat_map(|k| {
        (prop::collection::vec(0..DIM, k), prop::collection::vec(0..DIM, k)).prop_flat_map(|(i, j)| {
            (Just(i.clone()), Just(j.clone()), Just(i).prop_shuffle(), Just(j).prop_shuffle())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabeling_leaves_moments_unchanged(
        (i, j, ip, jp) in moment_indices(),
        rows in Just((0..DIM).collect::<Vec<_>>()).prop_shuffle(),
        cols in Just((0..DIM).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let table = wg_table(i.len(), DIM).unwrap();
        let relabel = |v: &[usize], p: &[usize]| v.iter().map(|&x| p[x]).collect::<Vec<_>>();
        let before = mixed_moment(&i, &j, &ip, &jp, &table).unwrap();
        let after = mixed_moment(&relabel(&i, &rows), &relabel(&j, &cols), &relabel(&ip, &rows), &relabel(&jp, &cols), &table).unwrap();
        prop_assert_eq!(before, after);
    }
}

#[test]
fn disjoint_supports_factorize_to_second_order() {
    // E[u00 u11 u22 conj(u00 u11 u22)] against E|u00|^2 E|u11 u22|^2
    let rel_err = |n: usize| {
        let t3 = wg_table(3, n).unwrap();
        let t2 = wg_table(2, n).unwrap();
        let t1 = wg_table(1, n).unwrap();
        let joint = mixed_moment(&[0, 1, 2], &[0, 1, 2], &[0, 1, 2], &[0, 1, 2], &t3).unwrap();
        let left = mixed_moment(&[0], &[0], &[0], &[0], &t1).unwrap();
        let right = mixed_moment(&[1, 2], &[1, 2], &[1, 2], &[1, 2], &t2).unwrap();
        (to_f64(&joint) / (to_f64(&left) * to_f64(&right)) - 1.0).abs()
    };
    let ratio = rel_err(40) / rel_err(80);
    assert!((ratio - 4.0).abs() < 0.2, "error ratio {ratio}");
}

#[test]
fn small_moments_match_hand_values() {
    // E|u|^4 = 2/(N(N+1)), E|u00 u11|^2 = 1/(N^2-1), E u00 u11 conj(u01 u10) = -1/(N(N^2-1))
    for n in 2..6i64 {
        let t = wg_table(2, n as usize).unwrap();
        let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(mixed_moment(&[0, 0], &[0, 0], &[0, 0], &[0, 0], &t).unwrap(), q(2, n * (n + 1)));
        assert_eq!(mixed_moment(&[0, 1], &[0, 1], &[0, 1], &[0, 1], &t).unwrap(), q(1, n * n - 1));
        assert_eq!(mixed_moment(&[0, 1], &[0, 1], &[0, 1], &[1, 0], &t).unwrap(), q(-1, n * (n * n - 1)));
    }
}

fn test_matrices(n: usize) -> [ExactMatrix; 4] {
    let entry = |seed: i64, r: usize, c: usize| -> (i64, i64) {
        let x = seed * 7 + (r as i64) * 3 - (c as i64) * 5 + (r * c) as i64;
        (x % 4 - 1, (x * 3) % 5 - 2)
    };
    let make = |seed: i64| {
        let rows: Vec<Vec<(i64, i64)>> = (0..n).map(|r| (0..n).map(|c| entry(seed, r, c)).collect()).collect();
        ExactMatrix::from_gaussian_integers(&rows).unwrap()
    };
    [make(1), make(2), make(3), make(4)]
}

#[test]
fn two_trace_formula_equals_brute_force() {
    for n in 2..=4 {
        let [a, b, c, d] = test_matrices(n);
        let closed = exact_two_trace(&a, &b, &c, &d).unwrap();
        let brute = two_trace_brute_force(&a, &b, &c, &d).unwrap();
        assert_eq!(closed, brute, "N = {n}");
    }
}

#[test]
fn sampled_haar_moments_match_exact_values() {
    let n = 4;
    let trials = 20_000;
    let t = wg_table(2, n).unwrap();
    let samples: Vec<[Complex64; 3]> = (0..trials)
        .map(|s| {
            let u = haar_unitary(n, &mut SeededStream::new(11, s).rng());
            let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
            [
                Complex64::new(u00.norm_sqr().powi(2), 0.0),
                Complex64::new(u00.norm_sqr() * u11.norm_sqr(), 0.0),
                u00 * u11 * (u01 * u10).conj(),
            ]
        })
        .collect();
    let cases: [(&[usize], &[usize], &[usize], &[usize]); 3] = [
        (&[0, 0], &[0, 0], &[0, 0], &[0, 0]),
        (&[0, 1], &[0, 1], &[0, 1], &[0, 1]),
        (&[0, 1], &[0, 1], &[0, 1], &[1, 0]),
    ];
    for (k, (i, j, ip, jp)) in cases.iter().enumerate() {
        let exact = to_f64(&mixed_moment(i, j, ip, jp, &t).unwrap());
        let est = Estimate::mean_of(samples.iter().map(|s| s[k]).collect::<Vec<_>>().into_iter());
        assert!(est.within(Complex64::new(exact, 0.0), 4.0), "case {k}: {:?} vs {exact}", est);
    }
}

#[test]
fn trace_moment_matches_closed_form_second_moment() {
    // E|Tr U diag(s)|^2 = sum s^2 / N
    let s = [0.5, 1.0, 1.5, 2.5];
    let exact = exact_trace_moment(&[TraceFactor::power(1), TraceFactor::conj_power(1)], &s).unwrap();
    let expected = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
    let got = qc_to_complex64(&exact);
    assert!((got.re - expected).abs() < 1e-14 && got.im.abs() < 1e-14);
    // E (Tr A)^2 = 0 by phase invariance
    let pseudo = exact_trace_moment(&[TraceFactor::power(1), TraceFactor::power(1)], &s).unwrap();
    assert_eq!(qc_to_complex64(&pseudo), Complex64::new(0.0, 0.0));
}
