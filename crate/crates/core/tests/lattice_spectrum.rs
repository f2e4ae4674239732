use approx::assert_relative_eq;
use dnls_core::lattice_spectrum::{eigenvalue, eigenvalues, k_n, k_n_prime, m_n, solve_y_n, symbol_f, Spectrum};
use dnls_core::TorusSpec;
use proptest::prelude::*;
use std::f64::consts::PI;

// Brute-force oracle: explicit triple loop over the frequency cube.
fn brute_modes(n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a + b + c == 0 {
                    continue;
                }
                let s = |k: usize| 4.0 * (PI * k as f64 / n as f64).sin().powi(2);
                out.push(s(a) + s(b) + s(c));
            }
        }
    }
    out
}

#[test]
fn symbol_values() {
    assert_eq!(symbol_f(&[0.0, 0.0, 0.0]), 0.0);
    assert_relative_eq!(symbol_f(&[0.5, 0.5, 0.5]), 12.0, epsilon = 1e-12);
    assert_relative_eq!(symbol_f(&[0.25, 0.0, 0.0]), 2.0, epsilon = 1e-12);
}

#[test]
fn eigenvalues_on_smallest_cube() {
    let spec = TorusSpec::new(3, 2).unwrap();
    assert_eq!(eigenvalue(&[0, 0, 0], &spec).unwrap(), 0.0);
    assert_relative_eq!(eigenvalue(&[1, 1, 0], &spec).unwrap(), 8.0, epsilon = 1e-12);
    let mut all: Vec<i64> = eigenvalues(&spec).iter().map(|l| l.round() as i64).collect();
    all.sort();
    assert_eq!(all, vec![0, 4, 4, 4, 8, 8, 8, 12]);
    assert!(eigenvalue(&[2, 0, 0], &spec).is_err());
}

#[test]
fn closed_forms_on_smallest_cube() {
    let spec = TorusSpec::new(3, 2).unwrap();
    let want = (3.0 * 4f64.ln() + 3.0 * 8f64.ln() + 12f64.ln()) / 8.0;
    assert_relative_eq!(k_n(0.0, &spec).unwrap(), want, max_relative = 1e-14);
    let want = (3.0 / 4.0 + 3.0 / 8.0 + 1.0 / 12.0) / 8.0;
    assert_relative_eq!(k_n_prime(0.0, &spec).unwrap(), want, max_relative = 1e-14);
}

#[test]
fn matches_brute_force_enumeration() {
    let spec4 = TorusSpec::new(3, 4).unwrap();
    let modes = brute_modes(4);
    assert_eq!(modes.len(), 63);
    let want: f64 = modes.iter().map(|l| (1.0 + l).ln()).sum::<f64>() / 64.0;
    assert_relative_eq!(k_n(1.0, &spec4).unwrap(), want, max_relative = 1e-13);

    let spec8 = TorusSpec::new(3, 8).unwrap();
    let want: f64 = brute_modes(8).iter().map(|l| 1.0 / (0.5 + l)).sum::<f64>() / 512.0;
    assert!((k_n_prime(0.5, &spec8).unwrap() - want).abs() < 1e-12);

    let want: f64 = brute_modes(8).iter().map(|l| l.powf(-1.5)).sum::<f64>() / 512.0;
    assert_relative_eq!(m_n(1.5, &spec8).unwrap(), want, max_relative = 1e-12);
}

#[test]
fn large_y_sandwich() {
    for n in [2, 3, 5] {
        let spec = TorusSpec::new(3, n).unwrap();
        let big_n = spec.num_sites() as f64;
        let y = 1e6;
        let v = k_n_prime(y, &spec).unwrap();
        assert!(v >= (1.0 - 1.0 / big_n) / (y + 12.0) && v <= (1.0 - 1.0 / big_n) / y);
    }
}

#[test]
fn rejects_invalid_arguments() {
    assert!(TorusSpec::new(3, 1).is_err());
    assert!(k_n(-1.0, &TorusSpec::new(3, 4).unwrap()).is_err());
    assert!(m_n(0.0, &TorusSpec::new(3, 4).unwrap()).is_err());
}

#[test]
fn multiset_and_enumeration_agree() {
    for (d, n) in [(3, 8), (3, 11), (4, 6), (5, 4)] {
        let s = Spectrum::new(TorusSpec::new(d, n).unwrap());
        for p in [0.5, 1.5, 2.0] {
            let a = s.m_n(p).unwrap();
            let b = s.m_n_multiset(p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }
}

#[test]
fn eigenvalue_total_matches_mean_symbol() {
    // Σ_k λ_k = N · 2d exactly, since the mean of sin² over a full period is 1/2
    for (d, n) in [(3, 4), (3, 7), (4, 5)] {
        let spec = TorusSpec::new(d, n).unwrap();
        let ev = eigenvalues(&spec);
        assert_eq!(ev.len(), spec.num_sites());
        assert_eq!(ev[0], 0.0);
        let total: f64 = ev.iter().sum();
        assert_relative_eq!(total, (spec.num_sites() * 2 * d) as f64, max_relative = 1e-12);
    }
}

#[test]
fn root_solver_round_trip_on_grid() {
    let s = Spectrum::new(TorusSpec::new(3, 8).unwrap());
    for i in 0..=40 {
        let y = 100.0 * (i as f64 / 40.0).powi(2);
        let theta = s.k_n_prime(y).unwrap();
        let r = s.solve_y_n(theta).unwrap();
        assert!((r.y - y).abs() <= 1e-8 * (1.0 + y), "y = {y}, got {}", r.y);
    }
    let r = s.solve_y_n(0.1).unwrap();
    assert!(r.residual < 1e-10);
    let k0 = s.k_n_prime(0.0).unwrap();
    assert_eq!(s.solve_y_n(k0).unwrap().y, 0.0);
    assert!(s.solve_y_n(2.0 * k0).is_err());
    assert!(solve_y_n(-1.0, &TorusSpec::new(3, 4).unwrap()).is_err());
}

#[test]
fn zero_mode_solve_includes_correction() {
    let s = Spectrum::new(TorusSpec::new(3, 4).unwrap());
    let r = s.solve_y_n_with_zero_mode(0.2).unwrap();
    let lhs = s.k_n_prime(r.y).unwrap() + 1.0 / (64.0 * r.y);
    assert!((lhs - 0.2).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_n_prime_strictly_decreasing(n in 2usize..7, y1 in 0.0f64..20.0, dy in 1e-3f64..20.0) {
        let spec = TorusSpec::new(3, n).unwrap();
        prop_assert!(k_n_prime(y1, &spec).unwrap() > k_n_prime(y1 + dy, &spec).unwrap());
    }

    #[test]
    fn k_n_concave(n in 2usize..7, y in 0.0f64..20.0, h in 1e-2f64..2.0) {
        let spec = TorusSpec::new(3, n).unwrap();
        let f = |t: f64| k_n(t, &spec).unwrap();
        prop_assert!(f(y) - 2.0 * f(y + h) + f(y + 2.0 * h) <= 1e-12);
        prop_assert!(f(y + h) >= f(y));
    }

    #[test]
    fn k_n_prime_harmonic_bound(n in 2usize..7, y in 1e-3f64..50.0) {
        let spec = TorusSpec::new(3, n).unwrap();
        let big_n = spec.num_sites() as f64;
        prop_assert!(k_n_prime(y, &spec).unwrap() <= (big_n - 1.0) / (big_n * y));
    }

    #[test]
    fn eigenvalues_in_range(d in 1usize..5, n in 2usize..6, seed in 0usize..1000) {
        let spec = TorusSpec::new(d, n).unwrap();
        let idx = spec.multi_index(seed % spec.num_sites());
        let l = eigenvalue(&idx, &spec).unwrap();
        prop_assert!((0.0..=4.0 * d as f64 + 1e-12).contains(&l));
        prop_assert_eq!(spec.linear_index(&idx).unwrap(), seed % spec.num_sites());
    }
}
