//! Direct cube quadratures for `K` and `K'`: randomly shifted Kronecker
//! points, a periodic midpoint grid, and extrapolation of lattice sums.
//! These serve as independent cross-checks of the Laplace representation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::lattice_spectrum::{Spectrum, TorusSpec};
use crate::numerics::{mean_se, NeumaierSum};

use super::Singularity;

/// Which of the two integrals is being computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Integrand {
    K,
    KPrime,
}

impl Integrand {
    fn eval(self, y: f64, f: f64) -> f64 {
        match self {
            Integrand::K => (y + f).ln(),
            Integrand::KPrime => 1.0 / (y + f),
        }
    }

    /// Leading behaviour at the origin when `y = 0`, as a function of `r²`.
    fn singular_part(self, r2: f64) -> f64 {
        let q = 4.0 * PI * PI * r2;
        match self {
            Integrand::K => q.ln(),
            Integrand::KPrime => 1.0 / q,
        }
    }
}

/// Cutoff radius of the subtracted patch around the origin.
const PATCH_RADIUS: f64 = 0.45;

/// Smooth cutoff equal to 1 on `[0, R/2]` and 0 beyond `R`.
fn cutoff(r: f64) -> f64 {
    let r0 = PATCH_RADIUS;
    if r <= 0.5 * r0 {
        1.0
    } else if r >= r0 {
        0.0
    } else {
        let u = (r - 0.5 * r0) / (0.5 * r0);
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        b / (a + b)
    }
}

fn gamma_half_integer(d: usize) -> f64 {
    // Γ(d/2) for integer d
    let mut g = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < 0.5 * d as f64 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Exact integral over `R^d` of the subtracted patch `χ(|x|) s(|x|²)`.
fn patch_integral(d: usize, which: Integrand) -> f64 {
    let area = 2.0 * PI.powf(0.5 * d as f64) / gamma_half_integer(d);
    // composite Simpson in r; the integrand r^{d-1} s(r²) χ(r) is integrable
    // and smooth for d >= 3 away from r = 0, where it vanishes or is log-mild
    let m = 200_000;
    let h = PATCH_RADIUS / m as f64;
    let mut acc = NeumaierSum::new();
    for i in 0..=m {
        let r = i as f64 * h;
        let v = if r == 0.0 {
            // limit of r^{d-1} s(r²) at the origin
            match which {
                Integrand::KPrime if d == 3 => 1.0 / (4.0 * PI * PI),
                _ => 0.0,
            }
        } else {
            r.powi(d as i32 - 1) * which.singular_part(r * r) * cutoff(r)
        };
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.add(w * v);
    }
    area * acc.value() * h / 3.0
}

fn wrapped_r2(x: &[f64]) -> f64 {
    x.iter()
        .map(|&xi| {
            let w = xi - xi.round();
            w * w
        })
        .sum()
}

fn point_value(which: Integrand, y: f64, x: &[f64], subtract: bool) -> f64 {
    let f: f64 = x.iter().map(|&xi| 4.0 * (PI * xi).sin().powi(2)).sum();
    let r2 = wrapped_r2(x);
    if subtract {
        let r = r2.sqrt();
        let c = cutoff(r);
        if c > 0.0 {
            if r2 == 0.0 {
                return 0.0;
            }
            return which.eval(y, f) - c * which.singular_part(r2);
        }
    }
    which.eval(y, f)
}

/// Generator of the Kronecker (R_d) sequence: `1/φ_d^i` with
/// `φ_d^{d+1} = φ_d + 1`.
fn kronecker_alpha(d: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..100 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|i| phi.powi(-(i as i32)).fract()).collect()
}

/// Randomly shifted Kronecker rule with `shifts` independent shifts; the
/// spread between shifts gives the error estimate.
pub(crate) fn kronecker(
    which: Integrand,
    d: usize,
    y: f64,
    points: u64,
    seed: u64,
    singularity: Singularity,
) -> (f64, f64) {
    let shifts = 16u64;
    let per = (points / shifts).max(1);
    let alpha = kronecker_alpha(d);
    let subtract = y == 0.0 && singularity != Singularity::None;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift_vecs: Vec<Vec<f64>> = (0..shifts)
        .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let means: Vec<f64> = shift_vecs
        .par_iter()
        .map(|u| {
            let mut acc = NeumaierSum::new();
            let mut x = vec![0.0; d];
            for k in 0..per {
                for i in 0..d {
                    x[i] = (u[i] + (k as f64 + 1.0) * alpha[i]).fract();
                }
                acc.add(point_value(which, y, &x, subtract));
            }
            acc.value() / per as f64
        })
        .collect();
    let (m, se) = mean_se(&means);
    let patch = if subtract { patch_integral(d, which) } else { 0.0 };
    (m + patch, se)
}

/// Periodic midpoint rule on an `m^d` grid, `m = round(points^{1/d})`; the
/// error estimate compares with the grid of half the resolution.
pub(crate) fn tensor_grid(which: Integrand, d: usize, y: f64, points: u64, singularity: Singularity) -> (f64, f64) {
    let m = ((points as f64).powf(1.0 / d as f64).round() as usize).max(2);
    let fine = midpoint(which, d, y, m, singularity);
    let coarse = midpoint(which, d, y, (m / 2).max(1), singularity);
    (fine, (fine - coarse).abs())
}

fn midpoint(which: Integrand, d: usize, y: f64, m: usize, singularity: Singularity) -> f64 {
    let subtract = y == 0.0 && singularity != Singularity::None;
    let total = m.pow(d as u32);
    let chunk = m.pow(d as u32 - 1);
    let partial: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut acc = NeumaierSum::new();
            let mut x = vec![0.0; d];
            for rest in 0..chunk {
                let mut r = rest;
                x[0] = (first as f64 + 0.5) / m as f64;
                for i in 1..d {
                    x[i] = ((r % m) as f64 + 0.5) / m as f64;
                    r /= m;
                }
                acc.add(point_value(which, y, &x, subtract));
            }
            acc.value()
        })
        .collect();
    let sum: f64 = crate::numerics::neumaier_sum(partial);
    let patch = if subtract { patch_integral(d, which) } else { 0.0 };
    sum / total as f64 + patch
}

/// Extrapolation of lattice sums over the sides `n, 2n, 4n`, where
/// `n = round(points^{1/d} / 4)`.
///
/// For `y > 0` the full lattice average (zero mode included) is a periodic
/// trapezoid rule and converges geometrically; the two finest sides give the
/// error estimate. At `y = 0` the zero mode is dropped and the known error
/// forms are eliminated: `c1/n + c3/n³` for `K'`, `(A log n + B)/n^d` for `K`.
pub(crate) fn lattice_extrapolation(which: Integrand, d: usize, y: f64, points: u64) -> (f64, f64) {
    let n0 = (((points as f64).powf(1.0 / d as f64) / 4.0).round() as usize).max(4);
    let ns = [n0, 2 * n0, 4 * n0];
    let vals: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let spec = TorusSpec::new(d, n).expect("valid torus");
            let s = Spectrum::new(spec);
            let big_n = spec.num_sites() as f64;
            match (which, y > 0.0) {
                (Integrand::K, true) => s.k_n(y).unwrap() + y.ln() / big_n,
                (Integrand::KPrime, true) => s.k_n_prime(y).unwrap() + 1.0 / (big_n * y),
                (Integrand::K, false) => s.k_n(0.0).unwrap(),
                (Integrand::KPrime, false) => s.k_n_prime(0.0).unwrap(),
            }
        })
        .collect();
    if y > 0.0 {
        return (vals[2], (vals[2] - vals[1]).abs());
    }
    let basis = |n: usize| -> [f64; 3] {
        let nf = n as f64;
        match which {
            Integrand::KPrime => [1.0, 1.0 / nf, nf.powi(-3)],
            Integrand::K => [1.0, nf.ln() * nf.powi(-(d as i32)), nf.powi(-(d as i32))],
        }
    };
    let rows: Vec<[f64; 3]> = ns.iter().map(|&n| basis(n)).collect();
    let est = solve3(&rows, &vals);
    // the two-term version on the coarser pair gives a crude error scale
    let two = {
        let a = basis(ns[1]);
        let b = basis(ns[2]);
        (vals[2] * a[1] - vals[1] * b[1]) / (a[1] - b[1])
    };
    (est, (est - two).abs())
}

fn solve3(a: &[[f64; 3]], b: &[f64]) -> f64 {
    // Cramer's rule for the constant term
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let full = [a[0], a[1], a[2]];
    let mut num = full;
    for i in 0..3 {
        num[i][0] = b[i];
    }
    det(num) / det(full)
}
