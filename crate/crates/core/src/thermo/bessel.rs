//! One-dimensional Laplace representation of the lattice integrals.
//!
//! For `y >= 0`,
//! `K'(y) = ∫_0^∞ e^{-ty} g(t)^d dt` and
//! `K(y)  = ∫_0^∞ (e^{-t} - e^{-ty} g(t)^d) dt / t`,
//! with `g(t) = e^{-2t} I0(2t)` the characteristic function of one
//! coordinate of the symbol. The substitution `t = e^s` makes both
//! integrands analytic in a strip around the real axis, so the trapezoid
//! rule in `s` converges geometrically.

use crate::numerics::{i0e, NeumaierSum};

/// Precomputed trapezoid nodes in `s = log t` with cached `g(t)^d`.
#[derive(Debug, Clone)]
pub struct BesselKernel {
    d: usize,
    h: f64,
    t: Vec<f64>,
    gd: Vec<f64>,
}

/// Above this mass the large-`y` expansion is used instead of quadrature.
const LARGE_Y: f64 = 1e10;

impl BesselKernel {
    pub const DEFAULT_STEP: f64 = 0.1;
    pub const S_MIN: f64 = -38.0;
    pub const S_MAX: f64 = 84.0;

    pub fn new(d: usize) -> Self {
        Self::with_grid(d, Self::DEFAULT_STEP, Self::S_MIN, Self::S_MAX)
    }

    pub fn with_grid(d: usize, h: f64, s_min: f64, s_max: f64) -> Self {
        let count = ((s_max - s_min) / h).round() as usize + 1;
        let mut t = Vec::with_capacity(count);
        let mut gd = Vec::with_capacity(count);
        for j in 0..count {
            let tj = (s_min + j as f64 * h).exp();
            t.push(tj);
            gd.push(i0e(2.0 * tj).powi(d as i32));
        }
        Self { d, h, t, gd }
    }

    pub fn nodes(&self) -> usize {
        self.t.len()
    }

    /// Tail of the `K'` integral beyond the last node at `y = 0`,
    /// using `g(t)^d ~ (4πt)^{-d/2}`.
    fn tail_prime(&self) -> f64 {
        let big_t = *self.t.last().unwrap();
        let a = 0.5 * self.d as f64;
        (4.0 * std::f64::consts::PI).powf(-a) * big_t.powf(1.0 - a) / (a - 1.0)
    }

    /// Sums `h Σ w_j` over all nodes and over the even nodes with step `2h`,
    /// returning the fine sum and the discrepancy between the two.
    fn two_level<F: Fn(usize) -> f64>(&self, term: F) -> (f64, f64, f64) {
        let mut fine = NeumaierSum::new();
        let mut coarse = NeumaierSum::new();
        let mut abs = 0.0;
        for j in 0..self.t.len() {
            let v = term(j);
            fine.add(v);
            abs += v.abs();
            if j % 2 == 0 {
                coarse.add(v);
            }
        }
        let f = self.h * fine.value();
        let c = 2.0 * self.h * coarse.value();
        (f, (f - c).abs(), self.h * abs)
    }

    /// `K'(y)` with an error estimate.
    pub fn k_prime(&self, y: f64) -> (f64, f64) {
        if y > LARGE_Y {
            let d = self.d as f64;
            let v = 1.0 / y - 2.0 * d / (y * y) + (4.0 * d * d + 2.0 * d) / (y * y * y);
            return (v, 1e-16 * v);
        }
        let (v, diff, abs) = self.two_level(|j| self.t[j] * (-self.t[j] * y).exp() * self.gd[j]);
        let tail = if y == 0.0 { self.tail_prime() } else { 0.0 };
        (v + tail, diff + 4.0 * f64::EPSILON * abs + tail * 1e-3)
    }

    /// `K'(y)` and `K''(y)` in one pass (no error estimate).
    pub fn k_prime_and_second(&self, y: f64) -> (f64, f64) {
        if y > LARGE_Y {
            let d = self.d as f64;
            let kp = 1.0 / y - 2.0 * d / (y * y) + (4.0 * d * d + 2.0 * d) / (y * y * y);
            let kpp = -1.0 / (y * y) + 4.0 * d / (y * y * y);
            return (kp, kpp);
        }
        let mut s1 = NeumaierSum::new();
        let mut s2 = NeumaierSum::new();
        for j in 0..self.t.len() {
            let tj = self.t[j];
            let w = tj * (-tj * y).exp() * self.gd[j];
            s1.add(w);
            s2.add(tj * w);
        }
        let tail = if y == 0.0 { self.tail_prime() } else { 0.0 };
        (self.h * s1.value() + tail, -self.h * s2.value())
    }

    /// `K(y)` with an error estimate.
    pub fn k(&self, y: f64) -> (f64, f64) {
        if y > LARGE_Y {
            let d = self.d as f64;
            let v = y.ln() + 2.0 * d / y - (4.0 * d * d + 2.0 * d) / (2.0 * y * y);
            return (v, 1e-16 * v.abs());
        }
        let (v, diff, abs) = self.two_level(|j| {
            let tj = self.t[j];
            (-tj).exp() - (-tj * y).exp() * self.gd[j]
        });
        // at y = 0 the integrand decays like t^{-d/2}; its tail is negligible
        // next to the node spacing error for the default grid
        (v, diff + 4.0 * f64::EPSILON * abs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_checks() {
        // d = 1: K(y) = ∫ log(y + 4 sin²(πx)) dx = 2 log((sqrt(y) + sqrt(y+4))/2)
        let k = BesselKernel::new(1);
        for y in [0.3f64, 1.0, 5.0] {
            let exact = 2.0 * (y.sqrt() / 2.0 + (y / 4.0 + 1.0).sqrt()).ln();
            let (v, _) = k.k(y);
            assert!((v - exact).abs() < 1e-12, "y={y}: {v} vs {exact}");
            // K'(y) = 1/sqrt(y(y+4))
            let (vp, _) = k.k_prime(y);
            assert!((vp - 1.0 / (y * (y + 4.0)).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_matches_difference() {
        let k = BesselKernel::new(3);
        let y = 0.7;
        let h = 1e-4;
        let fd = (k.k_prime(y + h).0 - k.k_prime(y - h).0) / (2.0 * h);
        assert!((k.k_prime_and_second(y).1 - fd).abs() < 1e-7);
    }
}
