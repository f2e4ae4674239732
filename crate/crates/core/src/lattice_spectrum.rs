//! Spectrum of the (positive) nearest-neighbour Laplacian on the discrete
//! torus `{0,…,n-1}^d` and the finite-volume averages built from it.
//!
//! Modes are enumerated in row-major multi-index order (last axis fastest).
//! Sums run over eigenvalues sorted in ascending order and use compensated
//! summation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{bisect_secant, NeumaierSum};

/// Geometry of a `d`-dimensional torus of side `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusSpec {
    d: usize,
    n: usize,
    big_n: usize,
}

impl TorusSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if n < 2 {
            return Err(invalid(format!("side length must be at least 2, got {n}")));
        }
        let mut big_n: usize = 1;
        for _ in 0..d {
            big_n = big_n
                .checked_mul(n)
                .ok_or_else(|| invalid(format!("n^d overflows for n={n}, d={d}")))?;
        }
        Ok(Self { d, n, big_n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sites `N = n^d`.
    pub fn num_sites(&self) -> usize {
        self.big_n
    }

    /// Row-major linear index of a multi-index.
    pub fn linear_index(&self, k: &[usize]) -> Result<usize> {
        if k.len() != self.d {
            return Err(invalid(format!(
                "multi-index has {} entries, expected {}",
                k.len(),
                self.d
            )));
        }
        let mut idx = 0;
        for &ki in k {
            if ki >= self.n {
                return Err(invalid(format!("index component {ki} out of range 0..{}", self.n)));
            }
            idx = idx * self.n + ki;
        }
        Ok(idx)
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut k = vec![0; self.d];
        for i in (0..self.d).rev() {
            k[i] = idx % self.n;
            idx /= self.n;
        }
        k
    }

    /// Stride of axis `axis` in the row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Linear index of the neighbour of `site` one step along `axis`,
    /// forwards if `forward` else backwards (periodic).
    #[inline]
    pub fn neighbor(&self, site: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let coord = (site / stride) % self.n;
        if forward {
            if coord + 1 == self.n {
                site + stride - self.n * stride
            } else {
                site + stride
            }
        } else if coord == 0 {
            site + (self.n - 1) * stride
        } else {
            site - stride
        }
    }
}

/// The symbol `f(x) = 4 Σ sin²(π x_i)` on `[0,1]^d`.
pub fn symbol_f(x: &[f64]) -> f64 {
    x.iter().map(|&xi| 4.0 * (PI * xi).sin().powi(2)).sum()
}

fn one_dim_values(n: usize) -> Vec<f64> {
    (0..n).map(|j| 4.0 * (PI * j as f64 / n as f64).sin().powi(2)).collect()
}

/// Eigenvalue `λ_k = f(k/n)` of the Laplacian for mode `k`.
pub fn eigenvalue(k: &[usize], spec: &TorusSpec) -> Result<f64> {
    spec.linear_index(k)?;
    let s = one_dim_values(spec.n);
    Ok(k.iter().map(|&ki| s[ki]).sum())
}

/// All `N` eigenvalues in row-major mode order.
pub fn eigenvalues(spec: &TorusSpec) -> Vec<f64> {
    let s = one_dim_values(spec.n);
    let mut out = vec![0.0; spec.big_n];
    for (idx, v) in out.iter_mut().enumerate() {
        let mut rem = idx;
        let mut acc = 0.0;
        for _ in 0..spec.d {
            acc += s[rem % spec.n];
            rem /= spec.n;
        }
        *v = acc;
    }
    out
}

/// Values reported together at a given mass parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub y: f64,
    pub k_n: f64,
    pub k_n_prime: f64,
    pub m_n: BTreeMap<String, f64>,
}

/// Root returned with its achieved residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootReport {
    pub y: f64,
    pub residual: f64,
}

/// Sorted nonzero eigenvalues of a torus, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Spectrum {
    spec: TorusSpec,
    nonzero: Vec<f64>,
}

impl Spectrum {
    pub fn new(spec: TorusSpec) -> Self {
        let mut all = eigenvalues(&spec);
        all[0] = f64::NAN;
        let mut nonzero: Vec<f64> = all.into_iter().filter(|v| !v.is_nan()).collect();
        nonzero.sort_by(|a, b| a.total_cmp(b));
        Self { spec, nonzero }
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    /// Nonzero eigenvalues in ascending order.
    pub fn nonzero(&self) -> &[f64] {
        &self.nonzero
    }

    fn average<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let mut s = NeumaierSum::new();
        for &l in &self.nonzero {
            s.add(g(l));
        }
        s.value() / self.spec.big_n as f64
    }

    fn check_y(y: f64) -> Result<()> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(invalid(format!("mass parameter y must be finite and >= 0, got {y}")));
        }
        Ok(())
    }

    /// `K_N(y) = (1/N) Σ_{k≠0} log(y + λ_k)`.
    pub fn k_n(&self, y: f64) -> Result<f64> {
        Self::check_y(y)?;
        Ok(self.average(|l| (y + l).ln()))
    }

    /// `K_N'(y) = (1/N) Σ_{k≠0} 1/(y + λ_k)`.
    pub fn k_n_prime(&self, y: f64) -> Result<f64> {
        Self::check_y(y)?;
        Ok(self.average(|l| 1.0 / (y + l)))
    }

    /// Per-site mass of the massive free field including the zero mode,
    /// `(1/N) Σ_{all k} 1/(y + λ_k)`. Requires `y > 0`.
    pub fn mgff_site_variance(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(invalid(format!("the zero mode needs y > 0, got {y}")));
        }
        Ok(self.k_n_prime(y)? + 1.0 / (self.spec.big_n as f64 * y))
    }

    /// `m_N(p) = (1/N) Σ_{k≠0} λ_k^{-p}`.
    pub fn m_n(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(invalid(format!("exponent p must be positive, got {p}")));
        }
        Ok(self.average(|l| l.powf(-p)))
    }

    /// `m_N(p)` accumulated over the distinct eigenvalues with multiplicities.
    /// Independent of the mode enumeration used by [`m_n`](Self::m_n).
    pub fn m_n_multiset(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(invalid(format!("exponent p must be positive, got {p}")));
        }
        let n = self.spec.n;
        let s = one_dim_values(n);
        // canonical 1-D index j -> min(j, n - j); a mode class is a sorted tuple
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        let mut one_d: BTreeMap<usize, u64> = BTreeMap::new();
        for j in 0..n {
            *one_d.entry(j.min(n - j)).or_default() += 1;
        }
        let classes: Vec<(usize, u64)> = one_d.into_iter().collect();
        let mut stack: Vec<(Vec<usize>, u64)> = vec![(vec![], 1)];
        while let Some((tuple, mult)) = stack.pop() {
            if tuple.len() == self.spec.d {
                let mut key = tuple.clone();
                key.sort_unstable();
                *counts.entry(key).or_default() += mult;
                continue;
            }
            let start = tuple
                .last()
                .map_or(0, |&last| classes.iter().position(|c| c.0 == last).unwrap());
            // enumerate nondecreasing tuples; multiplicity counts orderings
            for &(j, m) in &classes[start..] {
                let mut t = tuple.clone();
                t.push(j);
                stack.push((t, mult * m));
            }
        }
        // convert tuple multiplicities into ordered-tuple counts
        let mut terms: Vec<(f64, f64)> = Vec::new();
        for (key, mult) in counts {
            if key.iter().all(|&j| j == 0) {
                continue;
            }
            let lambda: f64 = key.iter().map(|&j| s[j]).sum();
            let perms = permutations(&key) as f64;
            terms.push((lambda, mult as f64 * perms));
        }
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = NeumaierSum::new();
        for (lambda, w) in terms {
            acc.add(w * lambda.powf(-p));
        }
        Ok(acc.value() / self.spec.big_n as f64)
    }

    pub fn summary(&self, y: f64, exponents: &[f64]) -> Result<SpectrumSummary> {
        let mut m_n = BTreeMap::new();
        for &p in exponents {
            m_n.insert(format!("{p}"), self.m_n(p)?);
        }
        Ok(SpectrumSummary {
            y,
            k_n: self.k_n(y)?,
            k_n_prime: self.k_n_prime(y)?,
            m_n,
        })
    }

    /// Solves `K_N'(y) = θ` (zero mode excluded).
    pub fn solve_y_n(&self, theta: f64) -> Result<RootReport> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(invalid(format!("theta must be positive, got {theta}")));
        }
        let k0 = self.k_n_prime(0.0)?;
        if theta > k0 {
            return Err(Error::NoSolution(format!("theta = {theta} exceeds K_N'(0) = {k0}")));
        }
        if theta == k0 {
            return Ok(RootReport { y: 0.0, residual: 0.0 });
        }
        let big_n = self.spec.big_n as f64;
        let hi = f64::max(1.0, (1.0 - 1.0 / big_n) / theta);
        let g = |y: f64| self.average(|l| 1.0 / (y + l)) - theta;
        let y = bisect_secant(g, 0.0, hi, 1e-15, 0.0)?;
        Ok(RootReport {
            y,
            residual: g(y).abs(),
        })
    }

    /// Solves `(1/N) Σ_{all k} 1/(y + λ_k) = θ` (zero mode included). Always
    /// solvable for `θ > 0` since the left side decreases from infinity.
    pub fn solve_y_n_with_zero_mode(&self, theta: f64) -> Result<RootReport> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(invalid(format!("theta must be positive, got {theta}")));
        }
        let big_n = self.spec.big_n as f64;
        let g = |y: f64| self.average(|l| 1.0 / (y + l)) + 1.0 / (big_n * y) - theta;
        // the sum is at most 1/y, so y = 1/θ brackets from above
        let hi = 1.0 / theta;
        let mut lo = hi;
        while g(lo) < 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::NoSolution("zero-mode solve failed to bracket".into()));
            }
        }
        let y = bisect_secant(g, lo, hi, 1e-15, 0.0)?;
        Ok(RootReport {
            y,
            residual: g(y).abs(),
        })
    }
}

fn permutations(key: &[usize]) -> u64 {
    // number of distinct orderings of the multiset `key`
    let mut fact = vec![1u64; key.len() + 1];
    for i in 1..=key.len() {
        fact[i] = fact[i - 1] * i as u64;
    }
    let mut total = fact[key.len()];
    let mut i = 0;
    while i < key.len() {
        let mut j = i;
        while j < key.len() && key[j] == key[i] {
            j += 1;
        }
        total /= fact[j - i];
        i = j;
    }
    total
}

/// `K_N(y)` for a single evaluation.
pub fn k_n(y: f64, spec: &TorusSpec) -> Result<f64> {
    Spectrum::new(*spec).k_n(y)
}

/// `K_N'(y)` for a single evaluation.
pub fn k_n_prime(y: f64, spec: &TorusSpec) -> Result<f64> {
    Spectrum::new(*spec).k_n_prime(y)
}

/// `m_N(p)` for a single evaluation.
pub fn m_n(p: f64, spec: &TorusSpec) -> Result<f64> {
    Spectrum::new(*spec).m_n(p)
}

/// Solves `K_N'(y) = θ`.
pub fn solve_y_n(theta: f64, spec: &TorusSpec) -> Result<RootReport> {
    Spectrum::new(*spec).solve_y_n(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_bad_geometry() {
        assert!(TorusSpec::new(0, 4).is_err());
        assert!(TorusSpec::new(3, 1).is_err());
        assert!(TorusSpec::new(64, 1 << 20).is_err());
        assert_eq!(TorusSpec::new(3, 5).unwrap().num_sites(), 125);
    }

    #[test]
    fn index_round_trip_and_neighbors() {
        let spec = TorusSpec::new(3, 4).unwrap();
        for i in 0..spec.num_sites() {
            let k = spec.multi_index(i);
            assert_eq!(spec.linear_index(&k).unwrap(), i);
            for axis in 0..3 {
                let f = spec.neighbor(i, axis, true);
                assert_eq!(spec.neighbor(f, axis, false), i);
                let mut kf = k.clone();
                kf[axis] = (kf[axis] + 1) % 4;
                assert_eq!(spec.linear_index(&kf).unwrap(), f);
            }
        }
        assert!(spec.linear_index(&[0, 4, 0]).is_err());
    }

    #[test]
    fn symbol_values() {
        assert_eq!(symbol_f(&[0.0, 0.0, 0.0]), 0.0);
        assert!((symbol_f(&[0.5, 0.5, 0.5]) - 12.0).abs() < 1e-14);
        assert!((symbol_f(&[0.25, 0.0, 0.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_torus_multiset() {
        let spec = TorusSpec::new(3, 2).unwrap();
        assert!((eigenvalue(&[1, 1, 0], &spec).unwrap() - 8.0).abs() < 1e-14);
        assert!(eigenvalue(&[2, 0, 0], &spec).is_err());
        let mut ev = eigenvalues(&spec);
        ev.sort_by(|a, b| a.total_cmp(b));
        let expect = [0.0, 4.0, 4.0, 4.0, 8.0, 8.0, 8.0, 12.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn y_n_round_trip() {
        let s = Spectrum::new(TorusSpec::new(3, 6).unwrap());
        let theta = s.k_n_prime(3.7).unwrap();
        let r = s.solve_y_n(theta).unwrap();
        assert!((r.y - 3.7).abs() < 1e-10);
        assert!(s.solve_y_n(s.k_n_prime(0.0).unwrap() * 1.01).is_err());
        assert!(s.solve_y_n(-1.0).is_err());
    }

    #[test]
    fn zero_mode_solve() {
        let s = Spectrum::new(TorusSpec::new(3, 4).unwrap());
        let r = s.solve_y_n_with_zero_mode(0.4).unwrap();
        assert!((s.mgff_site_variance(r.y).unwrap() - 0.4).abs() < 1e-12);
    }
}
