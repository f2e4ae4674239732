//! Infinite-volume free-field functions on `Z^d`:
//! `K(y) = ∫ log(y + f)`, `K'(y) = ∫ 1/(y + f)` over the unit cube,
//! `C_d = K'(0)`, the inverse `L` of `K'` (extended by zero above `C_d`),
//! `W(b) = K(L(b)) - b L(b)` and `Ŵ(b) = W(b) + 1 + log b`.
//!
//! The default evaluator uses the one-dimensional Laplace representation in
//! [`bessel`]. Cube quadratures ([`QuadMethod::Kronecker`],
//! [`QuadMethod::TensorGrid`], [`QuadMethod::LatticeExtrapolation`]) and the
//! random-walk estimate of `C_d` are kept as independent checks.

mod bessel;
pub mod cache;
mod qmc;
pub mod random_walk;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use bessel::BesselKernel;
pub use cache::{default_cache_dir, CacheRecord, DiskCache, CACHE_DIR_ENV};
pub use random_walk::{random_walk_c_d, WalkEstimate};

/// Quadrature rule for the cube integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    /// Trapezoid rule on the Laplace representation (default).
    Laplace,
    /// Kronecker sequence with random Cranley–Patterson shifts.
    Kronecker,
    /// Periodic midpoint rule on a tensor grid.
    TensorGrid,
    /// Extrapolated finite-torus sums.
    LatticeExtrapolation,
}

impl QuadMethod {
    pub fn name(&self) -> &'static str {
        match self {
            QuadMethod::Laplace => "laplace",
            QuadMethod::Kronecker => "kronecker",
            QuadMethod::TensorGrid => "tensor-grid",
            QuadMethod::LatticeExtrapolation => "lattice-extrapolation",
        }
    }
}

/// Treatment of the origin singularity at `y = 0` for the cube rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Singularity {
    None,
    /// Subtract a smoothly cut-off copy of the leading term and add its
    /// exact integral.
    OriginSubtraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    /// Number of points for cube rules; ignored by the Laplace rule.
    pub points: u64,
    pub seed: u64,
    pub singularity: Singularity,
    /// Absolute error above which evaluations fail.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadMethod::Laplace,
            points: 1 << 22,
            seed: 0,
            singularity: Singularity::OriginSubtraction,
            tol: 1e-4,
        }
    }
}

impl QuadratureSpec {
    pub fn with_method(method: QuadMethod, points: u64) -> Self {
        Self {
            method,
            points,
            ..Self::default()
        }
    }

    /// Canonical key; the cache file name is derived from its hash.
    pub fn key(&self) -> String {
        let sing = match self.singularity {
            Singularity::None => "none",
            Singularity::OriginSubtraction => "origin-subtraction",
        };
        match self.method {
            QuadMethod::Laplace => format!(
                "laplace;h={};s={}..{}",
                BesselKernel::DEFAULT_STEP,
                BesselKernel::S_MIN,
                BesselKernel::S_MAX
            ),
            m => format!("{};points={};seed={};sing={}", m.name(), self.points, self.seed, sing),
        }
    }

    pub fn hash_hex(&self) -> String {
        cache::sha_hex(&self.key())
    }
}

/// A value together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn check_d(d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::DivergentConstant(d));
    }
    Ok(())
}

fn check_y(y: f64) -> Result<()> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(invalid(format!("y must be finite and >= 0, got {y}")));
    }
    Ok(())
}

fn check_b(b: f64) -> Result<()> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid(format!("b must be finite and > 0, got {b}")));
    }
    Ok(())
}

/// Evaluator bundle for one dimension.
///
/// Immutable apart from an optional memo, so it can be shared across threads.
#[derive(Debug)]
pub struct ThermoFunctions {
    d: usize,
    quad: QuadratureSpec,
    kernel: BesselKernel,
    c_d: Estimate,
    k0: Estimate,
    memo: Option<Mutex<Memo>>,
}

#[derive(Debug)]
struct Memo {
    values: BTreeMap<u64, CacheRecord>,
    disk: Option<DiskCache>,
}

impl ThermoFunctions {
    /// Default evaluator (Laplace representation).
    pub fn new(d: usize) -> Result<Self> {
        Self::with_quadrature(d, QuadratureSpec::default())
    }

    pub fn with_quadrature(d: usize, quad: QuadratureSpec) -> Result<Self> {
        Self::build(d, quad, None)
    }

    /// Evaluator whose `K`/`K'` values are memoized in `dir`.
    pub fn with_cache(d: usize, quad: QuadratureSpec, dir: &Path) -> Result<Self> {
        let disk = DiskCache::open(dir, &quad)?;
        Self::build(d, quad, Some(disk))
    }

    fn build(d: usize, quad: QuadratureSpec, disk: Option<DiskCache>) -> Result<Self> {
        check_d(d)?;
        let memo = if disk.is_some() || quad.method != QuadMethod::Laplace {
            Some(Mutex::new(Memo {
                values: BTreeMap::new(),
                disk,
            }))
        } else {
            None
        };
        let mut t = Self {
            d,
            quad,
            kernel: BesselKernel::new(d),
            c_d: Estimate { value: 0.0, error: 0.0 },
            k0: Estimate { value: 0.0, error: 0.0 },
            memo,
        };
        let rec = t.record(0.0)?;
        t.c_d = Estimate {
            value: rec.k_prime,
            error: rec.err,
        };
        t.k0 = Estimate {
            value: rec.k,
            error: rec.err,
        };
        Ok(t)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// `C_d = K'(0)`.
    pub fn c_d(&self) -> f64 {
        self.c_d.value
    }

    pub fn c_d_estimate(&self) -> Estimate {
        self.c_d
    }

    /// `K(0)`.
    pub fn k0(&self) -> f64 {
        self.k0.value
    }

    /// Path of the disk cache, if one is attached.
    pub fn cache_path(&self) -> Option<std::path::PathBuf> {
        let memo = self.memo.as_ref()?.lock().unwrap();
        memo.disk.as_ref().map(|c| c.path().to_path_buf())
    }

    /// Writes memoized values to the disk cache, if attached.
    pub fn flush_cache(&self) -> Result<()> {
        if let Some(m) = &self.memo {
            let mut memo = m.lock().unwrap();
            let values: Vec<(u64, CacheRecord)> = memo.values.iter().map(|(k, v)| (*k, *v)).collect();
            if let Some(disk) = memo.disk.as_mut() {
                for (ybits, rec) in values {
                    disk.insert(self.d, f64::from_bits(ybits), rec);
                }
                disk.flush()?;
            }
        }
        Ok(())
    }

    fn compute(&self, y: f64) -> CacheRecord {
        use qmc::Integrand;
        let q = &self.quad;
        let (k, ek, kp, ekp) = match q.method {
            QuadMethod::Laplace => {
                let (k, ek) = self.kernel.k(y);
                let (kp, ekp) = self.kernel.k_prime(y);
                (k, ek, kp, ekp)
            }
            QuadMethod::Kronecker => {
                let (k, ek) = qmc::kronecker(Integrand::K, self.d, y, q.points, q.seed, q.singularity);
                let (kp, ekp) = qmc::kronecker(Integrand::KPrime, self.d, y, q.points, q.seed, q.singularity);
                (k, ek, kp, ekp)
            }
            QuadMethod::TensorGrid => {
                let (k, ek) = qmc::tensor_grid(Integrand::K, self.d, y, q.points, q.singularity);
                let (kp, ekp) = qmc::tensor_grid(Integrand::KPrime, self.d, y, q.points, q.singularity);
                (k, ek, kp, ekp)
            }
            QuadMethod::LatticeExtrapolation => {
                let (k, ek) = qmc::lattice_extrapolation(Integrand::K, self.d, y, q.points);
                let (kp, ekp) = qmc::lattice_extrapolation(Integrand::KPrime, self.d, y, q.points);
                (k, ek, kp, ekp)
            }
        };
        CacheRecord {
            k,
            k_prime: kp,
            err: ek.max(ekp),
        }
    }

    fn record(&self, y: f64) -> Result<CacheRecord> {
        check_y(y)?;
        let Some(m) = &self.memo else {
            return Ok(self.compute(y));
        };
        {
            let memo = m.lock().unwrap();
            if let Some(r) = memo.values.get(&y.to_bits()) {
                return Ok(*r);
            }
            if let Some(r) = memo.disk.as_ref().and_then(|c| c.get(self.d, y)) {
                return Ok(r);
            }
        }
        let r = self.compute(y);
        m.lock().unwrap().values.insert(y.to_bits(), r);
        Ok(r)
    }

    fn checked(&self, value: f64, error: f64) -> Result<Estimate> {
        if error > self.quad.tol {
            return Err(Error::AccuracyNotMet {
                value,
                error,
                requested: self.quad.tol,
            });
        }
        Ok(Estimate { value, error })
    }

    /// `K(y)` with its error estimate.
    pub fn k(&self, y: f64) -> Result<Estimate> {
        let r = self.record(y)?;
        self.checked(r.k, r.err)
    }

    /// `K'(y)` with its error estimate.
    pub fn k_prime(&self, y: f64) -> Result<Estimate> {
        let r = self.record(y)?;
        self.checked(r.k_prime, r.err)
    }

    /// `K''(y)` from the Laplace representation (negative; `-∞` at 0 for d ≤ 4).
    pub fn k_second(&self, y: f64) -> Result<f64> {
        check_y(y)?;
        Ok(self.kernel.k_prime_and_second(y).1)
    }

    /// `L(b)`: the root of `K'(y) = b` for `b < C_d`, and 0 for `b >= C_d`.
    pub fn l(&self, b: f64) -> Result<f64> {
        check_b(b)?;
        if b >= self.c_d.value {
            return Ok(0.0);
        }
        if self.quad.method == QuadMethod::Laplace {
            return Ok(self.l_newton(b));
        }
        // generic route: bisection on the configured evaluator
        let f = |y: f64| self.record(y).map(|r| r.k_prime - b).unwrap_or(f64::NAN);
        crate::numerics::bisect_secant(f, 0.0, 1.0 / b, 1e-13, 0.0)
    }

    /// Safeguarded Newton iteration on `K'(y) = b` with bracket `[0, 1/b]`.
    fn l_newton(&self, b: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0 / b;
        let d2 = 2.0 * self.d as f64;
        // K'(y) ≈ 1/(y + 2d) for large y
        let mut y = (1.0 / b - d2).clamp(0.0, hi);
        if y == 0.0 {
            y = 0.5 * hi;
        }
        for _ in 0..200 {
            let (kp, kpp) = self.kernel.k_prime_and_second(y);
            let g = kp - b;
            if g == 0.0 {
                return y;
            }
            if g > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            if g.abs() <= 4.0 * f64::EPSILON * b || hi - lo <= 1e-15 * hi.max(1e-300) {
                return y;
            }
            let mut next = y - g / kpp;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-15 * y.max(1e-300) {
                return next;
            }
            y = next;
        }
        y
    }

    /// `W(b) = K(L(b)) - b L(b)` for `b < C_d`, `K(0)` otherwise.
    pub fn w(&self, b: f64) -> Result<f64> {
        check_b(b)?;
        if b >= self.c_d.value {
            return Ok(self.k0.value);
        }
        let l = self.l(b)?;
        Ok(self.k(l)?.value - b * l)
    }

    /// `W'(b) = -L(b)`.
    pub fn w_prime(&self, b: f64) -> Result<f64> {
        Ok(-self.l(b)?)
    }

    /// `Ŵ(b) = W(b) + 1 + log b` on `(0, C_d]`.
    pub fn w_hat(&self, b: f64) -> Result<f64> {
        check_b(b)?;
        if b > self.c_d.value {
            return Err(invalid(format!("b = {b} exceeds C_d = {}", self.c_d.value)));
        }
        Ok(self.w(b)? + 1.0 + b.ln())
    }
}

/// `K(y)` in dimension `d` with the given quadrature.
pub fn k(y: f64, d: usize, quad: &QuadratureSpec) -> Result<Estimate> {
    check_y(y)?;
    ThermoFunctions::with_quadrature(d, *quad)?.k(y)
}

/// `K'(y)` in dimension `d` with the given quadrature.
pub fn k_prime(y: f64, d: usize, quad: &QuadratureSpec) -> Result<Estimate> {
    check_y(y)?;
    ThermoFunctions::with_quadrature(d, *quad)?.k_prime(y)
}

/// `C_d = K'(0)`; fails for `d < 3` where the integral diverges.
pub fn compute_c_d(d: usize, quad: &QuadratureSpec) -> Result<Estimate> {
    check_d(d)?;
    Ok(ThermoFunctions::with_quadrature(d, *quad)?.c_d_estimate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c3_matches_watson_value() {
        // 2d C_3 is Watson's simple-cubic Green's function 1.516386059...
        let t = ThermoFunctions::new(3).unwrap();
        assert!((6.0 * t.c_d() - 1.516_386_059_151_978).abs() < 1e-12);
    }

    #[test]
    fn low_dimensions_diverge() {
        assert!(matches!(ThermoFunctions::new(2), Err(Error::DivergentConstant(2))));
    }

    #[test]
    fn l_inverts_k_prime() {
        let t = ThermoFunctions::new(3).unwrap();
        for b in [1e-4, 0.01, 0.1, 0.2, 0.25] {
            let y = t.l(b).unwrap();
            let r = t.k_prime(y).unwrap().value;
            assert!((r - b).abs() < 1e-12, "b={b}: K'(L(b)) = {r}");
            assert!(b * y <= 1.0);
        }
        assert_eq!(t.l(t.c_d()).unwrap(), 0.0);
        assert!(t.l(0.0).is_err());
    }
}
