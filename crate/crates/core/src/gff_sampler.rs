//! Spectral sampling of the massive Gaussian free field on the torus, with
//! and without the zero mode, and empirical checks of its mass and maximum.
//!
//! Fields are `Ψ = Σ_k ζ_k (λ_k + y)^{-1/2} φ^k` with `φ^k_x = N^{-1/2}
//! e^{2πi k·x/n}` and i.i.d. standard complex Gaussians `ζ_k`
//! (`E|ζ|² = 1`), synthesized by an inverse FFT along each axis.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::ComplexField;
use crate::lattice_spectrum::{eigenvalues, Spectrum, TorusSpec};
use crate::thermo::ThermoFunctions;

/// Generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A standard complex Gaussian: real and imaginary parts i.i.d. `N(0, 1/2)`.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GffSample {
    pub spec: TorusSpec,
    pub y: f64,
    pub zero_average: bool,
    pub field: ComplexField,
    pub seed: u64,
}

/// Mode amplitudes `ζ_k / sqrt(λ_k + y)` in row-major mode order.
fn mode_amplitudes(spec: &TorusSpec, y: f64, zero_average: bool, seed: u64) -> Vec<Complex64> {
    let mut rng = rng_for(seed, 0);
    eigenvalues(spec)
        .into_iter()
        .enumerate()
        .map(|(k, lam)| {
            // the zero mode is always drawn so both variants share the other modes
            let z = complex_gaussian(&mut rng);
            if k == 0 && zero_average {
                Complex64::new(0.0, 0.0)
            } else {
                z / (lam + y).sqrt()
            }
        })
        .collect()
}

/// In-place unnormalized inverse DFT over every axis of a row-major array.
fn inverse_fft_nd(spec: &TorusSpec, data: &mut [Complex64]) {
    let n = spec.n();
    let d = spec.d();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let total = data.len();
    for axis in 0..d {
        let stride = spec.stride(axis);
        for start in 0..total {
            // visit each line once, from the element whose axis coordinate is 0
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for j in 0..n {
                line[j] = data[start + j * stride];
            }
            fft.process(&mut line);
            for j in 0..n {
                data[start + j * stride] = line[j];
            }
        }
    }
}

fn synthesize(spec: &TorusSpec, mut coeffs: Vec<Complex64>) -> Result<ComplexField> {
    inverse_fft_nd(spec, &mut coeffs);
    let s = 1.0 / (spec.num_sites() as f64).sqrt();
    coeffs.iter_mut().for_each(|z| *z *= s);
    ComplexField::from_vec(*spec, coeffs)
}

/// `Σ_k c_k φ^k` by direct summation; `O(N²)`, for testing.
pub fn direct_synthesis(spec: &TorusSpec, coeffs: &[Complex64]) -> Result<ComplexField> {
    let n_sites = spec.num_sites();
    if coeffs.len() != n_sites {
        return Err(invalid("one coefficient per mode is required"));
    }
    let n = spec.n() as f64;
    let norm = 1.0 / (n_sites as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); n_sites];
    for (x, o) in out.iter_mut().enumerate() {
        let xi = spec.multi_index(x);
        for (k, c) in coeffs.iter().enumerate() {
            let ki = spec.multi_index(k);
            let phase: f64 = ki.iter().zip(&xi).map(|(a, b)| (a * b) as f64).sum::<f64>() / n;
            *o += c * Complex64::from_polar(norm, 2.0 * std::f64::consts::PI * phase);
        }
    }
    ComplexField::from_vec(*spec, out)
}

/// The mode amplitudes a sample with these arguments is built from.
pub fn sample_coefficients(spec: &TorusSpec, y: f64, zero_average: bool, seed: u64) -> Result<Vec<Complex64>> {
    check_mass(y, zero_average)?;
    Ok(mode_amplitudes(spec, y, zero_average, seed))
}

fn check_mass(y: f64, zero_average: bool) -> Result<()> {
    if !y.is_finite() || y < 0.0 {
        return Err(invalid(format!(
            "mass parameter must be finite and nonnegative, got {y}"
        )));
    }
    if !zero_average && y <= 0.0 {
        return Err(invalid("the massive field needs y > 0 for its zero mode"));
    }
    Ok(())
}

/// Zero-average field `Ψ^{0,y}` (the `k = 0` mode removed).
pub fn sample_zero_avg_mgff(spec: &TorusSpec, y: f64, seed: u64) -> Result<GffSample> {
    let coeffs = sample_coefficients(spec, y, true, seed)?;
    Ok(GffSample {
        spec: *spec,
        y,
        zero_average: true,
        field: synthesize(spec, coeffs)?,
        seed,
    })
}

/// Massive field `Ψ^y` including the zero mode.
pub fn sample_mgff(spec: &TorusSpec, y: f64, seed: u64) -> Result<GffSample> {
    let coeffs = sample_coefficients(spec, y, false, seed)?;
    Ok(GffSample {
        spec: *spec,
        y,
        zero_average: false,
        field: synthesize(spec, coeffs)?,
        seed,
    })
}

/// Draws of `Γ = Σ_{k≠0} X_k / (λ_k + y)` with `X_k ~ Exp(1)`.
pub fn mass_sample_expsum(spec: &TorusSpec, y: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    check_mass(y, true)?;
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let spectrum = Spectrum::new(*spec);
    let weights: Vec<f64> = spectrum.nonzero().iter().map(|l| 1.0 / (l + y)).collect();
    let mut rng = rng_for(seed, 1);
    Ok((0..count)
        .map(|_| {
            let mut acc = 0.0;
            for w in &weights {
                let x: f64 = rng.sample(Exp1);
                acc += w * x;
            }
            acc
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassStatistic {
    pub samples: usize,
    /// Mean of `‖Ψ‖²/N`.
    pub mean: f64,
    pub variance: f64,
    pub thresholds: Vec<f64>,
    /// Count of samples with `‖Ψ‖²/N` above each threshold.
    pub exceedances: Vec<usize>,
}

/// Summarizes total masses (not yet divided by `N`).
pub fn mass_statistic(masses: &[f64], num_sites: usize, thresholds: &[f64]) -> Result<MassStatistic> {
    if masses.len() < 2 {
        return Err(invalid("need at least two samples"));
    }
    let scaled: Vec<f64> = masses.iter().map(|m| m / num_sites as f64).collect();
    let k = scaled.len() as f64;
    let mean = scaled.iter().sum::<f64>() / k;
    let variance = scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let exceedances = thresholds
        .iter()
        .map(|t| scaled.iter().filter(|v| **v > *t).count())
        .collect();
    Ok(MassStatistic {
        samples: masses.len(),
        mean,
        variance,
        thresholds: thresholds.to_vec(),
        exceedances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub d: usize,
    pub b: f64,
    pub eps: f64,
    /// `L(b)`.
    pub y: f64,
    pub samples: usize,
    pub in_window: usize,
    pub frequency: f64,
    pub std_error: f64,
    /// `1 - m_N(2) / (N ε²)`.
    pub chebyshev_bound: f64,
    /// `N ε^d`; the regime of interest needs this large.
    pub n_eps_d: f64,
    pub hypothesis_ok: bool,
}

/// Frequency of `Γ_{N,L(b)}/N ∈ (b - ε, b + ε)` next to the Chebyshev bound.
pub fn concentration_report(
    spec: &TorusSpec,
    b: f64,
    eps: f64,
    samples: usize,
    seed: u64,
    thermo: &ThermoFunctions,
) -> Result<ConcentrationReport> {
    if thermo.d() != spec.d() {
        return Err(invalid("thermodynamic functions are for a different dimension"));
    }
    let c_d = thermo.c_d();
    if !(b > 0.0 && b < c_d) {
        return Err(invalid(format!("b must lie in (0, C_d) = (0, {c_d}), got {b}")));
    }
    if !(eps > 0.0) {
        return Err(invalid("window half-width must be positive"));
    }
    let y = thermo.l(b)?;
    let big_n = spec.num_sites() as f64;
    let draws = mass_sample_expsum(spec, y, seed, samples)?;
    let in_window = draws.iter().filter(|g| (*g / big_n - b).abs() < eps).count();
    let frequency = in_window as f64 / samples as f64;
    let m2 = Spectrum::new(*spec).m_n(2.0)?;
    let n_eps_d = big_n * eps.powi(spec.d() as i32);
    Ok(ConcentrationReport {
        n: spec.n(),
        d: spec.d(),
        b,
        eps,
        y,
        samples,
        in_window,
        frequency,
        std_error: (frequency * (1.0 - frequency) / samples as f64).sqrt(),
        chebyshev_bound: 1.0 - m2 / (big_n * eps * eps),
        n_eps_d,
        hypothesis_ok: n_eps_d >= 10.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxExceedanceReport {
    pub n: usize,
    pub d: usize,
    pub b: f64,
    pub y: f64,
    pub threshold: f64,
    pub samples: usize,
    pub exceedances: usize,
    pub frequency: f64,
    /// Largest `‖Ψ‖_∞` seen.
    pub max_seen: f64,
}

/// Frequency of `‖Ψ^{0,L(b)}‖_∞ ≥ factor · sqrt(3 C_d log N)`.
pub fn max_exceedance_report(
    spec: &TorusSpec,
    b: f64,
    samples: usize,
    seed: u64,
    factor: f64,
    thermo: &ThermoFunctions,
) -> Result<MaxExceedanceReport> {
    if thermo.d() != spec.d() {
        return Err(invalid("thermodynamic functions are for a different dimension"));
    }
    let c_d = thermo.c_d();
    if !(b > 0.0 && b <= c_d) {
        return Err(invalid(format!("b must lie in (0, C_d] = (0, {c_d}], got {b}")));
    }
    if samples == 0 || !(factor > 0.0) {
        return Err(invalid("need samples >= 1 and a positive threshold factor"));
    }
    let y = thermo.l(b)?;
    let threshold = factor * (3.0 * c_d * (spec.num_sites() as f64).ln()).sqrt();
    let mut exceedances = 0;
    let mut max_seen = 0.0f64;
    for i in 0..samples {
        let s = sample_zero_avg_mgff(spec, y, seed.wrapping_add(i as u64))?;
        let m = s.field.max_modulus();
        max_seen = max_seen.max(m);
        if m >= threshold {
            exceedances += 1;
        }
    }
    Ok(MaxExceedanceReport {
        n: spec.n(),
        d: spec.d(),
        b,
        y,
        threshold,
        samples,
        exceedances,
        frequency: exceedances as f64 / samples as f64,
        max_seen,
    })
}
