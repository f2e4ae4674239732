//! Metropolis sampling of the finite-volume Gibbs measure
//! `μ_N(dψ) ∝ e^{-θ H_{ν,N}(ψ)} 1{‖ψ‖² ≤ N} dψ` with
//! `H_{ν,N}(ψ) = ‖∇ψ‖² - (ν/N)^{(p-1)/2} (2/(p+1)) Σ |ψ_x|^{p+1}`,
//! an importance-sampling estimate of `(1/N) log Z_N`, and the auxiliary
//! function `h(x) = 2x^{p+1}/(1 + x^{p-1})`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::ComplexField;
use crate::gff_sampler::{complex_gaussian, rng_for, sample_mgff};
use crate::lattice_spectrum::{eigenvalues, Spectrum, TorusSpec};
use crate::numerics::{bisect_secant, mean_se};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub nu: f64,
    pub p: f64,
    pub spec: TorusSpec,
}

impl ModelParams {
    pub fn new(theta: f64, nu: f64, p: f64, spec: TorusSpec) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(invalid(format!("theta must be positive and finite, got {theta}")));
        }
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(invalid(format!("nu must be nonnegative and finite, got {nu}")));
        }
        if !(p > 1.0) {
            return Err(invalid(format!("nonlinearity p must exceed 1, got {p}")));
        }
        Ok(Self { theta, nu, p, spec })
    }

    /// `(ν/N)^{(p-1)/2} · 2/(p+1)`.
    pub fn coupling(&self) -> f64 {
        let n = self.spec.num_sites() as f64;
        (self.nu / n).powf(0.5 * (self.p - 1.0)) * 2.0 / (self.p + 1.0)
    }
}

/// `H_{ν,N}(ψ)` with periodic edges.
pub fn model_hamiltonian(psi: &ComplexField, params: &ModelParams) -> Result<f64> {
    if psi.spec() != &params.spec {
        return Err(invalid("field does not live on the model torus"));
    }
    Ok(psi.gradient_energy() - params.coupling() * psi.power_sum(params.p + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub step: usize,
    /// `‖ψ‖² / N`.
    pub mass_frac: f64,
    /// `max_x |ψ_x|² / ‖ψ‖²`.
    pub max_frac: f64,
    /// `(Σ|ψ|²)² / (N Σ|ψ|⁴)`.
    pub part_ratio: f64,
    pub e_grad: f64,
    /// Nonlinear part including its sign and coupling.
    pub e_nl: f64,
    pub max_modulus: f64,
}

impl ObservableRecord {
    pub const CSV_HEADER: &'static str = "step,mass_frac,max_frac,part_ratio,E_grad,E_nl";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step, self.mass_frac, self.max_frac, self.part_ratio, self.e_grad, self.e_nl
        )
    }
}

pub fn observables(psi: &ComplexField, params: &ModelParams, step: usize) -> ObservableRecord {
    let n = psi.values().len() as f64;
    let mass = psi.mass();
    let m4: f64 = psi.values().iter().map(|z| z.norm_sqr().powi(2)).sum();
    let mx = psi.values().iter().fold(0.0f64, |a, z| a.max(z.norm_sqr()));
    let (max_frac, part_ratio) = if mass > 0.0 {
        (mx / mass, mass * mass / (n * m4))
    } else {
        (0.0, 1.0)
    };
    ObservableRecord {
        step,
        mass_frac: mass / n,
        max_frac,
        part_ratio,
        e_grad: psi.gradient_energy(),
        e_nl: -params.coupling() * psi.power_sum(params.p + 1.0),
        max_modulus: mx.sqrt(),
    }
}

/// Starting configuration of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitState {
    Zero,
    /// A fraction of the allowed mass `N` on site 0.
    Spike(f64),
    Field(ComplexField),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    /// Sweeps kept after burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    /// Record observables every this many sweeps.
    pub thin: usize,
    pub proposal_scale: f64,
    /// Adapt the scale during burn-in toward `target_acceptance`.
    pub adapt: bool,
    pub target_acceptance: f64,
    /// Recompute the cached energy every this many sweeps.
    pub refresh_every: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            sweeps: 10_000,
            burn_in: 100_000,
            thin: 1,
            proposal_scale: 0.5,
            adapt: true,
            target_acceptance: 0.3,
            refresh_every: 100,
        }
    }
}

/// Complete chain state; serializable for resumable runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub params: ModelParams,
    pub field: ComplexField,
    pub energy: f64,
    pub mass: f64,
    pub sweeps_done: usize,
    pub accepted: u64,
    pub proposed: u64,
    pub scale: f64,
    pub seed: u64,
    /// Position of the generator in its output stream.
    pub rng_word_pos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub seed: u64,
    pub final_scale: f64,
    pub acceptance: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub header: StreamHeader,
    pub records: Vec<ObservableRecord>,
    pub state: ChainState,
}

/// Single-site Metropolis chain.
pub struct Chain {
    state: ChainState,
    rng: ChaCha8Rng,
    nbr: Vec<usize>,
    coupling: f64,
}

impl Chain {
    pub fn new(params: ModelParams, init: InitState, proposal_scale: f64, seed: u64) -> Result<Self> {
        if !(proposal_scale > 0.0) {
            return Err(invalid("proposal scale must be positive"));
        }
        let spec = params.spec;
        let n = spec.num_sites();
        let field = match init {
            InitState::Zero => ComplexField::zeros(spec),
            InitState::Spike(frac) => {
                if !(0.0..=1.0).contains(&frac) {
                    return Err(invalid("spike fraction must lie in [0, 1]"));
                }
                let mut f = ComplexField::zeros(spec);
                f.values_mut()[0] = Complex64::new((frac * n as f64).sqrt(), 0.0);
                f
            }
            InitState::Field(f) => {
                if f.spec() != &spec {
                    return Err(invalid("initial field lives on a different torus"));
                }
                if f.mass() > n as f64 {
                    return Err(invalid("initial field violates the mass constraint"));
                }
                f
            }
        };
        let energy = model_hamiltonian(&field, &params)?;
        let mass = field.mass();
        let state = ChainState {
            params,
            field,
            energy,
            mass,
            sweeps_done: 0,
            accepted: 0,
            proposed: 0,
            scale: proposal_scale,
            seed,
            rng_word_pos: 0,
        };
        Ok(Self::from_state(state))
    }

    /// Resumes from a checkpoint.
    pub fn from_state(state: ChainState) -> Self {
        let spec = state.params.spec;
        let mut nbr = Vec::with_capacity(spec.num_sites() * 2 * spec.d());
        for x in 0..spec.num_sites() {
            for axis in 0..spec.d() {
                nbr.push(spec.neighbor(x, axis, true));
                nbr.push(spec.neighbor(x, axis, false));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_word_pos(state.rng_word_pos);
        let coupling = state.params.coupling();
        Self {
            state,
            rng,
            nbr,
            coupling,
        }
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn checkpoint(&self) -> ChainState {
        let mut s = self.state.clone();
        s.rng_word_pos = self.rng.get_word_pos();
        s
    }

    /// Energy change and new mass if site `x` takes value `new`.
    fn local_delta(&self, x: usize, new: Complex64) -> (f64, f64) {
        let psi = self.state.field.values();
        let old = psi[x];
        let dd = 2 * self.state.params.spec.d();
        let mut dgrad = 0.0;
        for &y in &self.nbr[x * dd..(x + 1) * dd] {
            dgrad += (new - psi[y]).norm_sqr() - (old - psi[y]).norm_sqr();
        }
        let q = 0.5 * (self.state.params.p + 1.0);
        let (mo, mn) = (old.norm_sqr(), new.norm_sqr());
        let dnl = mn.powf(q) - mo.powf(q);
        (dgrad - self.coupling * dnl, self.state.mass - mo + mn)
    }

    /// One update per site in index order; returns the acceptance count.
    pub fn sweep(&mut self) -> u64 {
        let n = self.state.field.values().len();
        let big_n = n as f64;
        let theta = self.state.params.theta;
        let mut acc = 0;
        for x in 0..n {
            let step = complex_gaussian(&mut self.rng) * self.state.scale;
            let u: f64 = self.rng.gen();
            let new = self.state.field.values()[x] + step;
            let (dh, new_mass) = self.local_delta(x, new);
            self.state.proposed += 1;
            if new_mass > big_n {
                continue;
            }
            if u < (-theta * dh).exp() {
                self.state.field.values_mut()[x] = new;
                self.state.energy += dh;
                self.state.mass = new_mass;
                self.state.accepted += 1;
                acc += 1;
            }
        }
        self.state.sweeps_done += 1;
        acc
    }

    /// Recomputes the cached energy and mass; returns the relative drift
    /// that was removed.
    pub fn refresh(&mut self) -> f64 {
        let exact = model_hamiltonian(&self.state.field, &self.state.params).expect("field on the model torus");
        let drift = (exact - self.state.energy).abs() / exact.abs().max(1.0);
        self.state.energy = exact;
        self.state.mass = self.state.field.mass();
        drift
    }

    pub fn run(&mut self, opts: &ChainOptions) -> Result<ChainOutput> {
        if opts.thin == 0 || opts.refresh_every == 0 {
            return Err(invalid("thin and refresh_every must be positive"));
        }
        let n = self.state.field.values().len() as f64;
        let mut warnings = Vec::new();
        for b in 0..opts.burn_in {
            let acc = self.sweep() as f64 / n;
            if opts.adapt {
                let gain = 1.0 / (1.0 + b as f64 / 50.0).sqrt();
                self.state.scale *= (gain * (acc - opts.target_acceptance)).exp();
                self.state.scale = self.state.scale.clamp(1e-6, 1e6);
            }
            if (b + 1) % opts.refresh_every == 0 {
                self.refresh();
            }
        }
        let (a0, p0) = (self.state.accepted, self.state.proposed);
        let mut records = Vec::with_capacity(opts.sweeps / opts.thin + 1);
        let mut max_drift = 0.0f64;
        for s in 1..=opts.sweeps {
            self.sweep();
            if s % opts.refresh_every == 0 {
                max_drift = max_drift.max(self.refresh());
            }
            if s % opts.thin == 0 {
                records.push(observables(
                    &self.state.field,
                    &self.state.params,
                    self.state.sweeps_done,
                ));
            }
        }
        let proposed = (self.state.proposed - p0).max(1);
        let acceptance = (self.state.accepted - a0) as f64 / proposed as f64;
        if !(0.05..=0.8).contains(&acceptance) {
            warnings.push(format!("acceptance rate {acceptance:.3} outside [0.05, 0.8]"));
        }
        if max_drift > 1e-8 {
            warnings.push(format!("cached energy drifted by {max_drift:e} between refreshes"));
        }
        Ok(ChainOutput {
            header: StreamHeader {
                seed: self.state.seed,
                final_scale: self.state.scale,
                acceptance,
                warnings,
            },
            records,
            state: self.checkpoint(),
        })
    }
}

/// A chain from the zero field.
pub fn metropolis_chain(params: &ModelParams, opts: &ChainOptions, seed: u64) -> Result<ChainOutput> {
    Chain::new(*params, InitState::Zero, opts.proposal_scale, seed)?.run(opts)
}

/// `h(x) = 2x^{p+1} / (1 + x^{p-1})`.
pub fn h_aux(x: f64, p: f64) -> f64 {
    2.0 * x.powf(p + 1.0) / (1.0 + x.powf(p - 1.0))
}

/// `x^p (4x^{2p-2} + (3 + 6p - p²) x^{p-1} + (p+1)²)`, which has the sign of
/// `h''(x) + h'(x)/x`; the two differ by the factor `2 / (x (1 + x^{p-1})³)`.
pub fn h_convexity_numerator(x: f64, p: f64) -> f64 {
    let u = x.powf(p - 1.0);
    x.powf(p) * (4.0 * u * u + (3.0 + 6.0 * p - p * p) * u + (p + 1.0).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HScanReport {
    pub p: f64,
    pub points: usize,
    pub min_numerator: f64,
    /// Grid points where the expression is not positive.
    pub violations: Vec<f64>,
    /// Sign changes of the numerator, refined by bisection.
    pub roots: Vec<f64>,
}

impl HScanReport {
    pub fn positive(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn h_convexity_scan(p: f64, grid: &[f64]) -> Result<HScanReport> {
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    if grid.iter().any(|x| !(*x > 0.0)) {
        return Err(invalid("scan points must be positive"));
    }
    // sign of the bracket alone (x^p > 0 only rescales)
    let bracket = |x: f64| h_convexity_numerator(x, p) / x.powf(p);
    let mut violations = Vec::new();
    let mut roots = Vec::new();
    let mut min_numerator = f64::INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = h_convexity_numerator(x, p);
        min_numerator = min_numerator.min(v);
        if v <= 0.0 {
            violations.push(x);
        }
        if i > 0 {
            let (a, b) = (grid[i - 1], x);
            if (bracket(a) > 0.0) != (bracket(b) > 0.0) {
                roots.push(bisect_secant(bracket, a.min(b), a.max(b), 1e-14, 0.0)?);
            }
        }
    }
    Ok(HScanReport {
        p,
        points: grid.len(),
        min_numerator,
        violations,
        roots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub samples: usize,
    pub seed: u64,
    pub bootstrap: usize,
    pub min_ess: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            bootstrap: 200,
            min_ess: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    /// Estimate of `(1/N) log Z_N`.
    pub log_z_per_site: f64,
    pub std_error: f64,
    pub ess: f64,
    pub samples: usize,
    /// Mass of the Gaussian proposal.
    pub y: f64,
    /// Fraction of proposals inside the mass ball.
    pub inside: f64,
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// Raw log-weights `θ y ‖ψ‖² + θ c Σ|ψ|^{p+1}` (or `-∞` outside the ball)
/// for proposals `ψ = Ψ^y / sqrt(θ)`, together with `y` and the constant
/// `Σ_k log(π / (θ(λ_k + y)))`.
fn partition_log_weights(params: &ModelParams, opts: &PartitionOptions) -> Result<(Vec<f64>, f64, f64)> {
    let spec = params.spec;
    let theta = params.theta;
    let big_n = spec.num_sites() as f64;
    // proposal covariance (θ(L + y))^{-1} with mean mass N
    let y = Spectrum::new(spec).solve_y_n_with_zero_mode(theta)?.y;
    let constant: f64 = eigenvalues(&spec).iter().map(|l| (PI / (theta * (l + y))).ln()).sum();
    let coupling = params.coupling();
    let q = params.p + 1.0;
    let scale = 1.0 / theta.sqrt();
    let mut logw = Vec::with_capacity(opts.samples);
    for i in 0..opts.samples {
        let s = sample_mgff(&spec, y, opts.seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64))?;
        let mass = s.field.mass() * scale * scale;
        if mass > big_n {
            logw.push(f64::NEG_INFINITY);
            continue;
        }
        let tilt = if coupling > 0.0 {
            coupling * s.field.power_sum(q) * scale.powf(q)
        } else {
            0.0
        };
        logw.push(theta * y * mass + theta * tilt);
    }
    Ok((logw, y, constant))
}

/// Importance-sampling estimate of `(1/N) log Z_N` with a massive free-field
/// proposal and bootstrap standard error.
pub fn small_n_partition_estimate(params: &ModelParams, opts: &PartitionOptions) -> Result<PartitionEstimate> {
    let big_n = params.spec.num_sites();
    if big_n > 512 {
        return Err(invalid("partition estimate is limited to N <= 512"));
    }
    if opts.samples < 2 || opts.bootstrap < 2 {
        return Err(invalid("need at least two samples and two bootstrap replicates"));
    }
    let (logw, y, constant) = partition_log_weights(params, opts)?;
    let finite: Vec<f64> = logw.iter().copied().filter(|v| v.is_finite()).collect();
    let inside = finite.len() as f64 / logw.len() as f64;
    let m = finite.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let (s1, s2) = finite.iter().fold((0.0, 0.0), |(a, b), &v| {
        let w = (v - m).exp();
        (a + w, b + w * w)
    });
    let ess = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    let nf = big_n as f64;
    let estimate = (constant + log_mean_exp(&logw)) / nf;
    if ess < opts.min_ess {
        return Err(Error::UnreliableEstimate { ess, estimate });
    }
    let mut rng = rng_for(opts.seed, 2);
    let k = logw.len();
    let mut boots = Vec::with_capacity(opts.bootstrap);
    let mut buf = vec![0.0; k];
    for _ in 0..opts.bootstrap {
        for slot in buf.iter_mut() {
            *slot = logw[rng.gen_range(0..k)];
        }
        boots.push((constant + log_mean_exp(&buf)) / nf);
    }
    let (_, se_of_mean) = mean_se(&boots);
    // the spread of replicates, not of their mean
    let std_error = se_of_mean * (boots.len() as f64).sqrt();
    Ok(PartitionEstimate {
        log_z_per_site: estimate,
        std_error,
        ess,
        samples: k,
        y,
        inside,
    })
}

/// `E (c - Γ)_+` for `Γ = Σ_k X_k / w_k`, `X_k ~ Exp(1)`, by numerical
/// inversion of the Laplace transform along a vertical line through the
/// saddle point.
pub fn expected_positive_part(c: f64, rates: &[f64]) -> Result<f64> {
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("rates must be positive"));
    }
    if !(c > 0.0) {
        return Ok(0.0);
    }
    // saddle of s ↦ s c + log M(s) - 2 log s
    let g = |s: f64| c - rates.iter().map(|r| 1.0 / (r + s)).sum::<f64>() - 2.0 / s;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while g(lo) > 0.0 {
        lo *= 0.5;
    }
    let sigma = bisect_secant(g, lo, hi, 1e-14, 0.0)?;
    let integrand = |u: f64| -> f64 {
        let s = Complex64::new(sigma, u);
        let mut log_m = Complex64::new(0.0, 0.0);
        for &r in rates {
            log_m += (Complex64::new(r, 0.0) / (s + r)).ln();
        }
        ((s * c + log_m).exp() / (s * s)).re
    };
    // aliasing error is about exp(-2πσ/h)
    let h = 2.0 * PI * sigma / 40.0;
    let peak = integrand(0.0).abs();
    let mut acc = 0.5 * integrand(0.0);
    let mut j = 1usize;
    let mut small = 0;
    loop {
        let v = integrand(j as f64 * h);
        acc += v;
        if v.abs() < 1e-17 * peak {
            small += 1;
            if small > 50 {
                break;
            }
        } else {
            small = 0;
        }
        j += 1;
        if j > 50_000_000 {
            return Err(Error::AccuracyNotMet {
                value: acc * h / PI,
                error: v.abs(),
                requested: 1e-17 * peak,
            });
        }
    }
    Ok(acc * h / PI)
}

/// `(1/N) log Z_N` at `ν = 0`:
/// `Z = Π_{k≠0} π/(θλ_k) · π · E (N - Γ/θ)_+` with `Γ = Σ_{k≠0} X_k/λ_k`.
pub fn zero_nu_log_partition(spec: &TorusSpec, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(invalid("theta must be positive"));
    }
    let spectrum = Spectrum::new(*spec);
    let lams = spectrum.nonzero();
    let big_n = spec.num_sites() as f64;
    let prefactor: f64 = lams.iter().map(|l| (PI / (theta * l)).ln()).sum::<f64>() + PI.ln();
    let e = expected_positive_part(big_n * theta, lams)? / theta;
    Ok((prefactor + e.ln()) / big_n)
}
