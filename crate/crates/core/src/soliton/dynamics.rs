//! Time evolution of the discrete NLS on a torus with lattice spacing `h`:
//! `i ψ' = h^{-2} L ψ - |ψ|^{p-1} ψ`, where `L` is the (positive) graph
//! Laplacian. This is the Hamiltonian flow of `H_h / h^d` with
//! `H_h(ψ) = h^{d-2} ‖∇ψ‖² - (2/(p+1)) h^d Σ |ψ|^{p+1}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::ComplexField;
use crate::lattice_spectrum::TorusSpec;

use super::boxfield::BoxField;

/// Moduli above this abort the integration.
const OVERFLOW_GUARD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Lattice spacing.
    pub h: f64,
    /// Keep a snapshot every this many steps (0 keeps only the endpoints).
    pub sample_every: usize,
    pub scheme: Scheme,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            h: 1.0,
            sample_every: 0,
            scheme: Scheme::Rk4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<ComplexField>,
    pub steps: usize,
    /// Max relative change of `‖ψ‖²` over the run.
    pub mass_drift: f64,
    /// Max relative change of `H_h` over the run.
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &ComplexField {
        self.snapshots.last().expect("trajectory keeps the final state")
    }
}

/// `H_h(ψ)` with periodic edges.
pub fn torus_hamiltonian(psi: &ComplexField, p: f64, h: f64) -> f64 {
    let d = psi.spec().d() as i32;
    h.powi(d - 2) * psi.gradient_energy() - 2.0 / (p + 1.0) * h.powi(d) * psi.power_sum(p + 1.0)
}

fn neighbour_table(spec: &TorusSpec) -> Vec<usize> {
    let d = spec.d();
    let mut t = Vec::with_capacity(spec.num_sites() * 2 * d);
    for x in 0..spec.num_sites() {
        for axis in 0..d {
            t.push(spec.neighbor(x, axis, true));
            t.push(spec.neighbor(x, axis, false));
        }
    }
    t
}

fn rhs(nbr: &[usize], psi: &[Complex64], p: f64, inv_h2: f64, out: &mut [Complex64]) {
    let dd = nbr.len() / psi.len();
    let half = 0.5 * (p - 1.0);
    for i in 0..psi.len() {
        let mut lap = psi[i] * dd as f64;
        for &y in &nbr[i * dd..(i + 1) * dd] {
            lap -= psi[y];
        }
        let m2 = psi[i].norm_sqr();
        let nl = if p == 3.0 { m2 } else { m2.powf(half) };
        let g = lap * inv_h2 - psi[i] * nl;
        // ψ' = -i g
        out[i] = Complex64::new(g.im, -g.re);
    }
}

/// Integrates from `psi0` to `t_final` with fixed steps.
pub fn evolve_dnls(psi0: &ComplexField, p: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if !(p > 1.0) {
        return Err(invalid("nonlinearity p must exceed 1"));
    }
    if !(opts.dt > 0.0) || !(opts.t_final >= 0.0) || !(opts.h > 0.0) {
        return Err(invalid("dt, h must be positive and t_final nonnegative"));
    }
    let spec = *psi0.spec();
    let steps = (opts.t_final / opts.dt)
        .round()
        .max(if opts.t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    let dt = if steps > 0 { opts.t_final / steps as f64 } else { 0.0 };
    let inv_h2 = 1.0 / (opts.h * opts.h);
    let n = psi0.values().len();
    let mut psi = psi0.values().to_vec();
    let (m0, h0) = (psi0.mass(), torus_hamiltonian(psi0, p, opts.h));
    let (mut mass_drift, mut energy_drift) = (0.0f64, 0.0f64);
    let mut times = vec![0.0];
    let mut snapshots = vec![psi0.clone()];
    let nbr = neighbour_table(&spec);
    // conservation is monitored at about a thousand evenly spaced times
    let check_every = (steps / 1000).max(1);
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 4];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    for step in 1..=steps {
        rhs(&nbr, &psi, p, inv_h2, &mut k[0]);
        for i in 0..n {
            tmp[i] = psi[i] + k[0][i] * (0.5 * dt);
        }
        rhs(&nbr, &tmp, p, inv_h2, &mut k[1]);
        for i in 0..n {
            tmp[i] = psi[i] + k[1][i] * (0.5 * dt);
        }
        rhs(&nbr, &tmp, p, inv_h2, &mut k[2]);
        for i in 0..n {
            tmp[i] = psi[i] + k[2][i] * dt;
        }
        rhs(&nbr, &tmp, p, inv_h2, &mut k[3]);
        for i in 0..n {
            psi[i] += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (dt / 6.0);
        }
        let t = step as f64 * dt;
        let peak = psi.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if !peak.is_finite() || peak > OVERFLOW_GUARD {
            return Err(Error::NumericOverflow { time: t });
        }
        let keep = step == steps || (opts.sample_every > 0 && step % opts.sample_every == 0);
        if keep || step % check_every == 0 {
            let field = ComplexField::from_vec(spec, psi.clone())?;
            mass_drift = mass_drift.max((field.mass() - m0).abs() / m0.max(f64::MIN_POSITIVE));
            let e = torus_hamiltonian(&field, p, opts.h);
            energy_drift = energy_drift.max((e - h0).abs() / h0.abs().max(f64::MIN_POSITIVE));
            if keep {
                times.push(t);
                snapshots.push(field);
            }
        }
    }
    Ok(Trajectory {
        times,
        snapshots,
        steps,
        mass_drift,
        energy_drift,
    })
}

/// `λ^{2/(p-1)} ψ`: a solution at spacing `h` maps to a solution at
/// spacing `h/λ` run `λ²` times faster.
pub fn rescale_solution(psi: &ComplexField, lambda: f64, p: f64) -> Result<ComplexField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("scale factor must be positive, got {lambda}")));
    }
    if !(p > 1.0) {
        return Err(invalid("nonlinearity p must exceed 1"));
    }
    let s = lambda.powf(2.0 / (p - 1.0));
    let data = psi.values().iter().map(|z| z * s).collect();
    ComplexField::from_vec(*psi.spec(), data)
}

/// Places a box profile in the middle of a torus of side `2m + 1 + 2 buffer`.
pub fn embed_box_in_torus(profile: &BoxField, buffer: usize) -> Result<ComplexField> {
    let geom = profile.geometry();
    let m = geom.half_width();
    let n = 2 * m + 1 + 2 * buffer;
    let spec = TorusSpec::new(geom.d(), n)?;
    let mut f = ComplexField::zeros(spec);
    let off = (m + buffer) as i64;
    for x in 0..geom.len() {
        let idx: Vec<usize> = geom.coords(x).iter().map(|c| (c + off) as usize).collect();
        let site = spec.linear_index(&idx)?;
        f.values_mut()[site] = Complex64::new(profile.values()[x], 0.0);
    }
    Ok(f)
}
