//! The excitation threshold `R_p`, the minimal energy `I(a)` and a
//! tabulated `J(a) = I(a)/a`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{golden_section, Pchip};

use super::boxfield::{BoxField, BoxGeometry};
use super::minimize::{dirichlet_minimize, minimize_quotient, powp, InitPolicy, MinimizeOptions, SolitonResult};

/// `1 + 4/d`, the mass-critical exponent.
pub fn critical_exponent(d: usize) -> f64 {
    1.0 + 4.0 / d as f64
}

/// Scale-invariant quotient `‖φ‖₂^{p-1} ‖∇φ‖² / Σ φ^{p+1}`.
pub fn weinstein_quotient(field: &BoxField, p: f64) -> f64 {
    let geom = field.geometry();
    let v = field.values();
    let s: f64 = v.iter().map(|&x| powp(x, p) * x).sum();
    field.mass().powf(0.5 * (p - 1.0)) * geom.gradient_energy(v) / s
}

fn mass_from_quotient(q: f64, p: f64) -> f64 {
    (0.5 * (p + 1.0) * q).powf(2.0 / (p - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientThreshold {
    pub r_p: f64,
    pub q_min: f64,
    pub box_m: usize,
    /// Minimizer scaled to mass `r_p`.
    pub profile: BoxField,
}

/// Box half-width used for the threshold computations.
pub const THRESHOLD_BOX: usize = 6;

/// Minimizes the quotient on a box from several localized starts, then
/// sharpens the minimizer by solving the Euler–Lagrange equation at the
/// implied mass.
pub fn threshold_quotient(p: f64, d: usize, m: usize) -> Result<QuotientThreshold> {
    if !(p > 1.0) {
        return Err(invalid("nonlinearity p must exceed 1"));
    }
    let geom = BoxGeometry::new(d, m)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for init in [
        InitPolicy::Spike,
        InitPolicy::GaussianWidth(0.7),
        InitPolicy::GaussianWidth(1.5),
    ] {
        let (q, f) = minimize_quotient(&geom, p, &init, 50_000)?;
        if best.as_ref().is_none_or(|(bq, _)| q < *bq) {
            best = Some((q, f));
        }
    }
    let (mut q, f) = best.unwrap();
    let mut r = mass_from_quotient(q, p);
    let scale = r.sqrt();
    let mut profile = BoxField::new(d, m, f.iter().map(|v| v * scale).collect())?;
    // at a = R the quotient minimizer is an exact ground state with H = 0
    for _ in 0..2 {
        let res = match dirichlet_minimize(
            r,
            p,
            m,
            d,
            &InitPolicy::Warm(profile.clone()),
            &MinimizeOptions::default(),
        ) {
            Ok(res) => res,
            Err(Error::ConvergenceFailure { best: Some(b), .. }) => *b,
            Err(e) => return Err(e),
        };
        let q_new = weinstein_quotient(&res.profile, p);
        if q_new <= q {
            q = q_new;
            profile = res.profile;
        }
        r = mass_from_quotient(q, p);
        let s = (r / profile.mass()).sqrt();
        profile = BoxField::new(d, m, profile.values().iter().map(|v| v * s).collect())?;
    }
    Ok(QuotientThreshold {
        r_p: r,
        q_min: q,
        box_m: m,
        profile,
    })
}

/// Lowest energy among localized starts at mass `a`.
fn localized_energy(a: f64, p: f64, d: usize, m: usize) -> Result<f64> {
    let mut e = f64::INFINITY;
    for init in [InitPolicy::Spike, InitPolicy::GaussianWidth(1.0)] {
        let r = match dirichlet_minimize(a, p, m, d, &init, &MinimizeOptions::default()) {
            Ok(r) => r,
            Err(Error::ConvergenceFailure { best: Some(b), .. }) => *b,
            Err(err) => return Err(err),
        };
        e = e.min(r.energy);
    }
    Ok(e)
}

/// Bisection on the sign of the localized ground-state energy.
pub fn threshold_bisection(p: f64, d: usize, m: usize, rel_tol: f64) -> Result<f64> {
    let mut hi = 1.01 * (d as f64 * (p + 1.0)).powf(2.0 / (p - 1.0));
    let mut lo = hi / 100.0;
    let mut trace = Vec::new();
    let neg_hi = localized_energy(hi, p, d, m)? < 0.0;
    let neg_lo = localized_energy(lo, p, d, m)? < 0.0;
    trace.push((hi, neg_hi));
    trace.push((lo, neg_lo));
    if !neg_hi || neg_lo {
        return Err(Error::BracketFailure {
            message: "energy sign does not change on the threshold bracket".into(),
            trace,
        });
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if localized_energy(mid, p, d, m)? < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub r_p: f64,
    pub quotient: f64,
    pub bisection: f64,
    pub q_min: f64,
    pub box_m: usize,
}

/// `R_p`: zero for `p < 1 + 4/d`, otherwise the quotient value after a
/// cross-check against bisection (relative tolerance `tol`).
pub fn excitation_threshold_r_p(p: f64, d: usize, tol: f64) -> Result<ThresholdReport> {
    if !(p > 1.0) {
        return Err(invalid("nonlinearity p must exceed 1"));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if p < critical_exponent(d) - 1e-12 {
        return Ok(ThresholdReport {
            r_p: 0.0,
            quotient: 0.0,
            bisection: 0.0,
            q_min: 0.0,
            box_m: 0,
        });
    }
    let m = THRESHOLD_BOX;
    let q = threshold_quotient(p, d, m)?;
    let b = threshold_bisection(p, d, m, tol.max(1e-10))?;
    if (q.r_p - b).abs() > 0.05 * q.r_p.max(b) {
        return Err(Error::Inconsistency {
            quotient: q.r_p,
            bisection: b,
        });
    }
    Ok(ThresholdReport {
        r_p: q.r_p,
        quotient: q.r_p,
        bisection: b,
        q_min: q.q_min,
        box_m: m,
    })
}

/// Upper bound on `I(a)` from the best separable Gaussian
/// `√a g⊗…⊗g` on `Z^d`, optimized over the width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialBound {
    pub energy: f64,
    pub width: f64,
}

fn separable_energy(a: f64, p: f64, d: usize, width: f64) -> f64 {
    let half = (12.0 * width).ceil() as i64 + 2;
    let g: Vec<f64> = (-half..=half)
        .map(|j| (-(j * j) as f64 / (4.0 * width * width)).exp())
        .collect();
    let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let g: Vec<f64> = g.iter().map(|v| v / norm).collect();
    let mut e1 = g[0] * g[0] + g[g.len() - 1] * g[g.len() - 1];
    for w in g.windows(2) {
        e1 += (w[1] - w[0]).powi(2);
    }
    let q1: f64 = g.iter().map(|&v| powp(v, p) * v).sum();
    a * d as f64 * e1 - 2.0 / (p + 1.0) * a.powf(0.5 * (p + 1.0)) * q1.powi(d as i32)
}

pub fn separable_trial(a: f64, p: f64, d: usize) -> TrialBound {
    let spike = 2.0 * d as f64 * a - 2.0 / (p + 1.0) * a.powf(0.5 * (p + 1.0));
    let (lo, hi) = (0.2f64.ln(), 2000.0f64.ln());
    let mut best = (f64::NAN, spike);
    let grid = 120;
    let mut arg = 0;
    let vals: Vec<f64> = (0..=grid)
        .map(|i| separable_energy(a, p, d, (lo + (hi - lo) * i as f64 / grid as f64).exp()))
        .collect();
    for (i, &v) in vals.iter().enumerate() {
        if v < vals[arg] {
            arg = i;
        }
    }
    let step = (hi - lo) / grid as f64;
    let a0 = (lo + step * arg.saturating_sub(1) as f64).max(lo);
    let b0 = (lo + step * (arg + 1) as f64).min(hi);
    let (s, v) = golden_section(|s| separable_energy(a, p, d, s.exp()), a0, b0, 1e-8);
    if v < best.1 {
        best = (s.exp(), v);
    }
    TrialBound {
        energy: best.1,
        width: best.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IOptions {
    pub schedule: Vec<usize>,
    pub tol: f64,
    pub minimize: MinimizeOptions,
    /// Known `R_p`; computed on demand when needed and absent.
    pub threshold: Option<f64>,
}

impl Default for IOptions {
    fn default() -> Self {
        Self {
            schedule: vec![4, 6, 9, 13, 19],
            tol: 1e-6,
            minimize: MinimizeOptions::default(),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxEnergy {
    pub m: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IEstimate {
    pub value: f64,
    pub error: f64,
    /// A nonnegative estimate was reported as 0.
    pub clamped: bool,
    /// The value is an upper bound from a trial state rather than a
    /// converged box limit.
    pub upper_bound_only: bool,
    pub boxes: Vec<BoxEnergy>,
}

fn minimize_lenient(
    a: f64,
    p: f64,
    m: usize,
    d: usize,
    init: &InitPolicy,
    opts: &MinimizeOptions,
) -> Result<SolitonResult> {
    match dirichlet_minimize(a, p, m, d, init, opts) {
        Ok(r) => Ok(r),
        Err(Error::ConvergenceFailure {
            best: Some(b),
            residual,
            ..
        }) => {
            log::warn!("box m={m}, a={a}: residual {residual:e} above tolerance, using best iterate");
            Ok(*b)
        }
        Err(e) => Err(e),
    }
}

/// `I(a) = inf { H(φ) : ‖φ‖² = a }` on `Z^d`, from Dirichlet minimizations
/// over a growing box schedule.
pub fn minimal_energy_i(a: f64, p: f64, d: usize, opts: &IOptions) -> Result<IEstimate> {
    if !(a > 0.0) || !(p > 1.0) {
        return Err(invalid("need a > 0 and p > 1"));
    }
    if opts.schedule.is_empty() {
        return Err(invalid("box schedule is empty"));
    }
    let mut boxes: Vec<BoxEnergy> = Vec::new();
    let mut prev: Option<SolitonResult> = None;
    for &m in &opts.schedule {
        let mut best = minimize_lenient(a, p, m, d, &InitPolicy::Spike, &opts.minimize)?;
        let other = match &prev {
            Some(r) => minimize_lenient(a, p, m, d, &InitPolicy::Warm(r.profile.clone()), &opts.minimize)?,
            None => minimize_lenient(a, p, m, d, &InitPolicy::MultiStart, &opts.minimize)?,
        };
        if other.energy < best.energy {
            best = other;
        }
        if let Some(last) = boxes.last() {
            let diff = (last.energy - best.energy).abs();
            if diff < opts.tol && best.energy < 0.0 {
                boxes.push(BoxEnergy { m, energy: best.energy });
                return Ok(IEstimate {
                    value: best.energy,
                    error: diff,
                    clamped: false,
                    upper_bound_only: false,
                    boxes,
                });
            }
        }
        boxes.push(BoxEnergy { m, energy: best.energy });
        prev = Some(best);
    }
    let n = boxes.len();
    let last = boxes[n - 1].energy;
    let spread = if n > 1 {
        (boxes[n - 2].energy - last).abs()
    } else {
        f64::NAN
    };
    if last > 0.0 {
        // positive box energies: certified zero below the threshold
        let r_p = match opts.threshold {
            Some(r) => r,
            None => excitation_threshold_r_p(p, d, 1e-6)?.r_p,
        };
        if a <= r_p {
            return Ok(IEstimate {
                value: 0.0,
                error: last,
                clamped: true,
                upper_bound_only: false,
                boxes,
            });
        }
    }
    let trial = separable_trial(a, p, d);
    if trial.energy < 0.0 || last < 0.0 {
        return Ok(IEstimate {
            value: trial.energy.min(last),
            error: spread,
            clamped: false,
            upper_bound_only: true,
            boxes,
        });
    }
    Err(Error::AccuracyNotMet {
        value: last,
        error: spread,
        requested: opts.tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JTableOptions {
    /// Ratio between successive mass nodes.
    pub ratio: f64,
    pub box_m: usize,
    /// Smallest tabulated mass when `R_p = 0`.
    pub a_min: f64,
}

impl Default for JTableOptions {
    fn default() -> Self {
        Self {
            ratio: 1.01,
            box_m: 8,
            a_min: 1e-2,
        }
    }
}

/// `J(a) = I(a)/a` tabulated by continuation along the localized branch
/// and interpolated monotonically in `log a`.
#[derive(Debug, Clone)]
pub struct JTable {
    p: f64,
    d: usize,
    r_p: f64,
    a: Vec<f64>,
    j: Vec<f64>,
    interp: Pchip,
}

impl JTable {
    pub fn build(p: f64, d: usize, a_max: f64, opts: &JTableOptions) -> Result<Self> {
        if !(opts.ratio > 1.0) {
            return Err(invalid("node ratio must exceed 1"));
        }
        let m = opts.box_m;
        let supercritical = p >= critical_exponent(d) - 1e-12;
        let (r_p, mut warm, mut a) = if supercritical {
            let q = threshold_quotient(p, d, m)?;
            (q.r_p, Some(q.profile), q.r_p)
        } else {
            (0.0, None, opts.a_min)
        };
        let mut masses = Vec::new();
        let mut js = Vec::new();
        if r_p > 0.0 {
            masses.push(r_p);
            js.push(0.0);
            a *= opts.ratio;
        }
        let a_max = a_max.max(a * opts.ratio);
        loop {
            let init = match &warm {
                Some(w) => InitPolicy::Warm(w.clone()),
                None => InitPolicy::Spike,
            };
            let res = minimize_lenient(a, p, m, d, &init, &MinimizeOptions::default())?;
            masses.push(a);
            js.push((res.energy / a).min(0.0));
            warm = Some(res.profile);
            if a >= a_max {
                break;
            }
            a = (a * opts.ratio).min(a_max);
        }
        // enforce the monotonicity that the exact J has
        for i in 1..js.len() {
            if js[i] > js[i - 1] {
                js[i] = js[i - 1];
            }
        }
        let interp = Pchip::new(masses.iter().map(|a| a.ln()).collect(), js.clone())?;
        Ok(Self {
            p,
            d,
            r_p,
            a: masses,
            j: js,
            interp,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r_p(&self) -> f64 {
        self.r_p
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.j)
    }

    pub fn a_max(&self) -> f64 {
        *self.a.last().unwrap()
    }

    fn hat_shift(&self, a: f64) -> f64 {
        2.0 / (self.p + 1.0) * a.max(self.r_p).powf(0.5 * (self.p - 1.0))
    }

    pub fn j(&self, a: f64) -> f64 {
        if a <= 0.0 || a <= self.r_p {
            return 0.0;
        }
        let a0 = self.a[0];
        if a < a0 {
            // subcritical: J vanishes linearly at the origin
            return self.j[0] * a / a0;
        }
        let top = self.a_max();
        if a > top {
            let jhat_top = self.j[self.j.len() - 1] + self.hat_shift(top);
            return jhat_top - self.hat_shift(a);
        }
        self.interp.eval(a.ln()).min(0.0)
    }

    pub fn i(&self, a: f64) -> f64 {
        a * self.j(a)
    }

    /// `Ĵ(a) = J(a) + (2/(p+1)) (a ∨ R_p)^{(p-1)/2}`.
    pub fn j_hat(&self, a: f64) -> f64 {
        self.j(a) + self.hat_shift(a)
    }
}
