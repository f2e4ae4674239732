//! The variational free energy `F(θ, ν)`, its minimizers, the
//! solitonic/dispersive classification and the transition curve `θ_c(ν)`.
//!
//! With `J(a) = I(a)/a` the functional is
//! `G(a) = W(θ(1-a)) + θ a J(aν)` on `[0, a_M]` and
//! `F = log(π/θ) - min G`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::golden_section;
use crate::soliton::JTable;
use crate::thermo::ThermoFunctions;

/// Smallest admissible gap between the search cap and `a = 1`.
pub const A_M_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub theta: f64,
    pub nu: f64,
}

impl PhasePoint {
    pub fn new(theta: f64, nu: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(invalid(format!("theta must be positive and finite, got {theta}")));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(invalid(format!("nu must be positive and finite, got {nu}")));
        }
        Ok(Self { theta, nu })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Dispersive,
    Solitonic,
    NearBoundary,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Dispersive => "dispersive",
            Region::Solitonic => "solitonic",
            Region::NearBoundary => "near-boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub point: PhasePoint,
    pub f: f64,
    pub a_star: f64,
    pub minimizer_set: Vec<f64>,
    /// Classification from `a_star` alone.
    pub phase: Region,
    /// `phase`, or `NearBoundary` when the caller flagged the point.
    pub region: Region,
    pub a_m: f64,
    pub g_min: f64,
    /// `G(0) = W(θ)`.
    pub g0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptions {
    pub grid: usize,
    /// Width tolerance of the golden-section refinement in `a`.
    pub refine_tol: f64,
    /// `a_star > tol_a` means solitonic.
    pub tol_a: f64,
    /// Refined minima within this of the global value form the minimizer set.
    pub value_tol: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            grid: 512,
            refine_tol: 1e-9,
            tol_a: 1e-4,
            value_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaC {
    pub nu: f64,
    pub theta_c: f64,
    /// `min{((p+1)/2) ν^{-(p-1)/2} ξ_p(0), C_d ν/(ν - R_p)}`.
    pub cap: f64,
    /// Whether the cap itself was solitonic (it must be, in exact arithmetic).
    pub cap_ok: bool,
    pub evaluations: usize,
}

/// One row of a phase scan; failures are kept per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub theta: f64,
    pub nu: f64,
    pub result: std::result::Result<PhaseResult, String>,
}

/// `ξ_p(t) = inf_{0<a<1} -ln(1-a) / (a^{(p+1)/2} + t)`.
///
/// For `t > 0` the quotient tends to 0 as `a → 0`, so the infimum is 0.
pub fn xi(p: f64, t: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid("nonlinearity p must exceed 1"));
    }
    if !(t >= 0.0) {
        return Err(invalid("t must be nonnegative"));
    }
    if t > 0.0 {
        return Ok(0.0);
    }
    let e = 0.5 * (p + 1.0);
    let f = |a: f64| -(-a).ln_1p() / a.powf(e);
    let n = 4000;
    let mut best = (0.5, f(0.5));
    for i in 1..n {
        let a = i as f64 / n as f64;
        let v = f(a);
        if v < best.1 {
            best = (a, v);
        }
    }
    let h = 1.0 / n as f64;
    let (_, v) = golden_section(f, (best.0 - h).max(1e-12), (best.0 + h).min(1.0 - 1e-12), 1e-12);
    Ok(v.min(best.1))
}

/// Minimizer of the `t = 0` quotient.
pub fn xi_argmin(p: f64) -> f64 {
    let e = 0.5 * (p + 1.0);
    let f = |a: f64| -(-a).ln_1p() / a.powf(e);
    golden_section(f, 1e-6, 1.0 - 1e-9, 1e-12).0
}

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> Result<f64>>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return Ok(left + right + (left + right - whole) / 15.0);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    if b <= a {
        return Ok(0.0);
    }
    let (fa, fb, fm) = (f(a)?, f(b)?, f(0.5 * (a + b))?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Free-energy functional for fixed `d` and `p`.
pub struct PhaseModel {
    thermo: ThermoFunctions,
    jtable: JTable,
    opts: PhaseOptions,
    xi0: f64,
}

impl PhaseModel {
    pub fn new(thermo: ThermoFunctions, jtable: JTable, opts: PhaseOptions) -> Result<Self> {
        if thermo.d() != jtable.d() {
            return Err(invalid("thermodynamic functions and J table disagree on d"));
        }
        if opts.grid < 3 {
            return Err(invalid("coarse grid needs at least 3 points"));
        }
        let xi0 = xi(jtable.p(), 0.0)?;
        Ok(Self {
            thermo,
            jtable,
            opts,
            xi0,
        })
    }

    pub fn thermo(&self) -> &ThermoFunctions {
        &self.thermo
    }

    pub fn jtable(&self) -> &JTable {
        &self.jtable
    }

    pub fn options(&self) -> &PhaseOptions {
        &self.opts
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn r_p(&self) -> f64 {
        self.jtable.r_p()
    }

    /// `G(a) = W(θ(1-a)) + θ a J(aν)`.
    pub fn g(&self, a: f64, pt: PhasePoint) -> Result<f64> {
        if !(0.0..1.0).contains(&a) {
            return Err(invalid(format!("a must lie in [0, 1), got {a}")));
        }
        let w = self.thermo.w(pt.theta * (1.0 - a))?;
        Ok(w + pt.theta * a * self.jtable.j(a * pt.nu))
    }

    /// `a_M = 1 - exp(-θ(2d - J(ν)))`, kept at most `1 - A_M_GAP` so that
    /// the search interval stays inside `[0, 1)` in floating point.
    pub fn a_m(&self, pt: PhasePoint) -> f64 {
        let d = self.thermo.d() as f64;
        let v = -(-pt.theta * (2.0 * d - self.jtable.j(pt.nu))).exp_m1();
        v.min(1.0 - A_M_GAP)
    }

    /// `(G(a) - G(0))/θ` written as `a J(aν) + ∫_{1-a}^1 L(θs) ds`, with the
    /// integral evaluated independently of `W`.
    pub fn integral_form(&self, a: f64, pt: PhasePoint) -> Result<f64> {
        let l = |s: f64| self.thermo.l(pt.theta * s);
        let split = (self.thermo.c_d() / pt.theta).clamp(1.0 - a, 1.0);
        let tol = 1e-11;
        let integral = simpson(&l, 1.0 - a, split, tol)? + simpson(&l, split, 1.0, tol)?;
        Ok(a * self.jtable.j(a * pt.nu) + integral)
    }

    pub fn minimize_g(&self, pt: PhasePoint) -> Result<PhaseResult> {
        let a_m = self.a_m(pt);
        let n = self.opts.grid;
        let grid: Vec<f64> = (0..n).map(|i| a_m * i as f64 / (n - 1) as f64).collect();
        let vals = grid.iter().map(|&a| self.g(a, pt)).collect::<Result<Vec<f64>>>()?;
        let g0 = vals[0];
        let mut candidates: Vec<(f64, f64)> = vec![(0.0, g0)];
        for i in 1..n {
            let left_drop = vals[i] < vals[i - 1];
            let right_ok = i + 1 == n || vals[i] <= vals[i + 1];
            if left_drop && right_ok {
                let lo = grid[i - 1];
                let hi = if i + 1 < n { grid[i + 1] } else { grid[i] };
                let mut failure = None;
                let (a, v) = golden_section(
                    |a| match self.g(a, pt) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::INFINITY
                        }
                    },
                    lo,
                    hi,
                    self.opts.refine_tol,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                let (a, v) = if v <= vals[i] { (a, v) } else { (grid[i], vals[i]) };
                candidates.push((a, v));
            }
        }
        let g_min = candidates.iter().fold(f64::INFINITY, |m, c| m.min(c.1));
        let mut minimizer_set: Vec<f64> = candidates
            .iter()
            .filter(|c| c.1 <= g_min + self.opts.value_tol)
            .map(|c| c.0)
            .collect();
        minimizer_set.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let a_star = minimizer_set[0];
        let phase = if a_star > self.opts.tol_a {
            Region::Solitonic
        } else {
            Region::Dispersive
        };
        Ok(PhaseResult {
            point: pt,
            f: (PI / pt.theta).ln() - g_min,
            a_star,
            minimizer_set,
            phase,
            region: phase,
            a_m,
            g_min,
            g0,
        })
    }

    fn solitonic(&self, theta: f64, nu: f64) -> Result<bool> {
        Ok(self.minimize_g(PhasePoint::new(theta, nu)?)?.phase == Region::Solitonic)
    }

    /// The closed-form upper bound on `θ_c(ν)`.
    pub fn theta_c_cap(&self, nu: f64) -> f64 {
        let p = self.jtable.p();
        let r_p = self.r_p();
        let first = 0.5 * (p + 1.0) * nu.powf(-0.5 * (p - 1.0)) * self.xi0;
        let second = self.thermo.c_d() * nu / (nu - r_p);
        first.min(second)
    }

    /// Bisection in `θ` on the solitonic indicator; `tol` is relative.
    pub fn theta_c(&self, nu: f64, tol: f64) -> Result<ThetaC> {
        if !(nu > self.r_p()) {
            return Err(invalid(format!("theta_c needs nu > R_p = {}, got {nu}", self.r_p())));
        }
        let cap = self.theta_c_cap(nu);
        let mut trace = Vec::new();
        let mut evaluations = 0;
        let mut hi = cap;
        let mut cap_ok = true;
        loop {
            evaluations += 1;
            let s = self.solitonic(hi, nu)?;
            trace.push((hi, s));
            if s {
                break;
            }
            cap_ok = false;
            hi *= 1.5;
            if hi > 1e3 * cap {
                return Err(Error::BracketFailure {
                    message: format!("no solitonic point found above the cap at nu = {nu}"),
                    trace,
                });
            }
        }
        let mut lo = hi;
        loop {
            lo *= 0.5;
            evaluations += 1;
            let s = self.solitonic(lo, nu)?;
            trace.push((lo, s));
            if !s {
                break;
            }
            if lo < 1e-12 * cap {
                return Err(Error::BracketFailure {
                    message: format!("no dispersive point found below the cap at nu = {nu}"),
                    trace,
                });
            }
        }
        while hi - lo > tol * hi {
            let mid = 0.5 * (lo + hi);
            evaluations += 1;
            if self.solitonic(mid, nu)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(ThetaC {
            nu,
            theta_c: 0.5 * (lo + hi),
            cap,
            cap_ok,
            evaluations,
        })
    }

    /// Evaluates every `(θ, ν)` pair; rows are computed in parallel.
    pub fn scan(&self, thetas: &[f64], nus: &[f64]) -> Vec<ScanRow> {
        let pairs: Vec<(f64, f64)> = nus
            .iter()
            .flat_map(|&nu| thetas.iter().map(move |&th| (th, nu)))
            .collect();
        pairs
            .par_iter()
            .map(|&(theta, nu)| ScanRow {
                theta,
                nu,
                result: PhasePoint::new(theta, nu)
                    .and_then(|pt| self.minimize_g(pt))
                    .map_err(|e| e.to_string()),
            })
            .collect()
    }

    /// Marks rows within `band` (relative) of the given `θ_c(ν)` values as
    /// near-boundary.
    pub fn mark_near_boundary(rows: &mut [ScanRow], theta_c: &[(f64, f64)], band: f64) {
        for row in rows.iter_mut() {
            if let Ok(res) = row.result.as_mut() {
                if let Some(&(_, tc)) = theta_c.iter().find(|(nu, _)| *nu == row.nu) {
                    if (row.theta - tc).abs() < band * tc {
                        res.region = Region::NearBoundary;
                    }
                }
            }
        }
    }
}
