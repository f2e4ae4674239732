//! Mass-constrained minimization of the Dirichlet Hamiltonian
//! `H(φ) = ‖∇φ‖² - (2/(p+1)) Σ φ^{p+1}` over nonnegative fields with
//! `‖φ‖² = a`.
//!
//! A projected gradient phase (Barzilai–Borwein steps, nonmonotone Armijo
//! backtracking, entrywise absolute value, rescaling to the sphere) brings
//! the iterate close to a minimizer; Newton–CG on the tangent space then
//! drives the Euler–Lagrange residual `Lφ - φ^p - ωφ` to rounding level.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::boxfield::{BoxField, BoxGeometry};
use super::decay::{decay_fit, DecayFit};

/// Initial profile for the minimization.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// Gaussian bump at the centre with width `max(1, m/3)`.
    Gaussian,
    /// Gaussian bump with the given width.
    GaussianWidth(f64),
    /// All mass on the centre site.
    Spike,
    /// Constant on the box.
    Uniform,
    /// Gaussian, spike and uniform starts; the lowest energy wins.
    MultiStart,
    /// A given profile (embedded if it lives on a smaller box).
    Warm(BoxField),
}

impl InitPolicy {
    fn label(&self) -> String {
        match self {
            InitPolicy::Gaussian => "gaussian".into(),
            InitPolicy::GaussianWidth(w) => format!("gaussian({w})"),
            InitPolicy::Spike => "spike".into(),
            InitPolicy::Uniform => "uniform".into(),
            InitPolicy::MultiStart => "multi-start".into(),
            InitPolicy::Warm(_) => "warm".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Sup-norm tolerance on the Euler–Lagrange residual.
    pub tol: f64,
    /// Cap on projected gradient iterations per start.
    pub max_iters: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20_000,
        }
    }
}

/// A converged (or best available) Dirichlet ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonResult {
    pub profile: BoxField,
    pub a: f64,
    pub p: f64,
    pub d: usize,
    pub box_m: usize,
    pub energy: f64,
    pub omega: f64,
    /// Sup norm of `Lφ - φ^p - ωφ`.
    pub residual: f64,
    pub decay: Option<DecayFit>,
    pub iterations: usize,
    pub init: String,
    pub converged: bool,
}

#[inline]
pub(crate) fn powp(x: f64, p: f64) -> f64 {
    if p == 3.0 {
        x * x * x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rescale(x: &mut [f64], a: f64) {
    let m = dot(x, x);
    if m > 0.0 {
        let s = (a / m).sqrt();
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Iterate with everything needed for a step.
#[derive(Clone)]
struct State {
    x: Vec<f64>,
    energy: f64,
    omega: f64,
    r: Vec<f64>,
    r2: f64,
    rinf: f64,
}

pub(crate) struct Problem<'g> {
    geom: &'g BoxGeometry,
    p: f64,
    a: f64,
    lx: Vec<f64>,
}

impl<'g> Problem<'g> {
    pub(crate) fn new(geom: &'g BoxGeometry, p: f64, a: f64) -> Self {
        Self {
            geom,
            p,
            a,
            lx: vec![0.0; geom.len()],
        }
    }

    fn eval(&mut self, x: Vec<f64>) -> State {
        self.geom.laplacian(&x, &mut self.lx);
        let p = self.p;
        let grad = dot(&x, &self.lx);
        let mut nl = 0.0;
        for &v in &x {
            nl += powp(v, p) * v;
        }
        let energy = grad - 2.0 / (p + 1.0) * nl;
        let omega = (grad - nl) / self.a;
        let mut r = vec![0.0; x.len()];
        let (mut r2, mut rinf) = (0.0, 0.0f64);
        for i in 0..x.len() {
            let v = self.lx[i] - powp(x[i], p) - omega * x[i];
            r[i] = v;
            r2 += v * v;
            rinf = rinf.max(v.abs());
        }
        State {
            x,
            energy,
            omega,
            r,
            r2,
            rinf,
        }
    }

    /// Projected gradient with BB steps; returns when the residual falls
    /// below `switch` or the energy stagnates.
    fn descend(&mut self, mut st: State, switch: f64, max_iters: usize, iters: &mut usize) -> State {
        let n = st.x.len();
        let xmax = st.x.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut alpha = 1.0 / (4.0 * self.geom.d() as f64 + self.p * powp(xmax, self.p - 1.0) + 1.0);
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut history: Vec<f64> = vec![st.energy];
        let mut xt = vec![0.0; n];
        while *iters < max_iters {
            if st.rinf <= switch {
                break;
            }
            if let Some((xp, rp)) = &prev {
                let (mut ss, mut sy) = (0.0, 0.0);
                for i in 0..n {
                    let s = st.x[i] - xp[i];
                    ss += s * s;
                    sy += s * (st.r[i] - rp[i]);
                }
                if sy > 0.0 {
                    alpha = ss / sy;
                } else {
                    alpha *= 2.0;
                }
            }
            alpha = alpha.clamp(1e-10, 1e6);
            let reference = history.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut accepted = None;
            for _ in 0..60 {
                for i in 0..n {
                    xt[i] = (st.x[i] - alpha * st.r[i]).abs();
                }
                rescale(&mut xt, self.a);
                let cand = self.eval(xt.clone());
                if cand.energy <= reference - 1e-4 * alpha * 2.0 * st.r2 {
                    accepted = Some(cand);
                    break;
                }
                alpha *= 0.5;
            }
            *iters += 1;
            let Some(next) = accepted else {
                break;
            };
            let stagnant =
                (st.energy - next.energy).abs() <= 1e-15 * st.energy.abs().max(1e-300) && next.rinf >= st.rinf;
            prev = Some((std::mem::take(&mut st.x), std::mem::take(&mut st.r)));
            st = next;
            history.push(st.energy);
            if history.len() > 10 {
                history.remove(0);
            }
            if stagnant {
                break;
            }
        }
        st
    }

    /// Applies `P (L - p φ^{p-1} - ω) P`, with `P` the projection onto `x^⊥`.
    fn hessian_apply(&self, st: &State, v: &[f64], out: &mut [f64], weight: &[f64]) {
        self.geom.laplacian(v, out);
        for i in 0..v.len() {
            out[i] -= (weight[i] + st.omega) * v[i];
        }
        let c = dot(out, &st.x) / self.a;
        for i in 0..v.len() {
            out[i] -= c * st.x[i];
        }
    }

    /// Newton–CG polish; stops at `target` or when the residual no longer
    /// decreases.
    fn polish(&mut self, mut st: State, target: f64, iters: &mut usize) -> State {
        let n = st.x.len();
        for _ in 0..60 {
            if st.rinf <= target {
                break;
            }
            let weight: Vec<f64> = st.x.iter().map(|&v| self.p * powp(v, self.p - 1.0)).collect();
            // CG on the tangent space for H δ = -r
            let mut delta = vec![0.0; n];
            let mut res: Vec<f64> = st.r.iter().map(|v| -v).collect();
            let c = dot(&res, &st.x) / self.a;
            for i in 0..n {
                res[i] -= c * st.x[i];
            }
            let mut dir = res.clone();
            let mut rr = dot(&res, &res);
            let stop = (1e-4 * st.r2.sqrt()).min(1e-2 * st.r2).max(1e-30) * 1.0;
            let mut hd = vec![0.0; n];
            for _ in 0..2000 {
                if rr.sqrt() <= stop {
                    break;
                }
                self.hessian_apply(&st, &dir, &mut hd, &weight);
                let curv = dot(&dir, &hd);
                if curv <= 0.0 {
                    if delta.iter().all(|v| *v == 0.0) {
                        delta = res.clone();
                        let s = 1e-3 / (1.0 + st.rinf);
                        delta.iter_mut().for_each(|v| *v *= s);
                    }
                    break;
                }
                let alpha = rr / curv;
                for i in 0..n {
                    delta[i] += alpha * dir[i];
                    res[i] -= alpha * hd[i];
                }
                let rr_new = dot(&res, &res);
                let beta = rr_new / rr;
                rr = rr_new;
                for i in 0..n {
                    dir[i] = res[i] + beta * dir[i];
                }
            }
            *iters += 1;
            let mut step = 1.0;
            let mut improved = None;
            for _ in 0..12 {
                let mut xt: Vec<f64> = (0..n).map(|i| (st.x[i] + step * delta[i]).abs()).collect();
                rescale(&mut xt, self.a);
                let cand = self.eval(xt);
                if cand.r2 < st.r2 {
                    improved = Some(cand);
                    break;
                }
                step *= 0.5;
            }
            match improved {
                Some(c) => st = c,
                None => break,
            }
        }
        st
    }
}

fn gaussian(geom: &BoxGeometry, width: f64) -> Vec<f64> {
    (0..geom.len())
        .map(|x| {
            let r2: i64 = geom.coords(x).iter().map(|c| c * c).sum();
            (-(r2 as f64) / (2.0 * width * width)).exp()
        })
        .collect()
}

pub(crate) fn initial_profile(geom: &BoxGeometry, init: &InitPolicy) -> Result<Vec<f64>> {
    let m = geom.half_width();
    Ok(match init {
        InitPolicy::Gaussian => gaussian(geom, (m as f64 / 3.0).max(1.0)),
        InitPolicy::GaussianWidth(w) => {
            if !(*w > 0.0) {
                return Err(invalid("gaussian width must be positive"));
            }
            gaussian(geom, *w)
        }
        InitPolicy::Spike => {
            let mut v = vec![0.0; geom.len()];
            v[geom.center()] = 1.0;
            v
        }
        InitPolicy::Uniform => vec![1.0; geom.len()],
        InitPolicy::Warm(f) => {
            if f.d() != geom.d() {
                return Err(invalid("warm start has the wrong dimension"));
            }
            f.embed(m)?.values().to_vec()
        }
        InitPolicy::MultiStart => unreachable!("expanded by the caller"),
    })
}

/// Finite and non-exploding check on the nonlinearity.
fn check_finite(st: &State) -> Result<()> {
    if !st.energy.is_finite() || !st.rinf.is_finite() {
        return Err(Error::NumericOverflow { time: 0.0 });
    }
    Ok(())
}

fn single_start(
    geom: &BoxGeometry,
    a: f64,
    p: f64,
    init: &InitPolicy,
    opts: &MinimizeOptions,
) -> Result<SolitonResult> {
    let mut x = initial_profile(geom, init)?;
    rescale(&mut x, a);
    let mut prob = Problem::new(geom, p, a);
    let mut st = prob.eval(x);
    check_finite(&st)?;
    let scale = 1.0 + powp(st.x.iter().fold(0.0f64, |m, &v| m.max(v)), p);
    let mut iters = 0;
    for _ in 0..4 {
        st = prob.descend(st, 1e-5 * scale, opts.max_iters, &mut iters);
        check_finite(&st)?;
        st = prob.polish(st, 1e-3 * opts.tol, &mut iters);
        check_finite(&st)?;
        if st.rinf <= opts.tol || iters >= opts.max_iters {
            break;
        }
    }
    let d = geom.d();
    let profile = BoxField::new(d, geom.half_width(), st.x)?;
    let decay = decay_fit(&profile).ok();
    Ok(SolitonResult {
        a,
        p,
        d,
        box_m: geom.half_width(),
        energy: st.energy,
        omega: st.omega,
        residual: st.rinf,
        decay,
        iterations: iters,
        init: init.label(),
        converged: st.rinf <= opts.tol,
        profile,
    })
}

/// Minimizes `H` on the box of half-width `box_m` at mass `a`.
pub fn dirichlet_minimize(
    a: f64,
    p: f64,
    box_m: usize,
    d: usize,
    init: &InitPolicy,
    opts: &MinimizeOptions,
) -> Result<SolitonResult> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("mass must be positive, got {a}")));
    }
    if !(p > 1.0) {
        return Err(invalid(format!("nonlinearity p must exceed 1, got {p}")));
    }
    if box_m < 2 {
        return Err(invalid("box half-width must be at least 2"));
    }
    let geom = BoxGeometry::new(d, box_m)?;
    let starts: Vec<InitPolicy> = match init {
        InitPolicy::MultiStart => vec![InitPolicy::Gaussian, InitPolicy::Spike, InitPolicy::Uniform],
        other => vec![other.clone()],
    };
    let mut best: Option<SolitonResult> = None;
    for s in &starts {
        let r = single_start(&geom, a, p, s, opts)?;
        best = match best {
            None => Some(r),
            Some(b) => Some(better(b, r)),
        };
    }
    let best = best.unwrap();
    if !best.converged {
        return Err(Error::ConvergenceFailure {
            iterations: best.iterations,
            residual: best.residual,
            best: Some(Box::new(best)),
        });
    }
    Ok(best)
}

/// Prefers converged results, then lower energy.
fn better(a: SolitonResult, b: SolitonResult) -> SolitonResult {
    match (a.converged, b.converged) {
        (true, false) => a,
        (false, true) => b,
        _ => {
            if b.energy < a.energy {
                b
            } else {
                a
            }
        }
    }
}

/// `ω = (‖∇φ‖² - ‖φ‖_{p+1}^{p+1}) / a` recomputed from the profile.
pub fn lagrange_multiplier(result: &SolitonResult) -> Result<f64> {
    let a = result.profile.mass();
    if !(a > 0.0) {
        return Err(invalid("zero-mass profile has no multiplier"));
    }
    let geom = result.profile.geometry();
    let phi = result.profile.values();
    let grad = geom.gradient_energy(phi);
    let nl: f64 = phi.iter().map(|&v| powp(v, result.p) * v).sum();
    Ok((grad - nl) / a)
}

/// `H(φ)` on a box with Dirichlet edges.
pub fn box_hamiltonian(field: &BoxField, p: f64) -> f64 {
    let geom = field.geometry();
    let phi = field.values();
    let nl: f64 = phi.iter().map(|&v| powp(v, p) * v).sum();
    geom.gradient_energy(phi) - 2.0 / (p + 1.0) * nl
}

/// Minimizes `Q(f) = ‖∇f‖² / Σ f^{p+1}` over unit-mass nonnegative box
/// fields; returns the minimum and the minimizer.
pub(crate) fn minimize_quotient(
    geom: &BoxGeometry,
    p: f64,
    init: &InitPolicy,
    max_iters: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = geom.len();
    let mut f = initial_profile(geom, init)?;
    rescale(&mut f, 1.0);
    let mut lf = vec![0.0; n];
    let eval = |f: &[f64], lf: &mut Vec<f64>| -> (f64, Vec<f64>, f64) {
        geom.laplacian(f, lf);
        let num = dot(f, lf);
        let s: f64 = f.iter().map(|&v| powp(v, p) * v).sum();
        let q = num / s;
        let mut g: Vec<f64> = (0..n)
            .map(|i| (2.0 * lf[i] - (p + 1.0) * q * powp(f[i], p)) / s)
            .collect();
        let c = dot(&g, f);
        for i in 0..n {
            g[i] -= c * f[i];
        }
        let g2 = dot(&g, &g);
        (q, g, g2)
    };
    let (mut q, mut g, mut g2) = eval(&f, &mut lf);
    let mut alpha = 0.05;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut history = vec![q];
    for _ in 0..max_iters {
        let ginf = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if ginf <= 1e-12 {
            break;
        }
        if let Some((fp, gp)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..n {
                let s = f[i] - fp[i];
                ss += s * s;
                sy += s * (g[i] - gp[i]);
            }
            if sy > 0.0 {
                alpha = ss / sy;
            } else {
                alpha *= 2.0;
            }
        }
        alpha = alpha.clamp(1e-10, 1e6);
        let reference = history.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut accepted = None;
        for _ in 0..60 {
            let mut ft: Vec<f64> = (0..n).map(|i| (f[i] - alpha * g[i]).abs()).collect();
            rescale(&mut ft, 1.0);
            let (qt, gt, g2t) = eval(&ft, &mut lf);
            if qt <= reference - 1e-4 * alpha * g2 {
                accepted = Some((ft, qt, gt, g2t));
                break;
            }
            alpha *= 0.5;
        }
        let Some((ft, qt, gt, g2t)) = accepted else {
            break;
        };
        let stagnant = (q - qt).abs() <= 1e-16 * q;
        prev = Some((std::mem::replace(&mut f, ft), std::mem::replace(&mut g, gt)));
        q = qt;
        g2 = g2t;
        history.push(q);
        if history.len() > 10 {
            history.remove(0);
        }
        if stagnant {
            break;
        }
    }
    Ok((q, f))
}
