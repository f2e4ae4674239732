//! Exponential decay fit `φ_x ≤ C₀ e^{-ω₀ dist(x, peak)}` for box profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linear_fit;

use super::boxfield::BoxField;

/// Minimum R² for a fit to count as exponential decay.
pub const DECAY_R2_MIN: f64 = 0.95;

/// Values at or below this are ignored by the fit.
const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c0: f64,
    pub omega0: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r2: f64,
    /// Number of distance shells used.
    pub shells: usize,
}

impl DecayFit {
    pub fn accepted(&self) -> bool {
        self.r2 >= DECAY_R2_MIN && self.omega0 > 0.0
    }
}

/// Fits `log max_{|x - x₀|₁ = r} φ_x` linearly in `r` over shells
/// `2 ≤ r ≤ m`, where `x₀` is the (first) maximal site.
pub fn decay_fit(profile: &BoxField) -> Result<DecayFit> {
    let geom = profile.geometry();
    let v = profile.values();
    let (peak, _) = v.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
    );
    let p0 = geom.coords(peak);
    let m = geom.half_width();
    let mut shell_max = vec![0.0f64; m + 1];
    for x in 0..geom.len() {
        let dist: i64 = geom.coords(x).iter().zip(&p0).map(|(a, b)| (a - b).abs()).sum();
        let r = dist as usize;
        if r <= m {
            shell_max[r] = shell_max[r].max(v[x]);
        }
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (r, &s) in shell_max.iter().enumerate().skip(2) {
        if s > FLOOR {
            xs.push(r as f64);
            ys.push(s.ln());
        }
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs 4 shells above {FLOOR:e}, found {}",
            xs.len()
        )));
    }
    let fit = linear_fit(&xs, &ys)?;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let spread: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    // a flat profile explains nothing
    let r2 = if spread <= 1e-24 { 0.0 } else { fit.r2 };
    Ok(DecayFit {
        c0: fit.intercept.exp(),
        omega0: -fit.slope,
        r2,
        shells: xs.len(),
    })
}
