//! Return-count Monte Carlo for the Green's function of simple random walk.
//!
//! The expected number of visits to the origin (time 0 included) of simple
//! random walk on `Z^d` equals `2d C_d`. Walks are truncated at `length`
//! steps; the remaining visits are added from the local limit theorem,
//! `Σ_{t>T} P(S_t = 0) ≈ (d/2π)^{d/2} T^{1-d/2} / (d/2 - 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkEstimate {
    /// Estimate of `C_d`.
    pub value: f64,
    /// Standard error of `value`.
    pub std_error: f64,
    /// Analytic tail added to the truncated count (in units of `C_d`).
    pub tail: f64,
    pub walks: u64,
    pub length: u64,
}

const CHUNKS: u64 = 256;

/// Estimates `C_d` from `walks` walks of `length` steps each.
pub fn random_walk_c_d(d: usize, walks: u64, length: u64, seed: u64) -> Result<WalkEstimate> {
    if d < 3 {
        return Err(invalid("random-walk estimate needs d >= 3"));
    }
    if walks < CHUNKS || length == 0 {
        return Err(invalid(format!("need at least {CHUNKS} walks and a positive length")));
    }
    let per_chunk = walks / CHUNKS;
    let sums: Vec<(f64, f64)> = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let mut pos = vec![0i64; d];
            let (mut s1, mut s2) = (0.0, 0.0);
            let dirs = 2 * d as u64;
            for _ in 0..per_chunk {
                pos.iter_mut().for_each(|p| *p = 0);
                let mut visits = 0u64;
                for _ in 0..length {
                    let r = ((rng.gen::<u32>() as u64 * dirs) >> 32) as usize;
                    let axis = r >> 1;
                    pos[axis] += if r & 1 == 0 { 1 } else { -1 };
                    if pos.iter().all(|&p| p == 0) {
                        visits += 1;
                    }
                }
                let v = visits as f64;
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let total = (per_chunk * CHUNKS) as f64;
    let s1: f64 = sums.iter().map(|s| s.0).sum();
    let s2: f64 = sums.iter().map(|s| s.1).sum();
    let mean = s1 / total;
    let var = (s2 / total - mean * mean) * total / (total - 1.0);
    let df = d as f64;
    let a = 0.5 * df;
    let tail = (df / (2.0 * std::f64::consts::PI)).powf(a) * (length as f64).powf(1.0 - a) / (a - 1.0);
    let green = 1.0 + mean + tail;
    Ok(WalkEstimate {
        value: green / (2.0 * df),
        std_error: (var / total).sqrt() / (2.0 * df),
        tail: tail / (2.0 * df),
        walks: per_chunk * CHUNKS,
        length,
    })
}
