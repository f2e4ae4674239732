//! Real fields on the box `[-m, m]^d ∩ Z^d` with zero (Dirichlet) values
//! outside the box.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const OUTSIDE: u32 = u32::MAX;

/// Geometry and neighbour table of a box of half-width `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxGeometry {
    d: usize,
    m: usize,
    side: usize,
    len: usize,
    /// `2d` entries per site: backward then forward neighbour per axis.
    nbr: Vec<u32>,
}

impl BoxGeometry {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("box dimension must be at least 1"));
        }
        let side = 2 * m + 1;
        let len = side
            .checked_pow(d as u32)
            .filter(|&l| l < OUTSIDE as usize)
            .ok_or_else(|| invalid(format!("box of half-width {m} in d={d} is too large")))?;
        let mut nbr = vec![OUTSIDE; len * 2 * d];
        for x in 0..len {
            let mut stride = 1;
            for axis in (0..d).rev() {
                let c = (x / stride) % side;
                if c > 0 {
                    nbr[x * 2 * d + 2 * axis] = (x - stride) as u32;
                }
                if c + 1 < side {
                    nbr[x * 2 * d + 2 * axis + 1] = (x + stride) as u32;
                }
                stride *= side;
            }
        }
        Ok(Self { d, m, side, len, nbr })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> usize {
        self.m
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites `(2m+1)^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Coordinates of site `x` in `[-m, m]^d`.
    pub fn coords(&self, mut x: usize) -> Vec<i64> {
        let mut c = vec![0i64; self.d];
        for axis in (0..self.d).rev() {
            c[axis] = (x % self.side) as i64 - self.m as i64;
            x /= self.side;
        }
        c
    }

    /// Linear index of coordinates in `[-m, m]^d`, if inside.
    pub fn index(&self, c: &[i64]) -> Option<usize> {
        let mut x = 0usize;
        for &ci in c {
            let shifted = ci + self.m as i64;
            if shifted < 0 || shifted >= self.side as i64 {
                return None;
            }
            x = x * self.side + shifted as usize;
        }
        Some(x)
    }

    pub fn center(&self) -> usize {
        self.index(&vec![0; self.d]).unwrap()
    }

    /// Dirichlet Laplacian `(Lφ)_x = 2d φ_x - Σ_{y~x, y∈Λ} φ_y`.
    pub fn laplacian(&self, phi: &[f64], out: &mut [f64]) {
        let dd = 2 * self.d;
        for x in 0..self.len {
            let mut acc = dd as f64 * phi[x];
            for &y in &self.nbr[x * dd..(x + 1) * dd] {
                if y != OUTSIDE {
                    acc -= phi[y as usize];
                }
            }
            out[x] = acc;
        }
    }

    /// `‖∇φ‖₂²` over all edges touching the box (edges leaving the box
    /// contribute `φ_x²`).
    pub fn gradient_energy(&self, phi: &[f64]) -> f64 {
        let dd = 2 * self.d;
        let mut acc = 0.0;
        for x in 0..self.len {
            for k in 0..dd {
                let y = self.nbr[x * dd + k];
                if y == OUTSIDE {
                    acc += phi[x] * phi[x];
                } else if k % 2 == 1 {
                    let diff = phi[x] - phi[y as usize];
                    acc += diff * diff;
                }
            }
        }
        acc
    }
}

/// A nonnegative field on a box with its cached mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxField {
    d: usize,
    m: usize,
    values: Vec<f64>,
    mass: f64,
}

impl BoxField {
    pub fn new(d: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let len = (2 * m + 1).pow(d as u32);
        if values.len() != len {
            return Err(invalid(format!("box field needs {len} values, got {}", values.len())));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("box field values must be finite and nonnegative"));
        }
        let mass = values.iter().map(|v| v * v).sum();
        Ok(Self { d, m, values, mass })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cached `‖φ‖₂²`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn geometry(&self) -> BoxGeometry {
        BoxGeometry::new(self.d, self.m).expect("geometry of an existing field")
    }

    /// The same profile placed in a box of half-width `m_new >= m`, centred.
    pub fn embed(&self, m_new: usize) -> Result<BoxField> {
        if m_new < self.m {
            return Err(invalid("cannot embed into a smaller box"));
        }
        let src = self.geometry();
        let dst = BoxGeometry::new(self.d, m_new)?;
        let mut v = vec![0.0; dst.len()];
        for x in 0..src.len() {
            let c = src.coords(x);
            v[dst.index(&c).unwrap()] = self.values[x];
        }
        BoxField::new(self.d, m_new, v)
    }

    /// Largest single-site share of the mass.
    pub fn max_site_fraction(&self) -> f64 {
        let mx = self.values.iter().fold(0.0f64, |a, &b| a.max(b * b));
        if self.mass == 0.0 {
            0.0
        } else {
            mx / self.mass
        }
    }

    /// CSV rows `x1,…,xd,value` with a header.
    pub fn to_csv(&self) -> String {
        let g = self.geometry();
        let mut s = String::new();
        let names: Vec<String> = (1..=self.d).map(|i| format!("x{i}")).collect();
        s.push_str(&names.join(","));
        s.push_str(",value\n");
        for x in 0..g.len() {
            for c in g.coords(x) {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{}\n", self.values[x]));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_gradient_energy_counts_all_edges() {
        let g = BoxGeometry::new(3, 2).unwrap();
        let mut phi = vec![0.0; g.len()];
        phi[g.center()] = 1.0;
        assert_eq!(g.gradient_energy(&phi), 6.0);
        // a corner site has three edges leaving the box
        let mut psi = vec![0.0; g.len()];
        psi[0] = 1.0;
        assert_eq!(g.gradient_energy(&psi), 6.0);
    }

    #[test]
    fn laplacian_form_equals_gradient_energy() {
        let g = BoxGeometry::new(2, 3).unwrap();
        let phi: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 11) as f64).sqrt()).collect();
        let mut lphi = vec![0.0; g.len()];
        g.laplacian(&phi, &mut lphi);
        let form: f64 = phi.iter().zip(&lphi).map(|(a, b)| a * b).sum();
        assert!((form - g.gradient_energy(&phi)).abs() < 1e-10);
    }

    #[test]
    fn embedding_keeps_mass_and_centre() {
        let g = BoxGeometry::new(3, 1).unwrap();
        let mut v = vec![0.1; g.len()];
        v[g.center()] = 2.0;
        let f = BoxField::new(3, 1, v).unwrap();
        let e = f.embed(3).unwrap();
        assert!((e.mass() - f.mass()).abs() < 1e-14);
        assert_eq!(e.values()[e.geometry().center()], 2.0);
    }
}
