//! Complex-valued fields on a discrete torus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice_spectrum::TorusSpec;

/// A complex field `ψ: {0,…,n-1}^d → C`, stored in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    spec: TorusSpec,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(spec: TorusSpec) -> Self {
        Self {
            spec,
            data: vec![Complex64::new(0.0, 0.0); spec.num_sites()],
        }
    }

    pub fn from_vec(spec: TorusSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != spec.num_sites() {
            return Err(invalid(format!(
                "field has {} values, torus has {} sites",
                data.len(),
                spec.num_sites()
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.data
    }

    /// `‖ψ‖₂²`.
    pub fn mass(&self) -> f64 {
        crate::numerics::neumaier_sum(self.data.iter().map(|z| z.norm_sqr()))
    }

    /// `Σ_x ψ_x`.
    pub fn sum(&self) -> Complex64 {
        self.data.iter().sum()
    }

    /// `‖ψ‖_∞`.
    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖∇ψ‖₂² = Σ_x Σ_i |ψ_{x+e_i} - ψ_x|²` with periodic edges.
    pub fn gradient_energy(&self) -> f64 {
        let mut acc = crate::numerics::NeumaierSum::new();
        for x in 0..self.data.len() {
            for axis in 0..self.spec.d() {
                let y = self.spec.neighbor(x, axis, true);
                acc.add((self.data[y] - self.data[x]).norm_sqr());
            }
        }
        acc.value()
    }

    /// `Σ_x |ψ_x|^q`.
    pub fn power_sum(&self, q: f64) -> f64 {
        crate::numerics::neumaier_sum(self.data.iter().map(|z| z.norm().powf(q)))
    }

    /// Applies the positive periodic Laplacian `(Lψ)_x = Σ_{y~x} (ψ_x - ψ_y)`.
    pub fn laplacian_into(&self, out: &mut [Complex64]) {
        let d = self.spec.d();
        for x in 0..self.data.len() {
            let mut acc = self.data[x] * (2 * d) as f64;
            for axis in 0..d {
                acc -= self.data[self.spec.neighbor(x, axis, true)];
                acc -= self.data[self.spec.neighbor(x, axis, false)];
            }
            out[x] = acc;
        }
    }
}
