//! Dirichlet ground states of the discrete NLS on boxes in `Z^d`, the
//! minimal energy `I(a)`, the excitation threshold `R_p`, decay fits and
//! time evolution.

mod boxfield;
mod decay;
mod dynamics;
mod minimize;
mod threshold;

pub use boxfield::{BoxField, BoxGeometry};
pub use decay::{decay_fit, DecayFit, DECAY_R2_MIN};
pub use dynamics::{
    embed_box_in_torus, evolve_dnls, rescale_solution, torus_hamiltonian, EvolveOptions, Scheme, Trajectory,
};
pub use minimize::{
    box_hamiltonian, dirichlet_minimize, lagrange_multiplier, InitPolicy, MinimizeOptions, SolitonResult,
};
pub use threshold::{
    critical_exponent, excitation_threshold_r_p, minimal_energy_i, separable_trial, threshold_bisection,
    threshold_quotient, weinstein_quotient, BoxEnergy, IEstimate, IOptions, JTable, JTableOptions, QuotientThreshold,
    ThresholdReport, TrialBound, THRESHOLD_BOX,
};

use crate::field::ComplexField;

/// A field for [`hamiltonian`]: Dirichlet box or periodic torus.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Box(&'a BoxField),
    Torus(&'a ComplexField),
}

/// `Σ_edges |ψ_x - ψ_y|² - (2/(p+1)) Σ_x |ψ_x|^{p+1}` at unit spacing.
pub fn hamiltonian(psi: FieldRef<'_>, p: f64) -> f64 {
    match psi {
        FieldRef::Box(b) => box_hamiltonian(b, p),
        FieldRef::Torus(t) => torus_hamiltonian(t, p, 1.0),
    }
}
