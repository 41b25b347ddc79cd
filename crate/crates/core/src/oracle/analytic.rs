use crate::state::BlochVector;

/// Bloch vector of a single decaying spin (no Hamiltonian) after time `t`.
pub fn single_spin_analytic(t: f64, initial: BlochVector, gamma: f64) -> BlochVector {
    let transverse = (-0.5 * gamma * t).exp();
    BlochVector::new(
        initial.x * transverse,
        initial.y * transverse,
        -1.0 + (1.0 + initial.z) * (-gamma * t).exp(),
    )
}
