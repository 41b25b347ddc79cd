//! Closed-form single-site mean-field steady state of the dissipative XYZ model.

use crate::dynamics::ModelParams;

/// Mean-field k = 0 structure factor `(M_x^MF)^2`.
///
/// With `q = 1 / sqrt((J_z - J_x)(J_y - J_z))`:
/// `S = (γ/8) ((γ/16) q - 1) q (J_y - J_z) / (J_x - J_y)`.
/// Returns 0 outside the ferromagnetic branch: when the square root is not
/// real, when `J_x = J_y`, or when the expression is negative.
pub fn mf_structure_factor(p: &ModelParams) -> f64 {
    let ModelParams { jx, jy, jz, gamma } = *p;
    let product = (jz - jx) * (jy - jz);
    if !(product > 0.0) || jx == jy {
        return 0.0;
    }
    let q = (1.0 / product).sqrt();
    let s = gamma / 8.0 * (gamma / 16.0 * q - 1.0) * q * (jy - jz) / (jx - jy);
    if s > 0.0 && s.is_finite() {
        s
    } else {
        0.0
    }
}

/// Onset of the mean-field ferromagnet: the smallest `J_y > J_z` with a
/// positive structure factor, `J_z + γ² / (256 (J_z - J_x))`. `None` when
/// `J_z <= J_x`, where no such transition exists.
pub fn mf_transition_point(jx: f64, jz: f64, gamma: f64) -> Option<f64> {
    if !(jz > jx) {
        return None;
    }
    Some(jz + gamma * gamma / (256.0 * (jz - jx)))
}
