//! Noisy encoding dynamics: a local 3D-field unitary on every qubit followed
//! by per-qubit Kraus dephasing, either with a fixed probability or with the
//! time profile of an Ornstein-Uhlenbeck field fluctuation.

use crate::linalg::{
    cr, embed_one, hermitize, identity, max_abs_diff, single_qubit_field_unitary, CMat,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("dephasing probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("Kraus completeness violated: max |sum K^dag K - I| = {0:.3e}")]
    KrausIncomplete(f64),
    #[error("bad noise parameter: {0}")]
    BadParameter(String),
}

/// Per-qubit dephasing noise family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Fixed dephasing probability lambda.
    Dephasing { lambda: f64 },
    /// Ornstein-Uhlenbeck dephasing with decay rate gamma and environment
    /// memory time tau_c; the Markovian flag selects q(t) = 1 - e^{-gamma t}
    /// versus the non-Markovian q(t) = 1 - e^{-gamma t^2 / (2 tau_c)}.
    OrnsteinUhlenbeck {
        gamma: f64,
        tau_c: f64,
        markovian: bool,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            NoiseModel::Dephasing { lambda } => {
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(ChannelError::BadProbability(lambda));
                }
            }
            NoiseModel::OrnsteinUhlenbeck { gamma, tau_c, .. } => {
                if gamma.is_nan() || gamma < 0.0 {
                    return Err(ChannelError::BadParameter(format!(
                        "decay rate must be >= 0, got {gamma}"
                    )));
                }
                if tau_c.is_nan() || tau_c <= 0.0 {
                    return Err(ChannelError::BadParameter(format!(
                        "memory time must be > 0, got {tau_c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Effective dephasing probability at sensing time t.
    pub fn probability_at(&self, t: f64) -> f64 {
        match *self {
            NoiseModel::Dephasing { lambda } => lambda,
            NoiseModel::OrnsteinUhlenbeck {
                gamma,
                tau_c,
                markovian,
            } => ou_q(t, gamma, tau_c, markovian),
        }
    }
}

/// Encoding of the field (phi_x, phi_y, phi_z) for a sensing time t on an
/// N-qubit register; the same single-qubit unitary acts on every qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingConfig {
    pub phi: [f64; 3],
    pub t: f64,
    pub n_qubits: usize,
}

/// Dephasing Kraus pair K1 = diag(sqrt(1-lambda), 1), K2 = [[sqrt(lambda),0],[0,0]].
pub fn dephasing_kraus(lambda: f64) -> Result<(CMat, CMat), ChannelError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ChannelError::BadProbability(lambda));
    }
    let k1 = CMat::from_row_slice(
        2,
        2,
        &[cr((1.0 - lambda).sqrt()), cr(0.0), cr(0.0), cr(1.0)],
    );
    let k2 = CMat::from_row_slice(2, 2, &[cr(lambda.sqrt()), cr(0.0), cr(0.0), cr(0.0)]);
    Ok((k1, k2))
}

/// Dephasing probability q(t) = 1 - e^{-f(t)} of the Ornstein-Uhlenbeck model,
/// with f = gamma t (Markovian) or f = gamma t^2 / (2 tau_c) (non-Markovian).
pub fn ou_q(t: f64, gamma: f64, tau_c: f64, markovian: bool) -> f64 {
    let f = if markovian {
        gamma * t
    } else {
        gamma * t * t / (2.0 * tau_c)
    };
    1.0 - (-f).exp()
}

/// Apply the single-qubit Kraus pair to every qubit in sequence:
/// rho -> sum_i K_i^{(k)} rho K_i^{(k)dag} for k = 0..N-1.
pub fn apply_per_qubit_channel(
    rho: &CMat,
    k1: &CMat,
    k2: &CMat,
    n_qubits: usize,
) -> Result<CMat, ChannelError> {
    let completeness = k1.adjoint() * k1 + k2.adjoint() * k2;
    let defect = max_abs_diff(&completeness, &identity(2));
    if defect > 1e-10 {
        return Err(ChannelError::KrausIncomplete(defect));
    }
    let mut state = rho.clone();
    for q in 0..n_qubits {
        let k1_full = embed_one(k1, q, n_qubits);
        let k2_full = embed_one(k2, q, n_qubits);
        state = &k1_full * &state * k1_full.adjoint() + &k2_full * &state * k2_full.adjoint();
    }
    Ok(hermitize(&state))
}

/// Noisy encoding: the local field unitary acts first, then the per-qubit
/// dephasing channel. For Ornstein-Uhlenbeck noise the channel parameter is
/// q(t) at the encoding time.
pub fn evolve(rho: &CMat, enc: &EncodingConfig, noise: &NoiseModel) -> Result<CMat, ChannelError> {
    noise.validate()?;
    let u1 = single_qubit_field_unitary(enc.phi, enc.t);
    let mut u = u1.clone();
    for _ in 1..enc.n_qubits {
        u = u.kronecker(&u1);
    }
    let rotated = &u * rho * u.adjoint();
    let lambda = noise.probability_at(enc.t);
    let (k1, k2) = dephasing_kraus(lambda)?;
    apply_per_qubit_channel(&rotated, &k1, &k2, enc.n_qubits)
}
