//! Fisher information machinery: classical/quantum Fisher information
//! matrices, SLD operators, Cramér-Rao bound endpoints, the tradeoff
//! functional, and the cost functions driving the variational loop.
//!
//! Field derivatives of probabilities and states use central finite
//! differences with a configurable shift; the QFIM is computed from the
//! vectorization formula Q_ij = 2 vec[d_i rho]^dag [rho* ⊗ I + I ⊗ rho]^+
//! vec[d_j rho], with the SLD route kept as an independent cross-check.

use crate::ansatz::{self, Ansatz, AnsatzError};
use crate::channel::{evolve, ChannelError, EncodingConfig, NoiseModel};
use crate::linalg::{
    eig_hermitian, kron, pinv_hermitian, pinv_symmetric, vec_cols, CMat, LinalgError, RMat, RVec,
    PINV_REL_TOL,
};
use num_complex::Complex64;
use std::str::FromStr;
use thiserror::Error;

/// Number of estimated field components (phi_x, phi_y, phi_z).
pub const FIELD_COMPONENTS: usize = 3;

/// Default central-difference shift for field derivatives. Small enough that
/// the O(s^2) kernel leak of pure-state derivatives stays below the
/// information-inequality tolerance, large enough to stay clear of f64
/// cancellation.
pub const DEFAULT_FD_SHIFT: f64 = 1e-3;

/// Outcomes with probability below this floor contribute nothing to the CFIM.
pub const PROB_FLOOR: f64 = 1e-12;

/// Eigenvalue-sum floor for the SLD construction in the eigenbasis of rho.
const SLD_SUPPORT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FisherError {
    #[error("classical bound is degenerate: C_F = {0:.3e}")]
    DegenerateBound(f64),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Cost function selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// 1 - C_S / C_F, the relative gap between the bounds.
    Relative,
    /// 1 - Tr[F Q^-1] / d.
    Tradeoff,
    /// ||F - Q||_2 (largest singular value).
    Norm2,
    /// Tr[F^-1], the classical bound itself.
    #[serde(rename = "cf")]
    CfOnly,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::Relative => "relative",
            CostKind::Tradeoff => "tradeoff",
            CostKind::Norm2 => "norm2",
            CostKind::CfOnly => "cf",
        }
    }
}

impl FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relative" => Ok(CostKind::Relative),
            "tradeoff" => Ok(CostKind::Tradeoff),
            "norm2" => Ok(CostKind::Norm2),
            "cf" => Ok(CostKind::CfOnly),
            other => Err(format!(
                "unknown cost '{other}' (expected relative|tradeoff|norm2|cf)"
            )),
        }
    }
}

/// Everything evaluated at one (theta, mu, phi, noise) point.
#[derive(Debug, Clone)]
pub struct FisherBundle {
    pub f: RMat,
    pub q: RMat,
    pub c_f: f64,
    pub c_s: f64,
    pub tradeoff: f64,
    pub cost: f64,
    /// Rank deficiency was hit when inverting F (bound reported via
    /// pseudo-inverse).
    pub singular_f: bool,
    pub singular_q: bool,
}

/// Outcome probabilities p_m = Tr[rho E_m] for a POVM.
pub fn probabilities(rho_final: &CMat, povm: &[CMat]) -> RVec {
    RVec::from_iterator(
        povm.len(),
        povm.iter().map(|e| {
            // Tr[rho E] = sum_ij rho_ij E_ji
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..rho_final.nrows() {
                for j in 0..rho_final.ncols() {
                    acc += rho_final[(i, j)] * e[(j, i)];
                }
            }
            acc.re
        }),
    )
}

/// Classical Fisher information matrix F_ij = sum_m (d_i p_m)(d_j p_m) / p_m,
/// skipping outcomes below the probability floor.
pub fn cfim(p: &RVec, dp: &RMat) -> RMat {
    let d = dp.nrows();
    let mut f = RMat::zeros(d, d);
    for m in 0..p.len() {
        let pm = p[m];
        if pm < PROB_FLOOR {
            continue;
        }
        for i in 0..d {
            for j in i..d {
                let contrib = dp[(i, m)] * dp[(j, m)] / pm;
                f[(i, j)] += contrib;
                if i != j {
                    f[(j, i)] += contrib;
                }
            }
        }
    }
    f
}

/// Quantum Fisher information matrix from the vectorization formula,
/// Q_ij = 2 vec[d_i rho]^dag [rho* ⊗ I + I ⊗ rho]^+ vec[d_j rho].
pub fn qfim(rho: &CMat, drho: &[CMat]) -> Result<RMat, FisherError> {
    let n = rho.nrows();
    let eye = CMat::identity(n, n);
    let rho_conj = rho.map(|z| z.conj());
    let superop = kron(&rho_conj, &eye) + kron(&eye, rho);
    let pinv = pinv_hermitian(&superop, PINV_REL_TOL)?;
    let d = drho.len();
    let vecs: Vec<_> = drho.iter().map(vec_cols).collect();
    let projected: Vec<_> = vecs.iter().map(|v| &pinv * v).collect();
    let mut q = RMat::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let val = 2.0 * vecs[i].dotc(&projected[j]).re;
            q[(i, j)] = val;
            q[(j, i)] = val;
        }
    }
    Ok(q)
}

/// Symmetric logarithmic derivatives solving 2 d_k rho = {L_k, rho} on the
/// support of rho: in the eigenbasis, (L_k)_ab = 2 (d_k rho)_ab / (p_a + p_b)
/// wherever p_a + p_b exceeds the support floor.
pub fn sld_set(rho: &CMat, drho: &[CMat]) -> Result<Vec<CMat>, FisherError> {
    let (w, v) = eig_hermitian(rho)?;
    let n = rho.nrows();
    let mut slds = Vec::with_capacity(drho.len());
    for dr in drho {
        let in_basis = v.adjoint() * dr * &v;
        let mut l = CMat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let denom = w[a] + w[b];
                if denom > SLD_SUPPORT_FLOOR {
                    l[(a, b)] = 2.0 * in_basis[(a, b)] / denom;
                }
            }
        }
        slds.push(&v * l * v.adjoint());
    }
    Ok(slds)
}

/// QFIM from SLD operators: Q_ij = Re Tr[rho L_i L_j]. Independent of the
/// vectorization route; used as a cross-check.
pub fn qfim_from_slds(rho: &CMat, slds: &[CMat]) -> RMat {
    let d = slds.len();
    let mut q = RMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let prod = rho * &slds[i] * &slds[j];
            q[(i, j)] = prod.diagonal().sum().re;
        }
    }
    (q.clone() + q.transpose()).scale(0.5)
}

/// Weak commutativity matrix W_ij = Im Tr[L_j L_i rho]; all zeros when the
/// SLD quantum bound is attainable.
pub fn weak_commutativity(rho: &CMat, slds: &[CMat]) -> RMat {
    let d = slds.len();
    RMat::from_fn(d, d, |i, j| {
        (&slds[j] * &slds[i] * rho).diagonal().sum().im
    })
}

fn weighted_trace_pinv(m: &RMat, weight: Option<&RMat>) -> (f64, bool) {
    let (pinv, dropped) = pinv_symmetric(m, PINV_REL_TOL);
    let value = match weight {
        Some(w) => (w * pinv).trace(),
        None => pinv.trace(),
    };
    (value, dropped)
}

/// Classical Cramér-Rao endpoint C_F = Tr[W F^-1]; the pseudo-inverse is used
/// when F is singular and the flag reports it.
pub fn bound_cf(f: &RMat, weight: Option<&RMat>) -> (f64, bool) {
    weighted_trace_pinv(f, weight)
}

/// SLD quantum bound C_S = Tr[W Q^-1], with the same singular handling.
pub fn bound_cs(q: &RMat, weight: Option<&RMat>) -> (f64, bool) {
    weighted_trace_pinv(q, weight)
}

/// Tradeoff functional T = Tr[F Q^-1]; approaches the parameter count d when
/// the measurement extracts all quantum information.
pub fn tradeoff(f: &RMat, q: &RMat) -> f64 {
    let (q_inv, _) = pinv_symmetric(q, PINV_REL_TOL);
    (f * q_inv).trace()
}

/// Relative-difference cost 1 - C_S/C_F, with both bounds taken through the
/// same pseudo-inverse.
pub fn cost_relative(f: &RMat, q: &RMat) -> Result<f64, FisherError> {
    let (c_f, _) = bound_cf(f, None);
    if c_f <= 1e-14 {
        return Err(FisherError::DegenerateBound(c_f));
    }
    let (c_s, _) = bound_cs(q, None);
    Ok(1.0 - c_s / c_f)
}

/// Tradeoff cost 1 - T/d.
pub fn cost_tradeoff(f: &RMat, q: &RMat, d: usize) -> f64 {
    1.0 - tradeoff(f, q) / d as f64
}

/// Spectral-norm cost ||F - Q||_2.
pub fn cost_norm2(f: &RMat, q: &RMat) -> f64 {
    let diff = f - q;
    let sym = (diff.clone() + diff.transpose()).scale(0.5);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Classical-bound-only cost Tr[F^-1].
pub fn cost_cf_only(f: &RMat) -> f64 {
    bound_cf(f, None).0
}

/// The noisy sensing pipeline at fixed physics: probe circuit, measurement
/// circuit, encoding, and noise model. Evaluations at different (theta, mu)
/// are independent and side-effect free.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub prep: Ansatz,
    pub meas: Ansatz,
    pub enc: EncodingConfig,
    pub noise: NoiseModel,
    /// Central-difference shift for field derivatives.
    pub fd_shift: f64,
}

impl Pipeline {
    pub fn n_params(&self) -> usize {
        self.prep.n_params + self.meas.n_params
    }

    /// Split a concatenated optimization vector into (theta, mu).
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.prep.n_params)
    }

    fn enc_at(&self, phi: [f64; 3]) -> EncodingConfig {
        EncodingConfig { phi, ..self.enc }
    }

    /// Final state at a given field value.
    pub fn state_at(&self, probe: &CMat, phi: [f64; 3]) -> Result<CMat, FisherError> {
        Ok(evolve(probe, &self.enc_at(phi), &self.noise)?)
    }

    /// Outcome probabilities at the pipeline's field point.
    pub fn probabilities_at(&self, theta: &[f64], mu: &[f64]) -> Result<RVec, FisherError> {
        let probe = ansatz::prepare_state(&self.prep, theta)?;
        let povm = ansatz::povm_from(&self.meas, mu)?;
        let rho = self.state_at(&probe, self.enc.phi)?;
        Ok(probabilities(&rho, &povm))
    }

    /// Central-difference stencil over the three field components:
    /// the center state and the pair of shifted states per component.
    fn field_stencil(&self, probe: &CMat, s: f64) -> Result<(CMat, Vec<(CMat, CMat)>), FisherError> {
        let rho0 = self.state_at(probe, self.enc.phi)?;
        let mut shifted = Vec::with_capacity(FIELD_COMPONENTS);
        for i in 0..FIELD_COMPONENTS {
            let mut up = self.enc.phi;
            up[i] += s;
            let mut down = self.enc.phi;
            down[i] -= s;
            shifted.push((self.state_at(probe, up)?, self.state_at(probe, down)?));
        }
        Ok((rho0, shifted))
    }

    /// Evaluate the full Fisher bundle at (theta, mu).
    pub fn eval(&self, theta: &[f64], mu: &[f64], cost: CostKind) -> Result<FisherBundle, FisherError> {
        let probe = ansatz::prepare_state(&self.prep, theta)?;
        let povm = ansatz::povm_from(&self.meas, mu)?;
        self.eval_prepared(&probe, &povm, cost)
    }

    /// Same as [`Pipeline::eval`] with the probe and POVM already built.
    pub fn eval_prepared(
        &self,
        probe: &CMat,
        povm: &[CMat],
        cost: CostKind,
    ) -> Result<FisherBundle, FisherError> {
        let s = self.fd_shift;
        let (rho0, shifted) = self.field_stencil(probe, s)?;
        let p0 = probabilities(&rho0, povm);
        let m_outcomes = povm.len();
        let mut dp = RMat::zeros(FIELD_COMPONENTS, m_outcomes);
        let mut drho = Vec::with_capacity(FIELD_COMPONENTS);
        for (i, (up, down)) in shifted.iter().enumerate() {
            let p_up = probabilities(up, povm);
            let p_down = probabilities(down, povm);
            for m in 0..m_outcomes {
                dp[(i, m)] = (p_up[m] - p_down[m]) / (2.0 * s);
            }
            drho.push((up - down).scale(1.0 / (2.0 * s)));
        }
        let f = cfim(&p0, &dp);
        let q = qfim(&rho0, &drho)?;
        bundle_from_matrices(f, q, cost)
    }

    /// Evaluate with theta and mu concatenated into one vector.
    pub fn eval_x(&self, x: &[f64], cost: CostKind) -> Result<FisherBundle, FisherError> {
        let (theta, mu) = self.split(x);
        self.eval(theta, mu, cost)
    }
}

/// Assemble bounds, tradeoff and the selected cost from (F, Q).
pub fn bundle_from_matrices(f: RMat, q: RMat, cost: CostKind) -> Result<FisherBundle, FisherError> {
    let (c_f, singular_f) = bound_cf(&f, None);
    let (c_s, singular_q) = bound_cs(&q, None);
    let t = tradeoff(&f, &q);
    let cost_value = match cost {
        CostKind::Relative => {
            if c_f <= 1e-14 {
                return Err(FisherError::DegenerateBound(c_f));
            }
            1.0 - c_s / c_f
        }
        CostKind::Tradeoff => 1.0 - t / FIELD_COMPONENTS as f64,
        CostKind::Norm2 => cost_norm2(&f, &q),
        CostKind::CfOnly => c_f,
    };
    Ok(FisherBundle {
        f,
        q,
        c_f,
        c_s,
        tradeoff: t,
        cost: cost_value,
        singular_f,
        singular_q,
    })
}

/// Central finite differences of the outcome probabilities along each field
/// component: returns (p at the center, the d x M derivative matrix).
pub fn dprob_dphi(
    pipeline: &Pipeline,
    theta: &[f64],
    mu: &[f64],
    s: f64,
) -> Result<(RVec, RMat), FisherError> {
    let probe = ansatz::prepare_state(&pipeline.prep, theta)?;
    let povm = ansatz::povm_from(&pipeline.meas, mu)?;
    let (rho0, shifted) = pipeline.field_stencil(&probe, s)?;
    let p0 = probabilities(&rho0, &povm);
    let mut dp = RMat::zeros(FIELD_COMPONENTS, povm.len());
    for (i, (up, down)) in shifted.iter().enumerate() {
        let p_up = probabilities(up, &povm);
        let p_down = probabilities(down, &povm);
        for m in 0..povm.len() {
            dp[(i, m)] = (p_up[m] - p_down[m]) / (2.0 * s);
        }
    }
    Ok((p0, dp))
}

/// Central finite differences of the final state along each field component:
/// returns (rho at the center, the list of state derivatives).
pub fn drho_dphi(
    pipeline: &Pipeline,
    theta: &[f64],
    s: f64,
) -> Result<(CMat, Vec<CMat>), FisherError> {
    let probe = ansatz::prepare_state(&pipeline.prep, theta)?;
    let (rho0, shifted) = pipeline.field_stencil(&probe, s)?;
    let drho = shifted
        .iter()
        .map(|(up, down)| (up - down).scale(1.0 / (2.0 * s)))
        .collect();
    Ok((rho0, drho))
}
