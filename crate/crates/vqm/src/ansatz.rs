//! Variational circuits: star- and ring-graph ansatzes built from y-rotations
//! and CZ gates, and a squeezing ansatz built from x/y-rotations and global
//! Mølmer-Sørensen gates. The same circuits generate preparation unitaries
//! U(theta) and measurement unitaries U(mu).

use crate::linalg::{
    c, cr, embed_one, embed_pair, identity, kron, outer, pauli_x, pauli_z, CMat,
    CVec,
};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnsatzError {
    #[error("bad shape: {0}")]
    BadShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzKind {
    Star,
    Ring,
    Squeezing,
}

impl AnsatzKind {
    pub fn name(self) -> &'static str {
        match self {
            AnsatzKind::Star => "star",
            AnsatzKind::Ring => "ring",
            AnsatzKind::Squeezing => "squeezing",
        }
    }

    /// Trainable variables per layer: 2N-2, 2N and N(N+1) for the star,
    /// ring and squeezing ansatz.
    pub fn params_per_layer(self, n_qubits: usize) -> usize {
        match self {
            AnsatzKind::Star => 2 * n_qubits - 2,
            AnsatzKind::Ring => 2 * n_qubits,
            AnsatzKind::Squeezing => n_qubits * (n_qubits + 1),
        }
    }
}

impl FromStr for AnsatzKind {
    type Err = AnsatzError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "star" => Ok(AnsatzKind::Star),
            "ring" => Ok(AnsatzKind::Ring),
            "squeezing" => Ok(AnsatzKind::Squeezing),
            other => Err(AnsatzError::BadShape(format!(
                "unknown ansatz kind '{other}' (expected star|ring|squeezing)"
            ))),
        }
    }
}

/// One gate in a circuit. Rotation gates consume one parameter slot; CZ none;
/// each Mølmer-Sørensen gate consumes one slot per unordered qubit pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateOp {
    RotY { qubit: usize, slot: usize },
    RotX { qubit: usize, slot: usize },
    Cz { a: usize, b: usize },
    MsXx { pairs: Vec<(usize, usize)>, first_slot: usize },
    MsZz { pairs: Vec<(usize, usize)>, first_slot: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    pub kind: AnsatzKind,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub gates: Vec<GateOp>,
    pub n_params: usize,
}

impl Ansatz {
    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }
}

fn all_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for j in 0..n_qubits {
        for k in (j + 1)..n_qubits {
            pairs.push((j, k));
        }
    }
    pairs
}

/// Star graph circuit: qubit 0 is the center. Each layer applies, for every
/// leaf k, a RotY on the center and on the leaf followed by CZ(center, k).
pub fn build_star(n_qubits: usize, n_layers: usize) -> Result<Ansatz, AnsatzError> {
    if n_qubits < 2 {
        return Err(AnsatzError::BadShape(format!(
            "star ansatz needs at least 2 qubits, got {n_qubits}"
        )));
    }
    if n_layers < 1 {
        return Err(AnsatzError::BadShape("need at least 1 layer".into()));
    }
    let mut gates = Vec::new();
    let mut slot = 0;
    for _ in 0..n_layers {
        for leaf in 1..n_qubits {
            gates.push(GateOp::RotY { qubit: 0, slot });
            slot += 1;
            gates.push(GateOp::RotY { qubit: leaf, slot });
            slot += 1;
            gates.push(GateOp::Cz { a: 0, b: leaf });
        }
    }
    Ok(Ansatz {
        kind: AnsatzKind::Star,
        n_qubits,
        n_layers,
        gates,
        n_params: slot,
    })
}

/// Ring graph circuit: each layer walks the cycle edges (k, k+1 mod N),
/// rotating both endpoints before the CZ.
pub fn build_ring(n_qubits: usize, n_layers: usize) -> Result<Ansatz, AnsatzError> {
    if n_qubits < 3 {
        return Err(AnsatzError::BadShape(format!(
            "ring ansatz needs at least 3 qubits, got {n_qubits}"
        )));
    }
    if n_layers < 1 {
        return Err(AnsatzError::BadShape("need at least 1 layer".into()));
    }
    let mut gates = Vec::new();
    let mut slot = 0;
    for _ in 0..n_layers {
        for k in 0..n_qubits {
            let next = (k + 1) % n_qubits;
            gates.push(GateOp::RotY { qubit: k, slot });
            slot += 1;
            gates.push(GateOp::RotY { qubit: next, slot });
            slot += 1;
            gates.push(GateOp::Cz { a: k, b: next });
        }
    }
    Ok(Ansatz {
        kind: AnsatzKind::Ring,
        n_qubits,
        n_layers,
        gates,
        n_params: slot,
    })
}

/// Squeezing circuit: per layer, RotX on every qubit, a global XX
/// Mølmer-Sørensen gate, RotY on every qubit, then a global ZZ gate.
/// Each MS gate carries one trainable angle per qubit pair.
pub fn build_squeezing(n_qubits: usize, n_layers: usize) -> Result<Ansatz, AnsatzError> {
    if n_qubits < 2 {
        return Err(AnsatzError::BadShape(format!(
            "squeezing ansatz needs at least 2 qubits, got {n_qubits}"
        )));
    }
    if n_layers < 1 {
        return Err(AnsatzError::BadShape("need at least 1 layer".into()));
    }
    let pairs = all_pairs(n_qubits);
    let mut gates = Vec::new();
    let mut slot = 0;
    for _ in 0..n_layers {
        for q in 0..n_qubits {
            gates.push(GateOp::RotX { qubit: q, slot });
            slot += 1;
        }
        gates.push(GateOp::MsXx {
            pairs: pairs.clone(),
            first_slot: slot,
        });
        slot += pairs.len();
        for q in 0..n_qubits {
            gates.push(GateOp::RotY { qubit: q, slot });
            slot += 1;
        }
        gates.push(GateOp::MsZz {
            pairs: pairs.clone(),
            first_slot: slot,
        });
        slot += pairs.len();
    }
    Ok(Ansatz {
        kind: AnsatzKind::Squeezing,
        n_qubits,
        n_layers,
        gates,
        n_params: slot,
    })
}

/// Degenerate one-qubit circuit (RotX then RotY per layer), used where a
/// single-qubit reference probe is needed; the pair gates of the squeezing
/// layout vanish at N = 1.
pub fn build_single_qubit(n_layers: usize) -> Result<Ansatz, AnsatzError> {
    if n_layers < 1 {
        return Err(AnsatzError::BadShape("need at least 1 layer".into()));
    }
    let mut gates = Vec::new();
    let mut slot = 0;
    for _ in 0..n_layers {
        gates.push(GateOp::RotX { qubit: 0, slot });
        slot += 1;
        gates.push(GateOp::RotY { qubit: 0, slot });
        slot += 1;
    }
    Ok(Ansatz {
        kind: AnsatzKind::Squeezing,
        n_qubits: 1,
        n_layers,
        gates,
        n_params: slot,
    })
}

pub fn build(kind: AnsatzKind, n_qubits: usize, n_layers: usize) -> Result<Ansatz, AnsatzError> {
    match kind {
        AnsatzKind::Star => build_star(n_qubits, n_layers),
        AnsatzKind::Ring => build_ring(n_qubits, n_layers),
        AnsatzKind::Squeezing => {
            if n_qubits == 1 {
                build_single_qubit(n_layers)
            } else {
                build_squeezing(n_qubits, n_layers)
            }
        }
    }
}

/// R_y(theta) = exp(-i theta sigma_y / 2).
pub fn rot_y(theta: f64) -> CMat {
    let (s, cs) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[cr(cs), cr(-s), cr(s), cr(cs)])
}

/// R_x(theta) = exp(-i theta sigma_x / 2).
pub fn rot_x(theta: f64) -> CMat {
    let (s, cs) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[cr(cs), c(0.0, -s), c(0.0, -s), cr(cs)])
}

fn cz_gate() -> CMat {
    let mut m = identity(4);
    m[(3, 3)] = cr(-1.0);
    m
}

/// exp(-i (chi/2) P) for an involutory two-qubit Pauli product P.
fn ms_pair_factor(p: &CMat, chi: f64) -> CMat {
    let (s, cs) = (chi / 2.0).sin_cos();
    identity(4).scale(cs) + p * c(0.0, -s)
}

/// Full 2^N x 2^N matrix of one gate given the circuit parameter vector.
fn gate_matrix(gate: &GateOp, params: &[f64], n_qubits: usize) -> CMat {
    match gate {
        GateOp::RotY { qubit, slot } => embed_one(&rot_y(params[*slot]), *qubit, n_qubits),
        GateOp::RotX { qubit, slot } => embed_one(&rot_x(params[*slot]), *qubit, n_qubits),
        GateOp::Cz { a, b } => embed_pair(&cz_gate(), *a, *b, n_qubits),
        GateOp::MsXx { pairs, first_slot } => {
            let xx = kron(&pauli_x(), &pauli_x());
            let mut u = identity(1 << n_qubits);
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let factor = ms_pair_factor(&xx, params[first_slot + i]);
                u = embed_pair(&factor, a, b, n_qubits) * u;
            }
            u
        }
        GateOp::MsZz { pairs, first_slot } => {
            let zz = kron(&pauli_z(), &pauli_z());
            let mut u = identity(1 << n_qubits);
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let factor = ms_pair_factor(&zz, params[first_slot + i]);
                u = embed_pair(&factor, a, b, n_qubits) * u;
            }
            u
        }
    }
}

/// Product of the circuit's gate matrices in sequence order.
pub fn unitary_of(ansatz: &Ansatz, params: &[f64]) -> Result<CMat, AnsatzError> {
    if params.len() != ansatz.n_params {
        return Err(AnsatzError::BadShape(format!(
            "{} ansatz expects {} parameters, got {}",
            ansatz.kind.name(),
            ansatz.n_params,
            params.len()
        )));
    }
    let mut u = identity(ansatz.dim());
    for gate in &ansatz.gates {
        u = gate_matrix(gate, params, ansatz.n_qubits) * u;
    }
    Ok(u)
}

/// U(theta)|0...0>, as a state vector.
pub fn prepare_vector(ansatz: &Ansatz, theta: &[f64]) -> Result<CVec, AnsatzError> {
    let u = unitary_of(ansatz, theta)?;
    Ok(CVec::from(u.column(0)))
}

/// The pure probe state U(theta)|0...0><0...0|U(theta)^dag.
pub fn prepare_state(ansatz: &Ansatz, theta: &[f64]) -> Result<CMat, AnsatzError> {
    let psi = prepare_vector(ansatz, theta)?;
    Ok(outer(&psi))
}

/// Variational POVM: E_m(mu) = U(mu)^dag |m><m| U(mu) for every computational
/// basis label m. Each element is a rank-1 projector and the set resolves the
/// identity.
pub fn povm_from(ansatz: &Ansatz, mu: &[f64]) -> Result<Vec<CMat>, AnsatzError> {
    let u_dag = unitary_of(ansatz, mu)?.adjoint();
    Ok((0..ansatz.dim())
        .map(|m| {
            let v = CVec::from(u_dag.column(m));
            outer(&v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_state, eig_hermitian, max_abs_diff, trace, unitary_from_hamiltonian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_params(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect()
    }

    #[test]
    fn param_counts_match_formulas() {
        for n in 2..=6 {
            for layers in 1..=4 {
                let star = build_star(n, layers).unwrap();
                assert_eq!(star.n_params, layers * (2 * n - 2));
                if n >= 3 {
                    let ring = build_ring(n, layers).unwrap();
                    assert_eq!(ring.n_params, layers * 2 * n);
                }
                let sq = build_squeezing(n, layers).unwrap();
                assert_eq!(sq.n_params, layers * n * (n + 1));
            }
        }
    }

    #[test]
    fn spec_level_param_examples() {
        assert_eq!(build_star(3, 1).unwrap().n_params, 4);
        assert_eq!(build_ring(3, 1).unwrap().n_params, 6);
        assert_eq!(build_squeezing(3, 1).unwrap().n_params, 12);
        assert_eq!(build_squeezing(2, 1).unwrap().n_params, 6);
        let star2 = build_star(3, 2).unwrap();
        assert_eq!(star2.n_params, 8);
        let n_cz = star2
            .gates
            .iter()
            .filter(|g| matches!(g, GateOp::Cz { .. }))
            .count();
        assert_eq!(n_cz, 4);
        let ring4 = build_ring(4, 1).unwrap();
        assert_eq!(ring4.n_params, 8);
        assert_eq!(
            ring4
                .gates
                .iter()
                .filter(|g| matches!(g, GateOp::Cz { .. }))
                .count(),
            4
        );
    }

    #[test]
    fn too_few_qubits_rejected() {
        assert!(build_star(1, 1).is_err());
        assert!(build_ring(2, 1).is_err());
        assert!(build_squeezing(1, 1).is_err());
    }

    #[test]
    fn zero_params_fixes_ground_state() {
        for ansatz in [
            build_star(3, 1).unwrap(),
            build_ring(3, 1).unwrap(),
            build_squeezing(3, 1).unwrap(),
        ] {
            // CZ acts trivially on |0...0>, so the zero-angle circuit
            // fixes the all-zeros state
            let psi = prepare_vector(&ansatz, &vec![0.0; ansatz.n_params]).unwrap();
            assert!((psi[0] - cr(1.0)).norm() < 1e-14);
            if ansatz.kind == AnsatzKind::Squeezing {
                let u = unitary_of(&ansatz, &vec![0.0; ansatz.n_params]).unwrap();
                assert!(max_abs_diff(&u, &identity(8)) < 1e-14);
            }
        }
    }

    #[test]
    fn star_two_qubit_hand_example() {
        // theta = (pi, 0): RotY(pi) on the center maps |00> -> |10>,
        // then CZ(0,1) leaves it unchanged.
        let ansatz = build_star(2, 1).unwrap();
        let psi = prepare_vector(&ansatz, &[std::f64::consts::PI, 0.0]).unwrap();
        assert!((psi[2] - cr(1.0)).norm() < 1e-14);
        for idx in [0usize, 1, 3] {
            assert!(psi[idx].norm() < 1e-14);
        }
    }

    #[test]
    fn unitary_param_length_checked() {
        let ansatz = build_star(3, 1).unwrap();
        assert!(matches!(
            unitary_of(&ansatz, &[0.0; 3]),
            Err(AnsatzError::BadShape(_))
        ));
    }

    #[test]
    fn circuits_are_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for kind in [AnsatzKind::Star, AnsatzKind::Ring, AnsatzKind::Squeezing] {
            let ansatz = build(kind, 3, 2).unwrap();
            for _ in 0..100 {
                let params = random_params(&mut rng, ansatz.n_params);
                let u = unitary_of(&ansatz, &params).unwrap();
                assert!(max_abs_diff(&(&u * u.adjoint()), &identity(8)) < 1e-10);
            }
        }
    }

    #[test]
    fn ms_gate_matches_hamiltonian_exponential() {
        // product of commuting pair factors equals exp of the summed generator
        let ansatz = build_squeezing(3, 1).unwrap();
        let params: Vec<f64> = vec![0.0, 0.0, 0.0, 0.4, -0.9, 1.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let u = unitary_of(&ansatz, &params).unwrap();
        let xx = kron(&pauli_x(), &pauli_x());
        let mut h = CMat::zeros(8, 8);
        for (chi, (a, b)) in [(0.4, (0, 1)), (-0.9, (0, 2)), (1.3, (1, 2))] {
            h += embed_pair(&xx, a, b, 3).scale(chi / 2.0);
        }
        let expect = unitary_from_hamiltonian(&h, 1.0).unwrap();
        assert!(max_abs_diff(&u, &expect) < 1e-12);
    }

    #[test]
    fn prepared_state_is_pure() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for kind in [AnsatzKind::Star, AnsatzKind::Ring, AnsatzKind::Squeezing] {
            let ansatz = build(kind, 3, 2).unwrap();
            let theta = random_params(&mut rng, ansatz.n_params);
            let rho = prepare_state(&ansatz, &theta).unwrap();
            let purity = trace(&(&rho * &rho)).re;
            assert!((purity - 1.0).abs() < 1e-12);
            assert!((trace(&rho).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_theta_prepares_ground_state() {
        let ansatz = build_star(3, 2).unwrap();
        let rho = prepare_state(&ansatz, &vec![0.0; ansatz.n_params]).unwrap();
        assert!(max_abs_diff(&rho, &outer(&basis_state(3, 0))) < 1e-14);
    }

    #[test]
    fn povm_zero_mu_is_computational_basis() {
        let ansatz = build_star(2, 1).unwrap();
        let povm = povm_from(&ansatz, &[0.0; 2]).unwrap();
        assert_eq!(povm.len(), 4);
        for (m, e) in povm.iter().enumerate() {
            assert!(max_abs_diff(e, &outer(&basis_state(2, m))) < 1e-14);
        }
    }

    #[test]
    fn povm_resolves_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let ansatz = build_ring(3, 1).unwrap();
        for _ in 0..100 {
            let mu = random_params(&mut rng, ansatz.n_params);
            let povm = povm_from(&ansatz, &mu).unwrap();
            let total = povm.iter().fold(CMat::zeros(8, 8), |acc, e| acc + e);
            assert!(max_abs_diff(&total, &identity(8)) < 1e-12);
        }
    }

    #[test]
    fn povm_elements_are_projectors() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let ansatz = build_squeezing(2, 1).unwrap();
        let mu = random_params(&mut rng, ansatz.n_params);
        for e in povm_from(&ansatz, &mu).unwrap() {
            let (w, _) = eig_hermitian(&e).unwrap();
            for &x in w.iter() {
                assert!(x.abs() < 1e-10 || (x - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gate_order_is_deterministic() {
        let ansatz_a = build_star(3, 2).unwrap();
        let ansatz_b = build_star(3, 2).unwrap();
        let params: Vec<f64> = (0..ansatz_a.n_params).map(|i| 0.1 * i as f64).collect();
        let ua = unitary_of(&ansatz_a, &params).unwrap();
        let ub = unitary_of(&ansatz_b, &params).unwrap();
        assert_eq!(ua, ub);
    }

    #[test]
    fn single_qubit_probe_layout() {
        let a = build_single_qubit(2).unwrap();
        assert_eq!(a.n_params, 4);
        assert_eq!(a.n_qubits, 1);
        let u = unitary_of(&a, &[0.0; 4]).unwrap();
        assert!(max_abs_diff(&u, &identity(2)) < 1e-14);
    }
}
