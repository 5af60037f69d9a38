//! Concentratable entanglement of pure probe states: the direct definition as
//! one minus the mean subset purity, closed-form reference values for GHZ and
//! AME states, and an independent SWAP-test circuit simulation used to verify
//! the direct route.

use crate::ansatz::{self, Ansatz, AnsatzError};
use crate::linalg::{outer, partial_trace, trace, CVec, LinalgError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EntanglementError {
    #[error("{0} qubits exceeds the cap of {1} for this computation")]
    TooLarge(usize, usize),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Concentratable entanglement with the per-subset purities that produced it.
/// Subsets are bitmasks over qubits (bit k set means qubit k is kept), in
/// order 0..2^N-1; the empty subset contributes purity 1.
#[derive(Debug, Clone)]
pub struct CeReport {
    pub xi: f64,
    pub subset_purities: Vec<(usize, f64)>,
}

const CE_MAX_QUBITS: usize = 6;
const SWAP_TEST_MAX_QUBITS: usize = 4;

/// xi(psi) = 1 - 2^{-N} sum over all qubit subsets of Tr[rho_subset^2].
pub fn concentratable_entanglement(
    psi: &CVec,
    n_qubits: usize,
) -> Result<CeReport, EntanglementError> {
    if n_qubits > CE_MAX_QUBITS {
        return Err(EntanglementError::TooLarge(n_qubits, CE_MAX_QUBITS));
    }
    assert_eq!(psi.len(), 1 << n_qubits, "state dim must be 2^n_qubits");
    let rho = outer(psi);
    let n_subsets = 1usize << n_qubits;
    let mut purities = Vec::with_capacity(n_subsets);
    let mut total = 0.0;
    for mask in 0..n_subsets {
        let purity = if mask == 0 {
            1.0
        } else {
            let keep: Vec<usize> = (0..n_qubits).filter(|q| (mask >> q) & 1 == 1).collect();
            let reduced = partial_trace(&rho, n_qubits, &keep)?;
            trace(&(&reduced * &reduced)).re
        };
        purities.push((mask, purity));
        total += purity;
    }
    Ok(CeReport {
        xi: 1.0 - total / n_subsets as f64,
        subset_purities: purities,
    })
}

/// Closed form for the GHZ state: 1/2 - 1/2^N.
pub fn ce_ghz(n_qubits: usize) -> f64 {
    0.5 - 1.0 / (1u64 << n_qubits) as f64
}

/// Closed form for an absolutely maximally entangled state:
/// 1 - 2^{-N} sum_j C(N,j) / 2^{min(j, N-j)}.
pub fn ce_ame(n_qubits: usize) -> f64 {
    let mut sum = 0.0;
    for j in 0..=n_qubits {
        sum += binomial(n_qubits, j) / (1u64 << j.min(n_qubits - j)) as f64;
    }
    1.0 - sum / (1u64 << n_qubits) as f64
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// SWAP-test estimate of the concentratable entanglement: prepares
/// |0>^N (x) |psi> (x) |psi|, Hadamards the ancillas, applies a
/// controlled-SWAP from ancilla k onto the k-th qubit pair, Hadamards again,
/// and returns 1 - p(all ancillas 0). Simulates 3N qubits.
pub fn swap_test_ce(psi: &CVec, n_qubits: usize) -> Result<f64, EntanglementError> {
    if n_qubits > SWAP_TEST_MAX_QUBITS {
        return Err(EntanglementError::TooLarge(n_qubits, SWAP_TEST_MAX_QUBITS));
    }
    assert_eq!(psi.len(), 1 << n_qubits, "state dim must be 2^n_qubits");
    let total_qubits = 3 * n_qubits;
    let dim = 1usize << total_qubits;
    let copy_dim = 1usize << n_qubits;
    // qubit q occupies bit position (total_qubits - 1 - q); ancillas are
    // qubits 0..N, the two state copies follow
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim];
    for i1 in 0..copy_dim {
        for i2 in 0..copy_dim {
            amps[(i1 << n_qubits) | i2] = psi[i1] * psi[i2];
        }
    }

    let hadamard = |amps: &mut Vec<num_complex::Complex64>, qubit: usize| {
        let bit = 1usize << (total_qubits - 1 - qubit);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        for idx in 0..dim {
            if idx & bit == 0 {
                let a = amps[idx];
                let b = amps[idx | bit];
                amps[idx] = (a + b) * inv_sqrt2;
                amps[idx | bit] = (a - b) * inv_sqrt2;
            }
        }
    };

    for k in 0..n_qubits {
        hadamard(&mut amps, k);
    }
    // controlled-SWAP: ancilla k controls qubits N+k and 2N+k
    for k in 0..n_qubits {
        let ctrl = 1usize << (total_qubits - 1 - k);
        let bit_a = 1usize << (total_qubits - 1 - (n_qubits + k));
        let bit_b = 1usize << (total_qubits - 1 - (2 * n_qubits + k));
        for idx in 0..dim {
            if idx & ctrl != 0 && idx & bit_a != 0 && idx & bit_b == 0 {
                let other = (idx & !bit_a) | bit_b;
                amps.swap(idx, other);
            }
        }
    }
    for k in 0..n_qubits {
        hadamard(&mut amps, k);
    }

    // p(all ancillas 0): sum over indices whose top N bits vanish
    let rest = 1usize << (2 * n_qubits);
    let p0: f64 = (0..rest).map(|i| amps[i].norm_sqr()).sum();
    Ok(1.0 - p0)
}

/// Concentratable entanglement of the pure pre-noise probe U(theta)|0...0>.
pub fn ce_of_trained_probe(ansatz: &Ansatz, theta: &[f64]) -> Result<f64, EntanglementError> {
    let psi = ansatz::prepare_vector(ansatz, theta)?;
    Ok(concentratable_entanglement(&psi, ansatz.n_qubits)?.xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::build_star;
    use crate::linalg::{basis_state, c, cr, ghz_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_state(rng: &mut impl Rng, dim: usize) -> CVec {
        let mut v = CVec::from_fn(dim, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let norm = v.norm();
        v /= cr(norm);
        v
    }

    #[test]
    fn product_state_has_zero_ce() {
        for n in 1..=4 {
            let report = concentratable_entanglement(&basis_state(n, 0), n).unwrap();
            assert!(report.xi.abs() < 1e-14);
            assert!(report.subset_purities.iter().all(|&(_, p)| (p - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn ghz_ce_matches_closed_form() {
        for n in 2..=5 {
            let report = concentratable_entanglement(&ghz_state(n), n).unwrap();
            assert!(
                (report.xi - ce_ghz(n)).abs() < 1e-12,
                "N = {n}: xi = {}, formula = {}",
                report.xi,
                ce_ghz(n)
            );
        }
    }

    #[test]
    fn bell_state_hand_enumeration() {
        // four subsets: {} -> 1, {0} -> 1/2, {1} -> 1/2, {0,1} -> 1
        let report = concentratable_entanglement(&ghz_state(2), 2).unwrap();
        assert!((report.xi - 0.25).abs() < 1e-14);
        let purities: Vec<f64> = report.subset_purities.iter().map(|&(_, p)| p).collect();
        assert!((purities[0] - 1.0).abs() < 1e-14);
        assert!((purities[1] - 0.5).abs() < 1e-14);
        assert!((purities[2] - 0.5).abs() < 1e-14);
        assert!((purities[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ghz4_reference_value() {
        assert!((ce_ghz(4) - 0.4375).abs() < 1e-15);
        let report = concentratable_entanglement(&ghz_state(4), 4).unwrap();
        assert!((report.xi - 0.4375).abs() < 1e-12);
    }

    #[test]
    fn ame_reference_values() {
        // j-sum for N = 4 is 1 + 2 + 1.5 + 2 + 1 = 7.5
        assert!((ce_ame(4) - 0.53125).abs() < 1e-15);
        assert!((ce_ame(2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ghz_never_exceeds_ame() {
        // at N = 3 the GHZ state is itself absolutely maximally entangled,
        // so the formulas coincide; strictly below from N = 4 on
        assert!((ce_ghz(3) - ce_ame(3)).abs() < 1e-15);
        for n in 4..=6 {
            assert!(ce_ghz(n) < ce_ame(n), "N = {n}");
        }
    }

    #[test]
    fn ce_cap_enforced() {
        let psi = basis_state(7, 0);
        assert!(matches!(
            concentratable_entanglement(&psi, 7),
            Err(EntanglementError::TooLarge(7, 6))
        ));
        let psi5 = basis_state(5, 0);
        assert!(matches!(
            swap_test_ce(&psi5, 5),
            Err(EntanglementError::TooLarge(5, 4))
        ));
    }

    #[test]
    fn swap_test_on_product_state() {
        assert!(swap_test_ce(&basis_state(2, 0), 2).unwrap().abs() < 1e-14);
    }

    #[test]
    fn swap_test_on_ghz3() {
        let xi = swap_test_ce(&ghz_state(3), 3).unwrap();
        assert!((xi - 0.375).abs() < 1e-12);
    }

    #[test]
    fn swap_test_matches_direct_ce() {
        let mut rng = ChaCha12Rng::seed_from_u64(107);
        for n in [2usize, 3] {
            for _ in 0..50 {
                let psi = random_state(&mut rng, 1 << n);
                let direct = concentratable_entanglement(&psi, n).unwrap().xi;
                let swap = swap_test_ce(&psi, n).unwrap();
                assert!(
                    (direct - swap).abs() < 1e-10,
                    "N = {n}: direct = {direct}, swap = {swap}"
                );
            }
        }
    }

    #[test]
    fn ce_invariant_under_local_unitaries() {
        // marginal purities are preserved by single-qubit rotations
        use crate::ansatz::{rot_x, rot_y};
        use crate::linalg::embed_one;
        let mut rng = ChaCha12Rng::seed_from_u64(109);
        for _ in 0..10 {
            let psi = random_state(&mut rng, 8);
            let base = concentratable_entanglement(&psi, 3).unwrap().xi;
            let mut rotated = psi.clone();
            for q in 0..3 {
                let u = embed_one(&rot_y(rng.gen::<f64>() * 6.28), q, 3)
                    * embed_one(&rot_x(rng.gen::<f64>() * 6.28), q, 3);
                rotated = u * rotated;
            }
            let after = concentratable_entanglement(&rotated, 3).unwrap().xi;
            assert!((base - after).abs() < 1e-10);
        }
    }

    #[test]
    fn ce_invariant_under_qubit_relabeling_for_ghz() {
        // GHZ is permutation symmetric; every subset of equal size has the
        // same purity, so xi is unchanged by relabeling
        let report = concentratable_entanglement(&ghz_state(3), 3).unwrap();
        for &(mask, p) in &report.subset_purities {
            let size = (mask as u32).count_ones();
            let expect = if size == 0 || size == 3 { 1.0 } else { 0.5 };
            assert!((p - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn trained_probe_ce_zero_at_zero_angles() {
        let ansatz = build_star(3, 2).unwrap();
        let xi = ce_of_trained_probe(&ansatz, &vec![0.0; ansatz.n_params]).unwrap();
        assert!(xi.abs() < 1e-14);
    }

    #[test]
    fn entangling_angles_give_positive_ce() {
        let ansatz = build_star(2, 1).unwrap();
        let xi = ce_of_trained_probe(
            &ansatz,
            &[std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
        )
        .unwrap();
        assert!(xi > 0.0);
    }
}
