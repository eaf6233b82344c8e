use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;

use super::circuit::Circuit;
use super::gate::Gate;
use crate::error::{Error, Result};
use crate::qcore::{postselect, QuantumState, ONE, ZERO};
use crate::weakvalue::LINEAR_REGIME;

/// Largest number of system qubits; the pointer takes one more.
pub const MAX_SYSTEM_QUBITS: usize = 15;
/// Interaction strengths at or above this are rejected.
pub const MAX_COUPLING: f64 = 0.2;
/// Distance from `±n` at which the postselection angles are undefined.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "need at least one system qubit".into(),
        ));
    }
    if n > MAX_SYSTEM_QUBITS {
        return Err(Error::DimensionTooLarge {
            dim: n,
            limit: MAX_SYSTEM_QUBITS,
        });
    }
    Ok(())
}

fn check_phi(phi: f64) -> Result<()> {
    if !phi.is_finite() || phi.abs() >= MAX_COUPLING {
        return Err(Error::InvalidParameter(format!(
            "coupling {phi} outside (−{MAX_COUPLING}, {MAX_COUPLING})"
        )));
    }
    Ok(())
}

fn check_pointer(d: &QuantumState) -> Result<()> {
    if d.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: d.dim(),
        });
    }
    if !d.is_normalized(1e-10) {
        return Err(Error::NotNormalized {
            norm_sqr: d.norm_sqr(),
        });
    }
    Ok(())
}

/// Which computational readout a branch corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchLabel {
    AllZeros,
    AllOnes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchResult {
    pub label: BranchLabel,
    /// Normalized collapsed pointer. For a zero-probability branch this is
    /// the initial pointer.
    pub pointer_state: QuantumState,
    pub probability: f64,
    pub eta0: f64,
    pub eta1: f64,
}

/// `H` on qubit 0 then a CNOT chain, applied to `|0…0⟩`.
pub fn prepare_ghz_circuit(n: usize) -> Result<(Circuit, QuantumState)> {
    check_n(n)?;
    let mut c = Circuit::new(n)?;
    c.push(Gate::H { target: 0 })?;
    for k in 1..n {
        c.push(Gate::Cnot {
            control: k - 1,
            target: k,
        })?;
    }
    let state = c.apply(&QuantumState::basis(vec![2; n], 0)?)?;
    Ok((c, state))
}

/// `exp(−iφ Σ_k σz⁽ᵏ⁾⊗σx)` on `n` system qubits plus the pointer (qubit `n`):
/// one `CRX(−4φ)` per system qubit, then `RX(2nφ)` on the pointer.
pub fn interaction_circuit(n: usize, phi: f64) -> Result<Circuit> {
    check_n(n)?;
    check_phi(phi)?;
    let mut c = Circuit::new(n + 1)?;
    for k in 0..n {
        c.push(Gate::Crx {
            control: k,
            target: n,
            angle: -4.0 * phi,
        })?;
    }
    c.push(Gate::Rx {
        target: n,
        angle: 2.0 * n as f64 * phi,
    })?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostselectionCircuitAngles {
    pub alpha: f64,
    pub beta: f64,
}

fn check_singular(n: usize, aw: C64) -> Result<()> {
    let nf = n as f64;
    if (aw - nf).norm() < SINGULAR_TOLERANCE || (aw + nf).norm() < SINGULAR_TOLERANCE {
        return Err(Error::SingularWeakValue {
            re: aw.re,
            im: aw.im,
        });
    }
    Ok(())
}

pub fn postselection_angles(n: usize, aw: C64) -> Result<PostselectionCircuitAngles> {
    check_n(n)?;
    check_singular(n, aw)?;
    let nf = n as f64;
    let plus = nf + aw.conj();
    let minus = nf - aw.conj();
    Ok(PostselectionCircuitAngles {
        alpha: -2.0 * (minus.norm() / plus.norm()).atan(),
        beta: -FRAC_PI_2 - (minus / plus).arg(),
    })
}

/// Normalized target `∝ (n+A*)|0ⁿ⟩ + (n−A*)|1ⁿ⟩` and its orthogonal partner
/// `∝ (n+A)|1ⁿ⟩ − (n−A)|0ⁿ⟩`.
pub fn postselection_target_states(n: usize, aw: C64) -> Result<(QuantumState, QuantumState)> {
    check_n(n)?;
    let nf = n as f64;
    let two_level = |a0: C64, a1: C64| -> Result<QuantumState> {
        let dim = 1usize << n;
        let mut amps = vec![ZERO; dim];
        amps[0] = a0;
        amps[dim - 1] = a1;
        QuantumState::new(amps, vec![2; n])?.normalized()
    };
    Ok((
        two_level(nf + aw.conj(), nf - aw.conj())?,
        two_level(-(nf - aw), nf + aw)?,
    ))
}

/// `V†` on the system register: CNOT fan-out, `RZ(π/2+β)`, `RY(α)`, fan-out.
/// Reading `0ⁿ` afterwards projects onto the target state, `1ⁿ` onto its
/// orthogonal partner.
pub fn postselect_circuit(n: usize, aw: C64) -> Result<Circuit> {
    let PostselectionCircuitAngles { alpha, beta } = postselection_angles(n, aw)?;
    let mut fan = Circuit::new(n)?;
    for k in 1..n {
        fan.push(Gate::Cnot {
            control: 0,
            target: k,
        })?;
    }
    let mut c = fan.clone();
    c.push(Gate::Rz {
        target: 0,
        angle: FRAC_PI_2 + beta,
    })?;
    c.push(Gate::Ry {
        target: 0,
        angle: alpha,
    })?;
    c.extend(&fan)?;
    Ok(c)
}

/// Unnormalized branch weights `(η₀, η₁)` given `⟨σx⟩` of the pointer.
pub fn branch_etas(n: usize, phi: f64, aw: C64, x_mean: f64) -> (f64, f64) {
    let nf = n as f64;
    let (s, c) = (nf * phi).sin_cos();
    let a2 = aw.norm_sqr();
    let cross = nf * aw.im * (2.0 * nf * phi).sin() * x_mean;
    (
        nf * nf * c * c + a2 * s * s + cross,
        a2 * c * c + nf * nf * s * s - cross,
    )
}

fn sigma_x_mean(d: &QuantumState) -> f64 {
    let a = d.amplitudes();
    2.0 * (a[0].conj() * a[1]).re
}

/// `u·D + v·σx D` on a single qubit.
fn pointer_combo(d: &QuantumState, u: C64, v: C64) -> Result<QuantumState> {
    let a = d.amplitudes();
    QuantumState::new(vec![u * a[0] + v * a[1], u * a[1] + v * a[0]], vec![2])
}

/// Closed-form collapsed pointers (unnormalized):
/// `(n cos nφ − iA sin nφ σx)D` and `(A* cos nφ + i n sin nφ σx)D`.
pub fn analytic_branch_pointers(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
) -> Result<(QuantumState, QuantumState)> {
    check_pointer(pointer_init)?;
    let nf = n as f64;
    let (s, c) = (nf * phi).sin_cos();
    let i = C64::new(0.0, 1.0);
    Ok((
        pointer_combo(pointer_init, C64::from(nf * c), -i * aw * s)?,
        pointer_combo(pointer_init, aw.conj() * c, i * nf * s)?,
    ))
}

/// First-order pointers: `(I − iAφσx)D` and `(I + i(n²φ/A*)σx)D`.
pub fn linearized_branch_pointers(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
) -> Result<(QuantumState, QuantumState)> {
    check_pointer(pointer_init)?;
    if aw.norm() < SINGULAR_TOLERANCE {
        return Err(Error::SingularWeakValue {
            re: aw.re,
            im: aw.im,
        });
    }
    let nf = n as f64;
    let i = C64::new(0.0, 1.0);
    Ok((
        pointer_combo(pointer_init, ONE, -i * aw * phi)?,
        pointer_combo(pointer_init, ONE, i * nf * nf * phi / aw.conj())?,
    ))
}

/// `n²/(|A|²+n²)`, the weak-regime all-zeros probability.
pub fn linearized_branch_probability(n: usize, aw: C64) -> f64 {
    let n2 = (n * n) as f64;
    n2 / (aw.norm_sqr() + n2)
}

/// GHZ preparation, interaction and `V†` on `n` system qubits plus the
/// pointer (qubit `n`).
pub fn protocol_circuit(n: usize, phi: f64, aw: C64) -> Result<Circuit> {
    check_n(n)?;
    check_phi(phi)?;
    let (ghz, _) = prepare_ghz_circuit(n)?;
    let mut circuit = Circuit::new(n + 1)?;
    circuit.extend(&ghz)?;
    circuit.extend(&interaction_circuit(n, phi)?)?;
    circuit.extend(&postselect_circuit(n, aw)?)?;
    Ok(circuit)
}

/// Full statevector run: GHZ preparation, interaction, `V†`, then projection
/// of the system register onto `0ⁿ` and `1ⁿ`.
pub fn run_protocol(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
) -> Result<(BranchResult, BranchResult)> {
    check_n(n)?;
    check_phi(phi)?;
    check_pointer(pointer_init)?;

    let circuit = protocol_circuit(n, phi, aw)?;
    let start = QuantumState::basis(vec![2; n], 0)?.tensor(pointer_init);
    let joint = circuit.apply(&start)?;

    let (eta0, eta1) = branch_etas(n, phi, aw, sigma_x_mean(pointer_init));
    let system: Vec<usize> = (0..n).collect();
    let branch = |label: BranchLabel, index: usize| -> Result<BranchResult> {
        let target = QuantumState::basis(vec![2; n], index)?;
        let ps = postselect(&joint, &target, &system)?;
        let pointer_state = if ps.zero_overlap {
            pointer_init.clone()
        } else {
            ps.normalized()?.with_canonical_phase()
        };
        Ok(BranchResult {
            label,
            pointer_state,
            probability: ps.probability,
            eta0,
            eta1,
        })
    };
    Ok((
        branch(BranchLabel::AllZeros, 0)?,
        branch(BranchLabel::AllOnes, (1 << n) - 1)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchQfi {
    /// Probability-weighted QFI of the exact all-zeros pointer.
    pub information: f64,
    /// `4n²|A|²(1 − |A|²φ²)/(n² + |A|²)`.
    pub closed_form: f64,
    /// Set when `n|φ|` or `|A|φ` leaves the weak regime.
    pub out_of_regime: bool,
}

pub fn branch_qfi_closed_form(n: usize, phi: f64, aw: C64) -> f64 {
    let n2 = (n * n) as f64;
    let a2 = aw.norm_sqr();
    4.0 * n2 * a2 * (1.0 - a2 * phi * phi) / (n2 + a2)
}

/// `p₀·QFI` of the all-zeros branch, from the exact collapsed pointer and its
/// analytic φ-derivative.
pub fn branch_qfi(n: usize, phi: f64, aw: C64, pointer_init: &QuantumState) -> Result<BranchQfi> {
    check_n(n)?;
    check_pointer(pointer_init)?;
    let nf = n as f64;
    let norm = 1.0 / (nf * nf + aw.norm_sqr()).sqrt();
    let (s, c) = (nf * phi).sin_cos();
    let i = C64::new(0.0, 1.0);
    let psi = pointer_combo(pointer_init, C64::from(nf * c * norm), -i * aw * s * norm)?;
    let dpsi = pointer_combo(
        pointer_init,
        C64::from(-nf * nf * s * norm),
        -i * aw * nf * c * norm,
    )?;
    let p = psi.norm_sqr();
    let information = if p < crate::qcore::ops::ZERO_OVERLAP {
        0.0
    } else {
        4.0 * (dpsi.norm_sqr() - psi.inner(&dpsi)?.norm_sqr() / p)
    };
    Ok(BranchQfi {
        information: information.max(0.0),
        closed_form: branch_qfi_closed_form(n, phi, aw),
        out_of_regime: (nf * phi).abs() > LINEAR_REGIME || (aw.norm() * phi).abs() > LINEAR_REGIME,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{finite_difference_derivative, quantum_fisher_pure};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ghz_small_cases() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (c1, s1) = prepare_ghz_circuit(1).unwrap();
        assert_eq!(c1.len(), 1);
        assert!((s1.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((s1.amplitudes()[1].re - h).abs() < 1e-15);
        let (c5, s5) = prepare_ghz_circuit(5).unwrap();
        assert_eq!(c5.gates().iter().filter(|g| g.name() == "CNOT").count(), 4);
        assert!((s5.amplitudes()[0].re - h).abs() < 1e-12);
        assert!((s5.amplitudes()[31].re - h).abs() < 1e-12);
        assert!(matches!(
            prepare_ghz_circuit(16),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn angles_examples() {
        let a = postselection_angles(2, c(20.0, 0.0)).unwrap();
        assert!((a.alpha + 2.0 * (18.0f64 / 22.0).atan()).abs() < 1e-14);
        assert!((a.alpha + 1.371459).abs() < 1e-6);
        let wrapped = (a.beta + FRAC_PI_2 + PI).rem_euclid(2.0 * PI);
        assert!(wrapped.min(2.0 * PI - wrapped) < 1e-12);
        let far = postselection_angles(2, c(1e9, 0.0)).unwrap();
        assert!((far.alpha + FRAC_PI_2).abs() < 1e-8);
        assert!(matches!(
            postselection_angles(2, c(2.0, 0.0)),
            Err(Error::SingularWeakValue { .. })
        ));
        assert!(postselection_angles(3, c(-3.0, 0.0)).is_err());
    }

    #[test]
    fn inverse_maps_targets_to_readouts() {
        for (n, aw) in [
            (1, c(5.0, 0.0)),
            (2, c(20.0, 0.0)),
            (4, c(20.0, 10.0)),
            (3, c(-7.0, 2.0)),
        ] {
            let v_dag = postselect_circuit(n, aw).unwrap();
            let (tf, tperp) = postselection_target_states(n, aw).unwrap();
            assert!(tf.inner(&tperp).unwrap().norm() < 1e-14);
            let zeros = QuantumState::basis(vec![2; n], 0).unwrap();
            let ones = QuantumState::basis(vec![2; n], (1 << n) - 1).unwrap();
            assert!((v_dag.apply(&tf).unwrap().fidelity(&zeros).unwrap() - 1.0).abs() < 1e-10);
            assert!((v_dag.apply(&tperp).unwrap().fidelity(&ones).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eta_example() {
        let (e0, e1) = branch_etas(2, 0.01, c(20.0, 0.0), 0.0);
        assert!((e0 - 4.1584).abs() < 1e-3, "{e0}");
        assert!((e1 - 399.84).abs() < 1e-2, "{e1}");
        let (b0, b1) = run_protocol(2, 0.01, c(20.0, 0.0), &QuantumState::zero()).unwrap();
        assert!(
            (b0.probability - 0.010293).abs() < 1e-6,
            "{}",
            b0.probability
        );
        assert!((b0.probability + b1.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_leaves_pointer() {
        let d = QuantumState::bloch(0.4, 1.1);
        let (b0, _) = run_protocol(3, 0.0, c(12.0, -4.0), &d).unwrap();
        assert!((b0.probability - 9.0 / (9.0 + 160.0)).abs() < 1e-13);
        assert!((b0.pointer_state.fidelity(&d).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn qfi_examples() {
        let d = QuantumState::zero();
        let q = branch_qfi(3, 1e-4, c(100.0, 0.0), &d).unwrap();
        assert!((q.information - 35.96).abs() < 0.01, "{}", q.information);
        assert!((q.information / q.closed_form - 1.0).abs() < 0.01);
        assert!(!q.out_of_regime);

        let far = branch_qfi(2, 1e-7, c(1e5, 0.0), &d).unwrap();
        assert!((far.information / 16.0 - 1.0).abs() < 1e-3);

        let phi = 1e-3;
        let eq = branch_qfi_closed_form(4, phi, c(4.0, 0.0));
        assert!((eq - 32.0 * (1.0 - 16.0 * phi * phi)).abs() < 1e-12);
    }

    #[test]
    fn qfi_matches_finite_difference_oracle() {
        // Normalized all-zeros pointer family; p₀·QFI of it is the oracle.
        let (n, aw) = (3, c(100.0, 0.0));
        let d = QuantumState::zero();
        let family = |phi: f64| -> Result<QuantumState> {
            let (d0, _) = analytic_branch_pointers(n, phi, aw, &d)?;
            d0.normalized()
        };
        let phi = 1e-4;
        let fd = finite_difference_derivative(family, phi).unwrap();
        let state = family(phi).unwrap();
        let qfi = quantum_fisher_pure(&state, &fd.derivative).unwrap();
        let (e0, e1) = branch_etas(n, phi, aw, 0.0);
        let oracle = qfi * e0 / (e0 + e1);
        let q = branch_qfi(n, phi, aw, &d).unwrap();
        assert!(
            (q.information / oracle - 1.0).abs() < 1e-5,
            "{} vs {oracle}",
            q.information
        );
    }

    #[test]
    fn linearization_error_is_quadratic() {
        let (n, aw) = (3, c(20.0, 5.0));
        let d = QuantumState::bloch(0.7, 0.2);
        let err = |phi: f64| {
            let (exact, _) = analytic_branch_pointers(n, phi, aw, &d).unwrap();
            let (lin, _) = linearized_branch_pointers(n, phi, aw, &d).unwrap();
            // Both sides share the `1/n` prefactor of the exact pointer.
            let e = exact.scaled(C64::from(1.0 / n as f64));
            e.amplitudes()
                .iter()
                .zip(lin.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        for phi in [2e-3, 1e-3, 5e-4] {
            let r = err(phi) / err(phi / 2.0);
            assert!((r / 4.0 - 1.0).abs() < 0.3, "phi={phi} ratio={r}");
        }
    }
}
