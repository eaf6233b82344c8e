//! Statevector simulation of the qubit protocol: GHZ preparation, the
//! system-pointer interaction, and the entangled postselection circuit.

mod circuit;
mod gate;
mod protocol;

pub use circuit::{Circuit, MAX_QUBITS};
pub use gate::{parse_gate, Gate, Mat2};
pub use protocol::{
    analytic_branch_pointers, branch_etas, branch_qfi, branch_qfi_closed_form, interaction_circuit,
    linearized_branch_pointers, linearized_branch_probability, postselect_circuit,
    postselection_angles, postselection_target_states, prepare_ghz_circuit, protocol_circuit,
    run_protocol, BranchLabel, BranchQfi, BranchResult, PostselectionCircuitAngles, MAX_COUPLING,
    MAX_SYSTEM_QUBITS, SINGULAR_TOLERANCE,
};
