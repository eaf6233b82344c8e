pub mod entangle;
pub mod error;
pub mod fisher;
pub mod qcore;
pub mod qubitsim;
pub mod readout;
pub mod weakvalue;

pub use error::{Error, Result};
pub use fisher::{FisherReport, PovmElement, PovmSet};
pub use num_complex::Complex64 as C64;
pub use qcore::{CMatrix, HermitianObservable, QuantumState, SpectrumSummary};
pub use qubitsim::{BranchResult, Circuit, Gate, PostselectionCircuitAngles};
pub use readout::{CorrectionReport, MajorityVoteRule, ReadoutErrorModel};
pub use weakvalue::{WeakMeasurementSetup, WeakValue};
