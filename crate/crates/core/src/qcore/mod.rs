//! Dense finite-dimensional quantum linear algebra.

pub mod eigen;
pub mod matrix;
pub mod observable;
pub mod ops;
pub mod state;

pub use eigen::{eig_hermitian, Eigen, SpectrumSummary};
pub use matrix::{inner, norm_sqr, sigma_x, sigma_y, sigma_z, CMatrix, I, ONE, ZERO};
pub use observable::HermitianObservable;
pub use ops::{
    apply_to_factor, complete_basis, embed, evolve_exp, evolve_series, expectation,
    orthonormality_defect, postselect, tensor, unitary_exp, variance, Postselection, Tensor,
};
pub use state::QuantumState;
