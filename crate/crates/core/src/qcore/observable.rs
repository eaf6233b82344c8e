use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use super::eigen::{eig_hermitian, Eigen, SpectrumSummary};
use super::matrix::{self, CMatrix};
use crate::error::{Error, Result};

/// Hermitian operator with a lazily computed, cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianObservable {
    matrix: CMatrix,
    dims: Vec<usize>,
    eigen: OnceLock<Result<Eigen>>,
}

impl PartialEq for HermitianObservable {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix && self.dims == other.dims
    }
}

impl HermitianObservable {
    /// Validates Hermiticity within `1e-12` (relative to the largest entry)
    /// and stores the exactly symmetrized matrix.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let d = matrix.dim();
        Self::with_dims(matrix, vec![d])
    }

    pub fn with_dims(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        if dims.iter().product::<usize>() != matrix.dim() || dims.contains(&0) {
            return Err(Error::InvalidLayout(format!(
                "factor dimensions {dims:?} do not match operator dimension {}",
                matrix.dim()
            )));
        }
        let asymmetry = matrix.hermitian_defect();
        if asymmetry > 1e-12 * matrix.max_abs().max(1.0) {
            return Err(Error::NonHermitian { asymmetry });
        }
        let matrix = CMatrix::from_fn(matrix.dim(), |i, j| {
            (matrix[(i, j)] + matrix[(j, i)].conj()) * 0.5
        });
        Ok(Self {
            matrix,
            dims,
            eigen: OnceLock::new(),
        })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(CMatrix::from_real_rows(rows)?)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::new(CMatrix::diagonal(values)).unwrap()
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CMatrix::identity(dim)).unwrap()
    }

    pub fn sigma_x() -> Self {
        Self::new(matrix::sigma_x()).unwrap()
    }

    pub fn sigma_y() -> Self {
        Self::new(matrix::sigma_y()).unwrap()
    }

    pub fn sigma_z() -> Self {
        Self::new(matrix::sigma_z()).unwrap()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn eigen(&self) -> Result<&Eigen> {
        self.eigen
            .get_or_init(|| eig_hermitian(&self.matrix))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn spectrum(&self) -> Result<SpectrumSummary> {
        SpectrumSummary::from_eigen(self.eigen()?)
    }

    pub fn squared(&self) -> Self {
        Self {
            matrix: &self.matrix * &self.matrix,
            dims: self.dims.clone(),
            eigen: OnceLock::new(),
        }
    }

    /// `self − c·I`
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.dim() {
            m[(i, i)] -= c;
        }
        Self {
            matrix: m,
            dims: self.dims.clone(),
            eigen: OnceLock::new(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(C64::new(s, 0.0)),
            dims: self.dims.clone(),
            eigen: OnceLock::new(),
        }
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            dims: self.dims.clone(),
            eigen: OnceLock::new(),
        })
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            matrix: self.matrix.kron(&other.matrix),
            dims,
            eigen: OnceLock::new(),
        }
    }
}
