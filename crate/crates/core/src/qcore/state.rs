use num_complex::Complex64 as C64;

use super::matrix::{self, CMatrix, ONE, ZERO};
use crate::error::{Error, Result};

/// Pure state over a tensor product of factors.
///
/// Amplitudes are big-endian: the first factor in `dims` is the most
/// significant digit of the flat index.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
    dims: Vec<usize>,
}

impl QuantumState {
    pub fn new(amps: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidLayout(format!(
                "bad factor dimensions {dims:?}"
            )));
        }
        let total: usize = dims.iter().product();
        if total != amps.len() {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: amps.len(),
            });
        }
        Ok(Self { amps, dims })
    }

    /// Single-factor state.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let d = amps.len();
        Self::new(amps, vec![d])
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let total: usize = dims.iter().product();
        if index >= total {
            return Err(Error::InvalidLayout(format!(
                "basis index {index} out of range for dimension {total}"
            )));
        }
        let mut amps = vec![ZERO; total];
        amps[index] = ONE;
        Self::new(amps, dims)
    }

    pub fn zero() -> Self {
        Self::basis(vec![2], 0).unwrap()
    }

    pub fn one() -> Self {
        Self::basis(vec![2], 1).unwrap()
    }

    /// `(|0⟩ + |1⟩)/√2`
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real(&[h, h]).unwrap()
    }

    /// `(|0⟩ − |1⟩)/√2`
    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real(&[h, -h]).unwrap()
    }

    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`
    pub fn bloch(theta: f64, phi: f64) -> Self {
        Self::from_amplitudes(vec![
            C64::new((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        ])
        .unwrap()
    }

    /// `n`-fold tensor power.
    pub fn power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("tensor power needs n ≥ 1".into()));
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        Ok(out)
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        matrix::norm_sqr(&self.amps)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if n.is_nan() || n <= 1e-300 || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: n });
        }
        let s = 1.0 / n.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_dim(other.dim())?;
        Ok(matrix::inner(&self.amps, &other.amps))
    }

    /// `|⟨self|other⟩|` for normalized states; 1 means equal up to global phase.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { amps, dims }
    }

    pub fn apply(&self, op: &CMatrix) -> Result<Self> {
        Ok(Self {
            amps: op.mul_vec(&self.amps)?,
            dims: self.dims.clone(),
        })
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * s).collect(),
            dims: self.dims.clone(),
        }
    }

    /// Linear combination `a·self + b·other` (same layout).
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        self.check_same_dim(other.dim())?;
        Ok(Self {
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            dims: self.dims.clone(),
        })
    }

    /// Rotate the global phase so the first non-negligible amplitude is real
    /// and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        let scale = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if let Some(first) = self.amps.iter().find(|a| a.norm() > 1e-10 * scale) {
            let phase = first.conj() / first.norm();
            self.amps.iter_mut().for_each(|a| *a *= phase);
        }
        self
    }

    /// Reinterpret the flat amplitude vector with a different factorization.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(self.amps, dims)
    }

    pub(crate) fn check_same_dim(&self, found: usize) -> Result<()> {
        if self.dim() != found {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}
