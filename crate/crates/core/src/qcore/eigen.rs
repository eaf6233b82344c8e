use num_complex::Complex64 as C64;

use super::matrix::{self, CMatrix, ZERO};
use super::state::QuantumState;
use crate::error::{Error, Result};

/// Largest dimension accepted by [`eig_hermitian`].
pub const MAX_EIG_DIM: usize = 64;
/// Off-diagonal Frobenius tolerance, relative to `max(1, ‖A‖_F)`.
pub const JACOBI_TOL: f64 = 1e-14;
pub const MAX_SWEEPS: usize = 100;
/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Full eigendecomposition with eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `j` holds the eigenvector for `values[j]`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.vectors.column(j)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ f(λ)|v⟩⟨v|`
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.len();
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        CMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * weights[k] * v[(j, k)].conj())
                .sum()
        })
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|l| C64::new(l, 0.0))
    }

    /// Unit vector in the eigenspace of `value` (clustered within
    /// [`DEGENERACY_GAP`]), chosen deterministically: the normalized
    /// projection of the lowest-index basis vector with non-negligible
    /// weight. The flag reports whether the eigenspace was degenerate.
    pub fn eigenspace_representative(&self, value: f64) -> (Vec<C64>, bool) {
        let cols: Vec<usize> = (0..self.len())
            .filter(|&j| (self.values[j] - value).abs() < DEGENERACY_GAP)
            .collect();
        if cols.len() == 1 {
            return (self.vector(cols[0]), false);
        }
        let n = self.len();
        for e in 0..n {
            let mut proj = vec![ZERO; n];
            for &j in &cols {
                let coeff = self.vectors[(e, j)].conj();
                for (i, p) in proj.iter_mut().enumerate() {
                    *p += self.vectors[(i, j)] * coeff;
                }
            }
            let w = matrix::norm_sqr(&proj);
            if w > 1e-8 {
                let s = 1.0 / w.sqrt();
                proj.iter_mut().for_each(|p| *p *= s);
                return (proj, true);
            }
        }
        (self.vector(cols[0]), true)
    }
}

/// Extreme eigenvalues and representative eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub a_max: f64,
    pub a_min: f64,
    pub v_max: QuantumState,
    pub v_min: QuantumState,
    pub delta: f64,
    /// Set when either extreme eigenvalue is degenerate and a tie-break was applied.
    pub degenerate: bool,
}

impl SpectrumSummary {
    pub fn from_eigen(eig: &Eigen) -> Result<Self> {
        if eig.is_empty() {
            return Err(Error::InvalidLayout("empty spectrum".into()));
        }
        let a_min = eig.values[0];
        let a_max = *eig.values.last().unwrap();
        let (v_max, dmax) = eig.eigenspace_representative(a_max);
        let (v_min, dmin) = eig.eigenspace_representative(a_min);
        Ok(Self {
            a_max,
            a_min,
            v_max: QuantumState::from_amplitudes(v_max)?.with_canonical_phase(),
            v_min: QuantumState::from_amplitudes(v_min)?.with_canonical_phase(),
            delta: a_max - a_min,
            degenerate: dmax || dmin,
        })
    }
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi eigendecomposition of a Hermitian matrix.
pub fn eig_hermitian(m: &CMatrix) -> Result<Eigen> {
    let n = m.dim();
    if n > MAX_EIG_DIM {
        return Err(Error::DimensionTooLarge {
            dim: n,
            limit: MAX_EIG_DIM,
        });
    }
    let scale = m.max_abs().max(1.0);
    let asymmetry = m.hermitian_defect();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NonHermitian { asymmetry });
    }
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMatrix::zeros(0),
        });
    }

    let mut a = CMatrix::from_fn(n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut v = CMatrix::identity(n);
    let tol = JACOBI_TOL * a.frobenius_norm().max(1.0);

    let mut converged = off_diagonal_norm(&a) <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&a) <= tol;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    orthonormalize_clusters(&values, &mut vectors);
    Ok(Eigen { values, vectors })
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r < 1e-300 {
        return;
    }
    let n = a.dim();
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 { 1.0 } else { -1.0 } / (tau.abs() + (1.0 + tau * tau).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = -phase.conj() * s;
    let g_qq = phase.conj() * c;

    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

fn orthonormalize_clusters(values: &[f64], vectors: &mut CMatrix) {
    let n = values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            for j in start..end {
                let mut col = vectors.column(j);
                for k in start..j {
                    let prev = vectors.column(k);
                    let proj = matrix::inner(&prev, &col);
                    for (c, p) in col.iter_mut().zip(&prev) {
                        *c -= proj * p;
                    }
                }
                let norm = matrix::norm_sqr(&col).sqrt();
                for (i, c) in col.into_iter().enumerate() {
                    vectors[(i, j)] = c / norm;
                }
            }
        }
        start = end;
    }
}
