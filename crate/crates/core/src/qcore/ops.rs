use num_complex::Complex64 as C64;

use super::matrix::{self, CMatrix, ONE, ZERO};
use super::observable::HermitianObservable;
use super::state::QuantumState;
use crate::error::{Error, Result};

/// Probabilities below this count as no overlap at all.
pub const ZERO_OVERLAP: f64 = 1e-300;

/// `⟨ψ|O|ψ⟩`
pub fn expectation(state: &QuantumState, obs: &HermitianObservable) -> Result<C64> {
    state.check_same_dim(obs.dim())?;
    let ov = obs.matrix().mul_vec(state.amplitudes())?;
    Ok(matrix::inner(state.amplitudes(), &ov))
}

/// `⟨O²⟩ − ⟨O⟩²`, clamped at zero.
pub fn variance(state: &QuantumState, obs: &HermitianObservable) -> Result<f64> {
    state.check_same_dim(obs.dim())?;
    let ov = obs.matrix().mul_vec(state.amplitudes())?;
    let mean = matrix::inner(state.amplitudes(), &ov).re;
    let second = matrix::norm_sqr(&ov);
    Ok((second - mean * mean).max(0.0))
}

pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for QuantumState {
    fn tensor(&self, other: &Self) -> Self {
        QuantumState::tensor(self, other)
    }
}

impl Tensor for HermitianObservable {
    fn tensor(&self, other: &Self) -> Self {
        HermitianObservable::tensor(self, other)
    }
}

impl Tensor for CMatrix {
    fn tensor(&self, other: &Self) -> Self {
        self.kron(other)
    }
}

/// Kronecker product, left factor most significant.
pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Outcome of projecting some factors of a joint state onto a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Postselection {
    /// Unnormalized state of the remaining factors.
    pub collapsed: QuantumState,
    pub probability: f64,
    pub zero_overlap: bool,
}

impl Postselection {
    pub fn require_overlap(self) -> Result<Self> {
        if self.zero_overlap {
            Err(Error::ZeroOverlap)
        } else {
            Ok(self)
        }
    }

    pub fn normalized(&self) -> Result<QuantumState> {
        if self.zero_overlap {
            return Err(Error::ZeroOverlap);
        }
        self.collapsed.clone().normalized()
    }
}

/// Project `factors` of `joint` onto `target`.
///
/// `target` is laid out over the named factors in the order given. The
/// collapsed state keeps the remaining factors in their original order.
pub fn postselect(
    joint: &QuantumState,
    target: &QuantumState,
    factors: &[usize],
) -> Result<Postselection> {
    let dims = joint.dims();
    let nf = dims.len();
    let mut picked = vec![false; nf];
    for &f in factors {
        if f >= nf || picked[f] {
            return Err(Error::InvalidLayout(format!(
                "factor list {factors:?} invalid for {nf} factors"
            )));
        }
        picked[f] = true;
    }
    let target_dim: usize = factors.iter().map(|&f| dims[f]).product();
    if target_dim != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target_dim,
            found: target.dim(),
        });
    }
    let rest: Vec<usize> = (0..nf).filter(|&f| !picked[f]).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&f| dims[f]).collect();
    let rest_dim: usize = rest_dims.iter().product();

    let mut out = vec![ZERO; rest_dim];
    let mut digits = vec![0usize; nf];
    let t = target.amplitudes();
    for (flat, amp) in joint.amplitudes().iter().enumerate() {
        let mut r = flat;
        for f in (0..nf).rev() {
            digits[f] = r % dims[f];
            r /= dims[f];
        }
        let ti = factors.iter().fold(0, |acc, &f| acc * dims[f] + digits[f]);
        let ri = rest.iter().fold(0, |acc, &f| acc * dims[f] + digits[f]);
        out[ri] += t[ti].conj() * amp;
    }
    let probability = matrix::norm_sqr(&out);
    let collapsed = QuantumState::new(
        out,
        if rest_dims.is_empty() {
            vec![1]
        } else {
            rest_dims
        },
    )?;
    Ok(Postselection {
        collapsed,
        probability,
        zero_overlap: probability < ZERO_OVERLAP,
    })
}

/// `e^{−i·angle·G}`
pub fn unitary_exp(generator: &HermitianObservable, angle: f64) -> Result<CMatrix> {
    let eig = generator.eigen()?;
    Ok(eig.apply_fn(|l| C64::from_polar(1.0, -angle * l)))
}

/// `e^{−i·angle·G}|ψ⟩`
pub fn evolve_exp(
    state: &QuantumState,
    generator: &HermitianObservable,
    angle: f64,
) -> Result<QuantumState> {
    state.check_same_dim(generator.dim())?;
    let eig = generator.eigen()?;
    let n = eig.len();
    let v = &eig.vectors;
    let amps = state.amplitudes();
    let coeffs: Vec<C64> = (0..n)
        .map(|k| {
            let c: C64 = (0..n).map(|i| v[(i, k)].conj() * amps[i]).sum();
            c * C64::from_polar(1.0, -angle * eig.values[k])
        })
        .collect();
    let out = (0..n)
        .map(|i| (0..n).map(|k| v[(i, k)] * coeffs[k]).sum())
        .collect();
    QuantumState::new(out, state.dims().to_vec())
}

/// `e^{−i·angle·G}|ψ⟩` by a scaled Taylor series. Needs no eigendecomposition,
/// so it works for any dimension.
pub fn evolve_series(
    state: &QuantumState,
    generator: &HermitianObservable,
    angle: f64,
) -> Result<QuantumState> {
    state.check_same_dim(generator.dim())?;
    let m = generator.matrix();
    let norm = angle.abs() * m.frobenius_norm();
    let steps = (norm / 0.5).ceil().max(1.0) as usize;
    let factor = C64::new(0.0, -angle / steps as f64);
    let mut v = state.amplitudes().to_vec();
    let scale = matrix::norm_sqr(&v).sqrt();
    for _ in 0..steps {
        let mut term = v.clone();
        let mut acc = v.clone();
        for k in 1..60 {
            term = m.mul_vec(&term)?;
            let c = factor / k as f64;
            term.iter_mut().for_each(|t| *t *= c);
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
            if matrix::norm_sqr(&term).sqrt() <= 1e-18 * scale {
                break;
            }
        }
        v = acc;
    }
    QuantumState::new(v, state.dims().to_vec())
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` acting on factor `factor`.
pub fn embed(op: &CMatrix, dims: &[usize], factor: usize) -> Result<CMatrix> {
    if factor >= dims.len() {
        return Err(Error::InvalidLayout(format!(
            "factor {factor} out of range for {} factors",
            dims.len()
        )));
    }
    if dims[factor] != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims[factor],
            found: op.dim(),
        });
    }
    let before: usize = dims[..factor].iter().product();
    let after: usize = dims[factor + 1..].iter().product();
    Ok(CMatrix::identity(before)
        .kron(op)
        .kron(&CMatrix::identity(after)))
}

/// Apply a single-factor operator without forming the full matrix.
pub fn apply_to_factor(state: &QuantumState, op: &CMatrix, factor: usize) -> Result<QuantumState> {
    let dims = state.dims();
    if factor >= dims.len() {
        return Err(Error::InvalidLayout(format!(
            "factor {factor} out of range for {} factors",
            dims.len()
        )));
    }
    let d = dims[factor];
    if d != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.dim(),
        });
    }
    let stride: usize = dims[factor + 1..].iter().product();
    let amps = state.amplitudes();
    let mut out = vec![ZERO; amps.len()];
    let mut local = vec![ZERO; d];
    for block in (0..amps.len()).step_by(d * stride) {
        for off in 0..stride {
            let base = block + off;
            for (k, l) in local.iter_mut().enumerate() {
                *l = amps[base + k * stride];
            }
            for i in 0..d {
                out[base + i * stride] = op.row(i).iter().zip(&local).map(|(a, b)| a * b).sum();
            }
        }
    }
    QuantumState::new(out, dims.to_vec())
}

/// Largest entrywise deviation of the Gram matrix from the identity.
pub fn orthonormality_defect(basis: &[QuantumState]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let g = a.inner(b)?;
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g - target).norm());
        }
    }
    Ok(worst)
}

/// Extend `seed` to an orthonormal basis of the full space by Gram-Schmidt
/// over the computational basis. Seed vectors are orthonormalized in order.
pub fn complete_basis(seed: &[QuantumState], dim: usize) -> Result<Vec<QuantumState>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    let candidates = seed
        .iter()
        .map(|s| {
            if s.dim() != dim {
                Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                })
            } else {
                Ok(s.amplitudes().to_vec())
            }
        })
        .chain((0..dim).map(|e| {
            let mut v = vec![ZERO; dim];
            v[e] = ONE;
            Ok(v)
        }));
    for cand in candidates {
        if basis.len() == dim {
            break;
        }
        let mut v = cand?;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let proj = matrix::inner(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let n = matrix::norm_sqr(&v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
        .into_iter()
        .map(QuantumState::from_amplitudes)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{sigma_x, I};

    #[test]
    fn expectation_examples() {
        let z = HermitianObservable::sigma_z();
        assert!(expectation(&QuantumState::plus(), &z).unwrap().norm() < 1e-15);
        assert_eq!(expectation(&QuantumState::zero(), &z).unwrap().re, 1.0);
        let s = QuantumState::from_real(&[0.6, 0.8]).unwrap();
        assert!((expectation(&s, &z).unwrap().re + 0.28).abs() < 1e-15);
    }

    #[test]
    fn variance_examples() {
        let z = HermitianObservable::sigma_z();
        assert!((variance(&QuantumState::plus(), &z).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(variance(&QuantumState::zero(), &z).unwrap(), 0.0);
        assert!(expectation(&QuantumState::zero().tensor(&QuantumState::zero()), &z).is_err());
    }

    #[test]
    fn bell_postselection() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = QuantumState::new(
            vec![C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)],
            vec![2, 2],
        )
        .unwrap();
        let p = postselect(&bell, &QuantumState::zero(), &[0]).unwrap();
        assert!((p.probability - 0.5).abs() < 1e-15);
        let c = p.normalized().unwrap();
        assert!((c.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        assert!(!p.zero_overlap);
    }

    #[test]
    fn orthogonal_postselection_flags_zero_overlap() {
        let joint = QuantumState::zero().tensor(&QuantumState::plus());
        let p = postselect(&joint, &QuantumState::one(), &[0]).unwrap();
        assert_eq!(p.probability, 0.0);
        assert!(p.zero_overlap);
        assert_eq!(p.require_overlap(), Err(Error::ZeroOverlap));
    }

    #[test]
    fn postselect_on_later_factor() {
        let joint = QuantumState::plus().tensor(&QuantumState::one());
        let p = postselect(&joint, &QuantumState::one(), &[1]).unwrap();
        assert!((p.probability - 1.0).abs() < 1e-15);
        assert!(p.collapsed.fidelity(&QuantumState::plus()).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn sigma_x_quarter_turn() {
        let out = evolve_exp(
            &QuantumState::zero(),
            &HermitianObservable::sigma_x(),
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        assert!((out.amplitudes()[0]).norm() < 1e-15);
        assert!((out.amplitudes()[1] + I).norm() < 1e-15);
    }

    #[test]
    fn series_matches_spectral_evolution() {
        let g = HermitianObservable::sigma_z().tensor(&HermitianObservable::sigma_x());
        let s = QuantumState::bloch(0.9, 0.3).tensor(&QuantumState::bloch(0.2, -1.0));
        for angle in [0.0, 1e-3, 0.4, 3.7] {
            let a = evolve_exp(&s, &g, angle).unwrap();
            let b = evolve_series(&s, &g, angle).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn apply_to_factor_matches_embed() {
        let s = QuantumState::bloch(0.3, 0.2)
            .tensor(&QuantumState::bloch(1.1, -0.4))
            .tensor(&QuantumState::bloch(2.0, 0.9));
        for f in 0..3 {
            let a = apply_to_factor(&s, &sigma_x(), f).unwrap();
            let b = s.apply(&embed(&sigma_x(), s.dims(), f).unwrap()).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn completed_basis_is_orthonormal() {
        let seed = QuantumState::bloch(0.7, 0.3).tensor(&QuantumState::plus());
        let b = complete_basis(std::slice::from_ref(&seed), 4).unwrap();
        assert_eq!(b.len(), 4);
        assert!(orthonormality_defect(&b).unwrap() < 1e-14);
        assert!(b[0].fidelity(&seed).unwrap() > 1.0 - 1e-15);
    }
}
