//! Classical and quantum Fisher information, with per-branch accounting for
//! postselected weak measurements.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::qcore::{
    complete_basis, evolve_series, expectation, matrix, orthonormality_defect, CMatrix,
    HermitianObservable, QuantumState,
};
use crate::weakvalue::{WeakMeasurementSetup, OVERLAP_FLOOR};

/// Outcomes below this probability are excluded from Fisher sums.
pub const PROBABILITY_FLOOR: f64 = 1e-300;
/// Central-difference step for state derivatives.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probabilities: Vec<f64>,
    derivative: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(probabilities: Vec<f64>, derivative: Vec<f64>) -> Result<Self> {
        if probabilities.len() != derivative.len() || probabilities.is_empty() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities but {} derivatives",
                probabilities.len(),
                derivative.len()
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| p.is_nan() || **p < -1e-15) {
            return Err(Error::InvalidDistribution(format!(
                "negative probability {p}"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        let drift: f64 = derivative.iter().sum();
        if drift.is_nan() || drift.abs() > 1e-8 {
            return Err(Error::InvalidDistribution(format!(
                "derivatives sum to {drift}"
            )));
        }
        Ok(Self {
            probabilities,
            derivative,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }
}

/// `Σ (∂p)²/p`
pub fn classical_fisher(dist: &OutcomeDistribution) -> Result<f64> {
    let mut total = 0.0;
    for (i, (&p, &dp)) in dist.probabilities.iter().zip(&dist.derivative).enumerate() {
        if p < PROBABILITY_FLOOR {
            if dp.abs() >= PROBABILITY_FLOOR {
                return Err(Error::InconsistentDerivative {
                    index: i,
                    derivative: dp,
                });
            }
            continue;
        }
        total += dp * dp / p;
    }
    Ok(total)
}

/// `4(⟨∂Φ|∂Φ⟩ − |⟨Φ|∂Φ⟩|²)`, clamped at zero.
pub fn quantum_fisher_pure(state: &QuantumState, derivative: &QuantumState) -> Result<f64> {
    if !state.is_normalized(1e-10) {
        return Err(Error::NotNormalized {
            norm_sqr: state.norm_sqr(),
        });
    }
    let overlap = state.inner(derivative)?;
    Ok((4.0 * (derivative.norm_sqr() - overlap.norm_sqr())).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdDerivative {
    pub derivative: QuantumState,
    /// Distance between the step-`h` estimate and its Richardson extrapolation.
    pub richardson_gap: f64,
}

/// Central difference of a state family at `at` with step [`FD_STEP`].
pub fn finite_difference_derivative(
    family: impl Fn(f64) -> Result<QuantumState>,
    at: f64,
) -> Result<FdDerivative> {
    let central = |h: f64| -> Result<Vec<C64>> {
        let plus = family(at + h)?;
        let minus = family(at - h)?;
        plus.check_same_dim(minus.dim())?;
        Ok(plus
            .amplitudes()
            .iter()
            .zip(minus.amplitudes())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    };
    let d1 = central(FD_STEP)?;
    let d2 = central(FD_STEP / 2.0)?;
    let gap = d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| ((4.0 * b - a) / 3.0 - a).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let dims = family(at)?.dims().to_vec();
    Ok(FdDerivative {
        derivative: QuantumState::new(d1, dims)?,
        richardson_gap: gap,
    })
}

/// `e^{−igH}|Φ⟩` and its exact `g`-derivative `−iH e^{−igH}|Φ⟩`.
pub fn unitary_family(
    h: &HermitianObservable,
    phi: &QuantumState,
    g: f64,
) -> Result<(QuantumState, QuantumState)> {
    let state = crate::qcore::evolve_exp(phi, h, g)?;
    let deriv = state.apply(h.matrix())?.scaled(C64::new(0.0, -1.0));
    Ok((state, deriv))
}

/// `4[⟨A²⟩⟨F²⟩ − (⟨A⟩⟨F⟩)²]`
pub fn no_postselection_qfi(setup: &WeakMeasurementSetup) -> Result<f64> {
    let (a2, a) = second_and_mean(&setup.psi_i, &setup.system_obs)?;
    let (f2, f) = second_and_mean(&setup.pointer_init, &setup.pointer_obs)?;
    Ok(4.0 * (a2 * f2 - (a * f).powi(2)))
}

fn second_and_mean(state: &QuantumState, obs: &HermitianObservable) -> Result<(f64, f64)> {
    state.check_same_dim(obs.dim())?;
    let applied = obs.matrix().mul_vec(state.amplitudes())?;
    Ok((
        matrix::norm_sqr(&applied),
        matrix::inner(state.amplitudes(), &applied).re,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFisher {
    pub label: usize,
    /// `|⟨f_k|ψ_i⟩|²`
    pub probability: f64,
    /// `None` when the branch is orthogonal to the initial state.
    pub weak_value: Option<C64>,
    /// Probability-weighted first-order information of the branch.
    pub information: f64,
    /// Probability-weighted QFI of the exactly collapsed pointer.
    pub exact_information: f64,
    /// Exact postselection probability at the configured coupling.
    pub exact_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherReport {
    /// Fisher information of the branch-outcome distribution.
    pub classical: f64,
    /// QFI of the joint state without postselection.
    pub quantum: f64,
    pub per_branch: Vec<BranchFisher>,
    pub sum_over_branches: f64,
    pub exact_sum: f64,
}

impl FisherReport {
    /// Branch carrying the most first-order information.
    pub fn dominant(&self) -> &BranchFisher {
        self.per_branch
            .iter()
            .max_by(|a, b| a.information.total_cmp(&b.information))
            .expect("report has at least one branch")
    }
}

/// The configured postselection completed to an orthonormal basis.
pub fn default_branch_basis(setup: &WeakMeasurementSetup) -> Result<Vec<QuantumState>> {
    let f = setup
        .psi_f
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("postselected state not set".into()))?;
    let mut basis = complete_basis(std::slice::from_ref(f), f.dim())?;
    let dims = setup.psi_i.dims().to_vec();
    for b in basis.iter_mut() {
        *b = b.clone().with_dims(dims.clone())?;
    }
    Ok(basis)
}

fn check_basis(setup: &WeakMeasurementSetup, basis: &[QuantumState]) -> Result<()> {
    let d = setup.psi_i.dim();
    if basis.len() != d {
        return Err(Error::BasisNotOrthonormal {
            deviation: (d as f64 - basis.len() as f64).abs(),
        });
    }
    for b in basis {
        setup.psi_i.check_same_dim(b.dim())?;
    }
    let deviation = orthonormality_defect(basis)?;
    if deviation > 1e-10 {
        return Err(Error::BasisNotOrthonormal { deviation });
    }
    Ok(())
}

/// Per-branch Fisher accounting over an orthonormal postselection basis
/// (the default basis when `basis` is `None`).
pub fn per_branch_fisher(
    setup: &WeakMeasurementSetup,
    basis: Option<&[QuantumState]>,
) -> Result<FisherReport> {
    let owned;
    let basis = match basis {
        Some(b) => b,
        None => {
            owned = default_branch_basis(setup)?;
            &owned
        }
    };
    check_basis(setup, basis)?;

    let g = setup.coupling;
    let d = &setup.pointer_init;
    let (f2, f_mean) = second_and_mean(d, &setup.pointer_obs)?;
    let var_f = (f2 - f_mean * f_mean).max(0.0);
    let a_psi = setup
        .system_obs
        .matrix()
        .mul_vec(setup.psi_i.amplitudes())?;

    // e^{−igA⊗F} = Σ_μ e^{−igμA} ⊗ |μ⟩⟨μ| over pointer eigenpairs
    let f_eig = setup.pointer_obs.eigen()?;
    let mut evolved = Vec::with_capacity(f_eig.len());
    for (j, &mu) in f_eig.values.iter().enumerate() {
        let vec_mu = f_eig.vector(j);
        let weight = matrix::inner(&vec_mu, d.amplitudes());
        let w = evolve_series(&setup.psi_i, &setup.system_obs, g * mu)?;
        let aw = setup.system_obs.matrix().mul_vec(w.amplitudes())?;
        evolved.push((mu, vec_mu, weight, w, aw));
    }

    let mut per_branch = Vec::with_capacity(basis.len());
    let mut probs = Vec::with_capacity(basis.len());
    let mut dprobs = Vec::with_capacity(basis.len());
    for (label, f) in basis.iter().enumerate() {
        let overlap = f.inner(&setup.psi_i)?;
        let amp = matrix::inner(f.amplitudes(), &a_psi);
        let probability = overlap.norm_sqr();
        let (weak_value, information) = if overlap.norm() <= OVERLAP_FLOOR {
            (None, 4.0 * amp.norm_sqr() * var_f)
        } else {
            let aw = amp / overlap;
            let m2 = aw.norm_sqr();
            let bracket = var_f - f2 * (2.0 * g * aw.im * f_mean + g * g * m2 * f2);
            (Some(aw), 4.0 * probability * m2 * bracket)
        };

        let mut dk = vec![C64::new(0.0, 0.0); d.dim()];
        let mut dk_dot = vec![C64::new(0.0, 0.0); d.dim()];
        for (mu, vec_mu, weight, w, aw) in &evolved {
            let c = matrix::inner(f.amplitudes(), w.amplitudes()) * weight;
            let c_dot = matrix::inner(f.amplitudes(), aw) * weight * C64::new(0.0, -mu);
            for i in 0..d.dim() {
                dk[i] += vec_mu[i] * c;
                dk_dot[i] += vec_mu[i] * c_dot;
            }
        }
        let n = matrix::norm_sqr(&dk);
        let cross = matrix::inner(&dk, &dk_dot);
        let exact_information = if n < PROBABILITY_FLOOR {
            0.0
        } else {
            (4.0 * (matrix::norm_sqr(&dk_dot) - cross.norm_sqr() / n)).max(0.0)
        };
        probs.push(n);
        dprobs.push(2.0 * cross.re);
        per_branch.push(BranchFisher {
            label,
            probability,
            weak_value,
            information,
            exact_information,
            exact_probability: n,
        });
    }

    let classical = classical_fisher(&OutcomeDistribution::new(probs, dprobs)?)?;
    Ok(FisherReport {
        classical,
        quantum: no_postselection_qfi(setup)?,
        sum_over_branches: per_branch.iter().map(|b| b.information).sum(),
        exact_sum: per_branch.iter().map(|b| b.exact_information).sum(),
        per_branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRule {
    /// `Σ_k I^(k)`
    pub lhs: f64,
    /// `4⟨A²⟩ Var F`
    pub rhs: f64,
    pub deficit: f64,
}

pub fn sum_rule_check(
    setup: &WeakMeasurementSetup,
    basis: Option<&[QuantumState]>,
) -> Result<SumRule> {
    let report = per_branch_fisher(setup, basis)?;
    let (a2, _) = second_and_mean(&setup.psi_i, &setup.system_obs)?;
    let (f2, f) = second_and_mean(&setup.pointer_init, &setup.pointer_obs)?;
    let rhs = 4.0 * a2 * (f2 - f * f).max(0.0);
    Ok(SumRule {
        lhs: report.sum_over_branches,
        rhs,
        deficit: rhs - report.sum_over_branches,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    matrix: CMatrix,
}

impl PovmElement {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let h = HermitianObservable::new(matrix.clone())
            .map_err(|e| Error::BasisNotPovm(format!("element is not Hermitian: {e}")))?;
        let lowest = h.eigen()?.values.first().copied().unwrap_or(0.0);
        if lowest < -1e-12 {
            return Err(Error::BasisNotPovm(format!(
                "element has negative eigenvalue {lowest:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn projector(state: &QuantumState) -> Result<Self> {
        Self::new(CMatrix::outer(state.amplitudes(), state.amplitudes())?)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `⟨a|E|b⟩`
    pub fn sandwich(&self, a: &[C64], b: &[C64]) -> Result<C64> {
        Ok(matrix::inner(a, &self.matrix.mul_vec(b)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    elements: Vec<PovmElement>,
}

impl PovmSet {
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::BasisNotPovm("no elements".into()))?;
        let dim = first.matrix.dim();
        let mut total = CMatrix::zeros(dim);
        for e in &elements {
            if e.matrix.dim() != dim {
                return Err(Error::BasisNotPovm("elements differ in dimension".into()));
            }
            total = &total + &e.matrix;
        }
        let defect = (&total - &CMatrix::identity(dim)).max_abs();
        if defect > 1e-10 {
            return Err(Error::BasisNotPovm(format!(
                "elements sum to identity only within {defect:e}"
            )));
        }
        Ok(Self { elements })
    }

    /// Projective measurement in an orthonormal basis.
    pub fn projective(basis: &[QuantumState]) -> Result<Self> {
        Self::new(
            basis
                .iter()
                .map(PovmElement::projector)
                .collect::<Result<_>>()?,
        )
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Outcome probabilities `⟨Φ|E|Φ⟩` and derivatives `2Re⟨∂Φ|E|Φ⟩`.
pub fn povm_distribution(
    povm: &PovmSet,
    state: &QuantumState,
    derivative: &QuantumState,
) -> Result<OutcomeDistribution> {
    state.check_same_dim(povm.dim())?;
    state.check_same_dim(derivative.dim())?;
    let mut p = Vec::with_capacity(povm.len());
    let mut dp = Vec::with_capacity(povm.len());
    for e in povm.elements() {
        p.push(e.sandwich(state.amplitudes(), state.amplitudes())?.re);
        dp.push(2.0 * e.sandwich(derivative.amplitudes(), state.amplitudes())?.re);
    }
    OutcomeDistribution::new(p, dp)
}

/// Variance used by the single-branch optimum: `Var(A)` in `ψ_i`.
pub fn system_variance(setup: &WeakMeasurementSetup) -> Result<f64> {
    let (a2, _) = second_and_mean(&setup.psi_i, &setup.system_obs)?;
    let a = expectation(&setup.psi_i, &setup.system_obs)?.re;
    Ok((a2 - a * a).max(0.0))
}
