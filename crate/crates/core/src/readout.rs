//! Readout errors on the postselection register: error and loss rates,
//! majority voting, the correction factor of the pointer shift, the Fisher
//! factor, and a seeded Monte-Carlo sampler.
//!
//! Bit flips are independent across qubits. The bounds `|γ| ≤ 1` and
//! `0 ≤ f ≤ 1` hold whenever `q01 + q10 ≤ 1`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::PovmSet;
use crate::qcore::{matrix, QuantumState};
use crate::qubitsim::branch_etas;

const DENOMINATOR_FLOOR: f64 = 1e-300;
/// Trials per independent random stream.
pub const MC_BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutErrorModel {
    /// Probability of reading `|0⟩` as `1`.
    pub q01: f64,
    /// Probability of reading `|1⟩` as `0`.
    pub q10: f64,
}

impl ReadoutErrorModel {
    pub fn new(q01: f64, q10: f64) -> Result<Self> {
        for q in [q01, q10] {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::ProbabilityOutOfRange(q));
            }
        }
        Ok(Self { q01, q10 })
    }

    pub fn symmetric(q: f64) -> Result<Self> {
        Self::new(q, q)
    }

    pub fn ideal() -> Self {
        Self { q01: 0.0, q10: 0.0 }
    }
}

/// Accept a record as all-zeros when at most `k` of its `n` bits read `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityVoteRule {
    pub n: usize,
    pub k: usize,
}

impl MajorityVoteRule {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("vote over zero copies".into()));
        }
        if 2 * k > n {
            return Err(Error::InvalidParameter(format!(
                "vote threshold k={k} exceeds n/2 for n={n}"
            )));
        }
        Ok(Self { n, k })
    }

    /// Even `n` with `k = n/2`: a half-and-half record passes the
    /// all-zeros test.
    pub fn is_tie_threshold(&self) -> bool {
        2 * self.k == self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub error_rate: f64,
    pub loss_rate: f64,
    pub gamma: f64,
    pub fisher_factor: f64,
    /// Large-`A_w` limit of the error rate; NaN when `nφ ∉ (0, π/2)`.
    pub plateau: f64,
    /// Set for Monte-Carlo reports.
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(S0, S1)`: probability that a true all-zeros record, respectively a true
/// all-ones record, is accepted as all-zeros.
pub fn acceptance_probabilities(
    n: usize,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("zero copies".into()));
    }
    let k = match vote {
        None => 0,
        Some(v) if v.n == n => v.k,
        Some(v) => {
            return Err(Error::InvalidParameter(format!(
                "vote rule is for n={} but n={n}",
                v.n
            )))
        }
    };
    let (q01, q10) = (model.q01, model.q10);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for j in 0..=k {
        let c = binomial(n, j);
        s0 += c * (1.0 - q01).powi((n - j) as i32) * q01.powi(j as i32);
        s1 += c * q10.powi((n - j) as i32) * (1.0 - q10).powi(j as i32);
    }
    Ok((s0, s1))
}

fn check_pair(p0: f64, p1: f64) -> Result<()> {
    for p in [p0, p1] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
    }
    if (p0 + p1 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidDistribution(format!(
            "branch probabilities sum to {}",
            p0 + p1
        )));
    }
    Ok(())
}

/// Fraction of accepted all-zeros records that were really all-ones.
pub fn error_rate(n: usize, p0: f64, p1: f64, model: &ReadoutErrorModel) -> Result<f64> {
    error_rate_with_vote(n, p0, p1, model, None)
}

pub fn error_rate_with_vote(
    n: usize,
    p0: f64,
    p1: f64,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<f64> {
    check_pair(p0, p1)?;
    let (s0, s1) = acceptance_probabilities(n, model, vote)?;
    let den = p0 * s0 + p1 * s1;
    if den < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateInput(
            "no record is ever accepted as all-zeros".into(),
        ));
    }
    Ok(p1 * s1 / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRateScaling {
    pub exact: f64,
    /// `|A_w|²n⁻²((1−q01)/q10)⁻ⁿ`
    pub superexp_approx: f64,
}

/// Error rate with the weak-regime branch ratio `p0/p1 = n²/|A_w|²`.
pub fn error_rate_scaling(
    n: usize,
    aw: C64,
    model: &ReadoutErrorModel,
) -> Result<ErrorRateScaling> {
    let n2 = (n * n) as f64;
    let a2 = aw.norm_sqr();
    let p0 = n2 / (n2 + a2);
    let exact = error_rate(n, p0, 1.0 - p0, model)?;
    let superexp_approx = a2 / n2 * (model.q10 / (1.0 - model.q01)).powi(n as i32);
    Ok(ErrorRateScaling {
        exact,
        superexp_approx,
    })
}

/// `(1 + ((1−q01)/q10)ⁿ tan²nφ)⁻¹`, the error rate as `A_w → ∞`.
pub fn error_rate_plateau(n: usize, phi: f64, model: &ReadoutErrorModel) -> Result<f64> {
    error_rate_plateau_with_vote(n, phi, model, None)
}

pub fn error_rate_plateau_with_vote(
    n: usize,
    phi: f64,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<f64> {
    let x = n as f64 * phi;
    if !(x > 0.0 && x < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidParameter(format!(
            "nφ = {x} outside (0, π/2)"
        )));
    }
    let (s0, s1) = acceptance_probabilities(n, model, vote)?;
    let t2 = x.tan().powi(2);
    let den = s1 + s0 * t2;
    if den < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateInput(
            "no record is ever accepted as all-zeros".into(),
        ));
    }
    Ok(s1 / den)
}

/// Fraction of true all-zeros records rejected.
pub fn loss_rate(
    n: usize,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<f64> {
    let (s0, _) = acceptance_probabilities(n, model, vote)?;
    Ok((1.0 - s0).max(0.0))
}

/// Factor `γ` by which misread all-ones records shrink the average pointer
/// shift of the all-zeros branch.
pub fn correction_factor(
    n: usize,
    eta0: f64,
    eta1: f64,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<f64> {
    if eta0 < 0.0 || eta1 < 0.0 || eta0 + eta1 <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "branch weights ({eta0}, {eta1})"
        )));
    }
    let p0 = eta0 / (eta0 + eta1);
    let p1 = eta1 / (eta0 + eta1);
    let (s0, s1) = acceptance_probabilities(n, model, vote)?;
    let den = p0 * s0 + p1 * s1;
    if den < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateInput(
            "no record is ever accepted as all-zeros".into(),
        ));
    }
    Ok(p0 * (s0 - s1) / den)
}

/// Average `σx` shift of the pointer over accepted all-zeros records:
/// `γ·n sin2nφ·ImA_w·Var(σx)_D/η₀`.
pub fn corrected_pointer_shift(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<f64> {
    let x = sigma_x_mean(pointer_init)?;
    let (eta0, eta1) = branch_etas(n, phi, aw, x);
    let gamma = correction_factor(n, eta0, eta1, model, vote)?;
    let nf = n as f64;
    Ok(gamma * nf * (2.0 * nf * phi).sin() * aw.im * (1.0 - x * x) / eta0)
}

/// `f = n²(S0−S1)²/(n²S0 + |A_w|²S1)`, evaluated at `φ = 0`.
pub fn fisher_factor(
    n: usize,
    aw: C64,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<f64> {
    let (s0, s1) = acceptance_probabilities(n, model, vote)?;
    let n2 = (n * n) as f64;
    let den = n2 * s0 + aw.norm_sqr() * s1;
    if den < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateInput(
            "no record is ever accepted as all-zeros".into(),
        ));
    }
    Ok(n2 * (s0 - s1).powi(2) / den)
}

/// Analytic report at coupling `phi`; the Fisher factor is taken at `φ = 0`.
pub fn analytic_report(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<CorrectionReport> {
    let (eta0, eta1) = branch_etas(n, phi, aw, sigma_x_mean(pointer_init)?);
    let p0 = eta0 / (eta0 + eta1);
    Ok(CorrectionReport {
        error_rate: error_rate_with_vote(n, p0, 1.0 - p0, model, vote)?,
        loss_rate: loss_rate(n, model, vote)?,
        gamma: correction_factor(n, eta0, eta1, model, vote)?,
        fisher_factor: fisher_factor(n, aw, model, vote)?,
        plateau: error_rate_plateau_with_vote(n, phi, model, vote).unwrap_or(f64::NAN),
        trials: None,
        seed: None,
    })
}

fn sigma_x_mean(d: &QuantumState) -> Result<f64> {
    if d.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: d.dim(),
        });
    }
    let a = d.amplitudes();
    Ok(2.0 * (a[0].conj() * a[1]).re / d.norm_sqr())
}

/// `u·D + v·σx D`
fn pointer_combo(d: &[C64], u: C64, v: C64) -> [C64; 2] {
    [u * d[0] + v * d[1], u * d[1] + v * d[0]]
}

/// Outcome probabilities of `povm` on the two first-order pointers
/// `e^{−iφA_wσx}D` and `e^{iφ(n²/A_w*)σx}D`, at any `φ`.
pub fn branch_outcome_probabilities(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
    povm: &PovmSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pointer_povm(pointer_init, povm)?;
    if aw.norm() < DENOMINATOR_FLOOR {
        return Err(Error::SingularWeakValue {
            re: aw.re,
            im: aw.im,
        });
    }
    let i = C64::new(0.0, 1.0);
    let d = pointer_init.amplitudes();
    let n2 = (n * n) as f64;
    // exp(zσx) = cosh z + sinh z σx for complex z
    let expx = |z: C64| pointer_combo(d, z.cosh(), z.sinh());
    let d0 = expx(-i * phi * aw);
    let d1 = expx(i * phi * n2 / aw.conj());
    let outcomes = |v: &[C64; 2]| -> Result<Vec<f64>> {
        let norm = matrix::norm_sqr(v);
        povm.elements()
            .iter()
            .map(|e| Ok(e.sandwich(v, v)?.re / norm))
            .collect()
    };
    Ok((outcomes(&d0)?, outcomes(&d1)?))
}

fn check_pointer_povm(d: &QuantumState, povm: &PovmSet) -> Result<()> {
    if d.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: d.dim(),
        });
    }
    if povm.dim() != 2 {
        return Err(Error::BasisNotPovm(format!(
            "POVM acts on dimension {}, pointer is a qubit",
            povm.dim()
        )));
    }
    if !d.is_normalized(1e-10) {
        return Err(Error::NotNormalized {
            norm_sqr: d.norm_sqr(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PovmFisher {
    /// Pointer Fisher information with readout errors.
    pub i_phi: f64,
    /// Same without readout errors.
    pub i_phi0: f64,
    /// `i_phi / i_phi0`
    pub factor: f64,
}

/// Pointer Fisher information from `povm` at `φ = 0`, mixing the two branch
/// pointers with their acceptance probabilities.
pub fn povm_fisher_with_errors(
    n: usize,
    aw: C64,
    pointer_init: &QuantumState,
    povm: &PovmSet,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
) -> Result<PovmFisher> {
    check_pointer_povm(pointer_init, povm)?;
    if aw.norm() < DENOMINATOR_FLOOR {
        return Err(Error::SingularWeakValue {
            re: aw.re,
            im: aw.im,
        });
    }
    let i = C64::new(0.0, 1.0);
    let d = pointer_init.amplitudes();
    let n2 = (n * n) as f64;
    let a2 = aw.norm_sqr();
    let x = sigma_x_mean(pointer_init)?;

    let p0 = n2 / (n2 + a2);
    let p1 = a2 / (n2 + a2);
    let dp0 = 2.0 * n2 * aw.im * x / (n2 + a2);
    let dp1 = -dp0;

    // w(φ) = ⟨d|E|d⟩/⟨d|d⟩ with d(0) = D and d'(0) = c·σx D
    let outcome_slopes = |c: C64| -> Result<Vec<(f64, f64)>> {
        let dd = pointer_combo(d, C64::new(0.0, 0.0), c);
        let dnorm = 2.0 * matrix::inner(d, &dd).re;
        povm.elements()
            .iter()
            .map(|e| {
                let w = e.sandwich(d, d)?.re;
                let dw = 2.0 * e.sandwich(d, &dd)?.re - w * dnorm;
                Ok((w, dw))
            })
            .collect()
    };
    let b0 = outcome_slopes(-i * aw)?;
    let b1 = outcome_slopes(i * n2 / aw.conj())?;

    let info = |s0: f64, s1: f64| -> f64 {
        b0.iter()
            .zip(&b1)
            .map(|(&(w0, dw0), &(w1, dw1))| {
                let h = p0 * w0 * s0 + p1 * w1 * s1;
                let dh = (w0 * dp0 + p0 * dw0) * s0 + (w1 * dp1 + p1 * dw1) * s1;
                if h < DENOMINATOR_FLOOR {
                    0.0
                } else {
                    dh * dh / h
                }
            })
            .sum()
    };
    let (s0, s1) = acceptance_probabilities(n, model, vote)?;
    let i_phi = info(s0, s1);
    let i_phi0 = info(1.0, 0.0);
    if i_phi0 < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateInput(
            "the POVM carries no information at φ = 0".into(),
        ));
    }
    Ok(PovmFisher {
        i_phi,
        i_phi0,
        factor: i_phi / i_phi0,
    })
}

/// Raw tallies of a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ReadoutCounts {
    pub true_zero: u64,
    pub true_one: u64,
    /// True all-zeros records accepted as all-zeros.
    pub accepted_from_zero: u64,
    /// True all-ones records accepted as all-zeros.
    pub accepted_from_one: u64,
}

impl ReadoutCounts {
    fn merge(self, o: Self) -> Self {
        Self {
            true_zero: self.true_zero + o.true_zero,
            true_one: self.true_one + o.true_one,
            accepted_from_zero: self.accepted_from_zero + o.accepted_from_zero,
            accepted_from_one: self.accepted_from_one + o.accepted_from_one,
        }
    }

    pub fn accepted(&self) -> u64 {
        self.accepted_from_zero + self.accepted_from_one
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReadout {
    pub report: CorrectionReport,
    pub counts: ReadoutCounts,
    /// All-ones branch probability used for sampling.
    pub p1: f64,
}

impl MonteCarloReadout {
    /// Binomial standard errors `(error, loss, γ)` under reference rates
    /// `error` and `loss`.
    pub fn standard_errors(&self, error: f64, loss: f64) -> (f64, f64, f64) {
        let se = |p: f64, m: u64| {
            if m == 0 {
                f64::INFINITY
            } else {
                (p * (1.0 - p) / m as f64).sqrt()
            }
        };
        let se_error = se(error, self.counts.accepted());
        let se_gamma = if self.p1 > 0.0 {
            se_error / self.p1
        } else {
            0.0
        };
        (se_error, se(loss, self.counts.true_zero), se_gamma)
    }
}

/// Sample branches from the exact protocol probabilities, flip each readout
/// bit independently, and apply the vote rule. Trials are split into blocks
/// of [`MC_BLOCK`], block `b` drawing from ChaCha8 stream `b` of `seed`, so
/// the result does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_readout(
    n: usize,
    phi: f64,
    aw: C64,
    pointer_init: &QuantumState,
    model: &ReadoutErrorModel,
    vote: Option<&MajorityVoteRule>,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloReadout> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let k = match vote {
        Some(v) => {
            acceptance_probabilities(n, model, Some(v))?;
            v.k
        }
        None => 0,
    };
    let (eta0, eta1) = branch_etas(n, phi, aw, sigma_x_mean(pointer_init)?);
    let p0 = eta0 / (eta0 + eta1);
    let p1 = 1.0 - p0;
    let (q01, q10) = (model.q01, model.q10);

    let blocks = trials.div_ceil(MC_BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let len = MC_BLOCK.min(trials - b * MC_BLOCK);
            let mut c = ReadoutCounts::default();
            for _ in 0..len {
                let zero_branch = rng.random::<f64>() < p0;
                let flip = if zero_branch { q01 } else { q10 };
                let flips = (0..n).filter(|_| rng.random::<f64>() < flip).count();
                let ones = if zero_branch { flips } else { n - flips };
                let accepted = ones <= k;
                if zero_branch {
                    c.true_zero += 1;
                    c.accepted_from_zero += accepted as u64;
                } else {
                    c.true_one += 1;
                    c.accepted_from_one += accepted as u64;
                }
            }
            c
        })
        .reduce(ReadoutCounts::default, ReadoutCounts::merge);

    let ratio = |a: u64, b: u64| {
        if b == 0 {
            f64::NAN
        } else {
            a as f64 / b as f64
        }
    };
    let acc0 = counts.accepted_from_zero as f64;
    let acc1 = counts.accepted_from_one as f64;
    let acc = acc0 + acc1;
    let s0 = ratio(counts.accepted_from_zero, counts.true_zero);
    let s1 = ratio(counts.accepted_from_one, counts.true_one);
    let gamma = if acc == 0.0 {
        f64::NAN
    } else if acc1 == 0.0 {
        1.0
    } else {
        (acc0 - acc1 * eta0 / eta1) / acc
    };
    let n2 = (n * n) as f64;
    let s1_or_zero = if s1.is_nan() { 0.0 } else { s1 };
    let report = CorrectionReport {
        error_rate: ratio(counts.accepted_from_one, counts.accepted()),
        loss_rate: 1.0 - s0,
        gamma,
        fisher_factor: n2 * (s0 - s1_or_zero).powi(2) / (n2 * s0 + aw.norm_sqr() * s1_or_zero),
        plateau: error_rate_plateau_with_vote(n, phi, model, vote).unwrap_or(f64::NAN),
        trials: Some(trials),
        seed: Some(seed),
    };
    Ok(MonteCarloReadout { report, counts, p1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::PovmElement;
    use crate::qubitsim::{analytic_branch_pointers, run_protocol};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn q(x: f64) -> ReadoutErrorModel {
        ReadoutErrorModel::symmetric(x).unwrap()
    }

    #[test]
    fn error_rate_examples() {
        assert!((error_rate(1, 0.3, 0.7, &q(0.3)).unwrap() - 0.5).abs() < 1e-15);
        let e = error_rate(1, 0.01, 0.99, &q(0.05)).unwrap();
        assert!((e - 0.0495 / 0.059).abs() < 1e-12);
        assert!((e - 0.83898).abs() < 1e-5);
        let m = ReadoutErrorModel::new(0.1, 0.0).unwrap();
        assert_eq!(error_rate(3, 0.2, 0.8, &m).unwrap(), 0.0);
        assert!(error_rate(2, 0.5, 0.6, &q(0.1)).is_err());
        assert!(ReadoutErrorModel::new(1.0, 0.0).is_err());
    }

    #[test]
    fn scaling_examples() {
        let s = error_rate_scaling(6, c(30.0, 0.0), &q(0.05)).unwrap();
        assert!((s.exact / s.superexp_approx - 1.0).abs() < 0.01);
        assert_eq!(
            error_rate_scaling(3, c(30.0, 0.0), &q(0.0)).unwrap().exact,
            0.0
        );
        let rates: Vec<f64> = (2..=6)
            .map(|n| error_rate_scaling(n, c(30.0, 0.0), &q(0.05)).unwrap().exact)
            .collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn plateau_examples() {
        let p = error_rate_plateau(2, 0.01, &q(0.05)).unwrap();
        let want = 1.0 / (1.0 + 361.0 * 0.02f64.tan().powi(2));
        assert!((p - want).abs() < 1e-14);
        assert!((p - 0.8738).abs() < 1e-4);
        let m = ReadoutErrorModel::new(0.05, 0.0).unwrap();
        assert_eq!(error_rate_plateau(2, 0.01, &m).unwrap(), 0.0);
        // numeric limit of the error rate at a huge weak value
        let (n, phi) = (3, 0.01);
        let (e0, e1) = branch_etas(n, phi, c(1e6, 0.0), 0.0);
        let e = error_rate(n, e0 / (e0 + e1), e1 / (e0 + e1), &q(0.05)).unwrap();
        let p = error_rate_plateau(n, phi, &q(0.05)).unwrap();
        assert!((e / p - 1.0).abs() < 1e-6);
        assert!(error_rate_plateau(2, 0.0, &q(0.05)).is_err());
    }

    #[test]
    fn plateau_approaches_power_law() {
        let (phi, qq) = (1e-4, 0.05);
        let n = 12;
        let p = error_rate_plateau(n, phi, &q(qq)).unwrap();
        let approx = (phi * n as f64).powi(-2) * ((1.0 - qq) / qq).powi(-(n as i32));
        assert!((p / approx - 1.0).abs() < 1e-3);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(
            loss_rate(4, &ReadoutErrorModel::new(0.0, 0.2).unwrap(), None).unwrap(),
            0.0
        );
        assert!((loss_rate(3, &q(0.01), None).unwrap() - 0.029701).abs() < 1e-12);
        let v = MajorityVoteRule::new(3, 1).unwrap();
        assert!((loss_rate(3, &q(0.01), Some(&v)).unwrap() - 2.98e-4).abs() < 1e-12);
        assert!(MajorityVoteRule::new(3, 2).is_err());
        assert!(MajorityVoteRule::new(4, 2).unwrap().is_tie_threshold());
        let wrong = MajorityVoteRule::new(4, 1).unwrap();
        assert!(loss_rate(3, &q(0.01), Some(&wrong)).is_err());
    }

    #[test]
    fn gamma_examples() {
        let (e0, e1) = branch_etas(4, 0.01, c(30.0, 0.0), 0.0);
        assert_eq!(correction_factor(4, e0, e1, &q(0.0), None).unwrap(), 1.0);
        let g = correction_factor(4, e0, e1, &q(0.05), None).unwrap();
        let v0 = MajorityVoteRule::new(4, 0).unwrap();
        assert_eq!(
            correction_factor(4, e0, e1, &q(0.05), Some(&v0)).unwrap(),
            g
        );
        let p1 = e1 / (e0 + e1);
        let err = error_rate(4, e0 / (e0 + e1), p1, &q(0.05)).unwrap();
        assert!((g - (1.0 - err / p1)).abs() < 1e-12);
        assert!(correction_factor(4, 0.0, 0.0, &q(0.05), None).is_err());
    }

    #[test]
    fn shift_matches_branch_mixture() {
        let (n, phi, aw) = (3, 0.005, c(0.0, 30.0));
        let d = QuantumState::zero();
        let model = q(0.01);
        let shift = corrected_pointer_shift(n, phi, aw, &d, &model, None).unwrap();

        // Mixture oracle from the exact collapsed pointers.
        let (d0, d1) = analytic_branch_pointers(n, phi, aw, &d).unwrap();
        let xmean = |s: &QuantumState| {
            let a = s.amplitudes();
            2.0 * (a[0].conj() * a[1]).re / s.norm_sqr()
        };
        let (w0, w1) = (d0.norm_sqr(), d1.norm_sqr());
        let (p0, p1) = (w0 / (w0 + w1), w1 / (w0 + w1));
        let (s0, s1) = ((0.99f64).powi(3), (0.01f64).powi(3));
        let mix = (p0 * s0 * xmean(&d0) + p1 * s1 * xmean(&d1)) / (p0 * s0 + p1 * s1);
        assert!(
            (shift - (mix - xmean(&d))).abs() < 1e-12,
            "{shift} vs {mix}"
        );

        // Same shift from the gate-level simulation.
        let (b0, _) = run_protocol(n, phi, aw, &d).unwrap();
        assert!((xmean(&b0.pointer_state) - xmean(&d0)).abs() < 1e-10);

        assert_eq!(
            corrected_pointer_shift(n, phi, c(30.0, 0.0), &d, &model, None).unwrap(),
            0.0
        );
        let tiny = corrected_pointer_shift(2, 1e-5, c(0.0, 20.0), &d, &q(0.0), None).unwrap();
        assert!((tiny / (2.0 * 1e-5 * 20.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fisher_factor_examples() {
        assert_eq!(fisher_factor(4, c(30.0, 0.0), &q(0.0), None).unwrap(), 1.0);
        let f = |n, k, qq| {
            let v = MajorityVoteRule::new(n, k).unwrap();
            fisher_factor(n, c(30.0, 0.0), &q(qq), Some(&v)).unwrap()
        };
        assert!(f(6, 3, 0.05) < f(6, 2, 0.05));
        assert!(f(5, 2, 0.01) >= 0.999);
        let m = ReadoutErrorModel::new(0.02, 1e-3).unwrap();
        let ff = fisher_factor(5, c(30.0, 0.0), &m, None).unwrap();
        assert!((ff - (1.0 - loss_rate(5, &m, None).unwrap())).abs() < 1e-6);
    }

    fn sigma_y_povm() -> PovmSet {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let yp = QuantumState::new(vec![c(h, 0.0), c(0.0, h)], vec![2]).unwrap();
        let ym = QuantumState::new(vec![c(h, 0.0), c(0.0, -h)], vec![2]).unwrap();
        PovmSet::projective(&[yp, ym]).unwrap()
    }

    #[test]
    fn povm_factor_matches_closed_form() {
        let povm = sigma_y_povm();
        for (n, aw, qq, k) in [
            (3, c(30.0, 0.0), 0.05, None),
            (4, c(20.0, 5.0), 0.01, Some(2)),
        ] {
            let v = k.map(|k| MajorityVoteRule::new(n, k).unwrap());
            let d = QuantumState::bloch(0.9, 0.4);
            let r = povm_fisher_with_errors(n, aw, &d, &povm, &q(qq), v.as_ref()).unwrap();
            let f = fisher_factor(n, aw, &q(qq), v.as_ref()).unwrap();
            assert!((r.factor - f).abs() < 1e-8, "{} vs {f}", r.factor);
        }
        let r =
            povm_fisher_with_errors(3, c(30.0, 0.0), &QuantumState::zero(), &povm, &q(0.0), None)
                .unwrap();
        assert_eq!(r.i_phi, r.i_phi0);
        // p₀·4|A_w|²Var(σx) for the σy readout of |0⟩
        assert!((r.i_phi0 - 4.0 * 9.0 * 900.0 / 909.0).abs() < 1e-9);
    }

    #[test]
    fn branch_identities_at_zero() {
        // w₁ = w₀ and w₁' = −(n²/|A|²)w₀' at φ = 0, by finite differences
        let (n, aw) = (3, c(12.0, -4.0));
        let d = QuantumState::bloch(1.1, -0.6);
        let m = crate::qcore::CMatrix::from_rows(&[
            vec![c(0.6, 0.0), c(0.1, 0.2)],
            vec![c(0.1, -0.2), c(0.3, 0.0)],
        ])
        .unwrap();
        let e1 = PovmElement::new(m.clone()).unwrap();
        let e2 = PovmElement::new(&crate::qcore::CMatrix::identity(2) - &m).unwrap();
        let povm = PovmSet::new(vec![e1, e2]).unwrap();
        let h = 1e-5;
        let (w0p, w1p) = branch_outcome_probabilities(n, h, aw, &d, &povm).unwrap();
        let (w0m, w1m) = branch_outcome_probabilities(n, -h, aw, &d, &povm).unwrap();
        let (w0, w1) = branch_outcome_probabilities(n, 0.0, aw, &d, &povm).unwrap();
        let ratio = (n * n) as f64 / aw.norm_sqr();
        for j in 0..2 {
            assert!((w0[j] - w1[j]).abs() < 1e-10);
            let d0 = (w0p[j] - w0m[j]) / (2.0 * h);
            let d1 = (w1p[j] - w1m[j]) / (2.0 * h);
            assert!((d1 + ratio * d0).abs() < 1e-8);
        }
    }

    #[test]
    fn monte_carlo_basics() {
        let d = QuantumState::zero();
        let r = monte_carlo_readout(3, 0.01, c(30.0, 0.0), &d, &q(0.0), None, 50_000, 7).unwrap();
        assert_eq!(r.counts.accepted_from_one, 0);
        assert_eq!(r.report.error_rate, 0.0);
        assert_eq!(r.report.loss_rate, 0.0);
        let v = MajorityVoteRule::new(3, 1).unwrap();
        let a = monte_carlo_readout(3, 0.01, c(30.0, 0.0), &d, &q(0.05), Some(&v), 200_000, 11)
            .unwrap();
        let b = monte_carlo_readout(3, 0.01, c(30.0, 0.0), &d, &q(0.05), Some(&v), 200_000, 11)
            .unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_readout(3, 0.01, c(30.0, 0.0), &d, &q(0.05), None, 0, 1).is_err());
    }

    #[test]
    fn report_serializes_with_fixed_fields() {
        let r =
            analytic_report(3, 0.01, c(30.0, 0.0), &QuantumState::zero(), &q(0.05), None).unwrap();
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        for key in [
            "error_rate",
            "loss_rate",
            "gamma",
            "fisher_factor",
            "plateau",
            "trials",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["trials"].is_null());
    }

    #[test]
    fn complementarity() {
        let model = q(0.05);
        let mut last = (f64::INFINITY, -1.0);
        for n in 1..=8 {
            let plateau = error_rate_plateau(n, 0.01, &model).unwrap();
            let loss = loss_rate(n, &model, None).unwrap();
            assert!(plateau < last.0 && loss > last.1);
            last = (plateau, loss);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn gamma_identity_and_bounds(
            n in 1usize..12,
            kfrac in 0.0f64..=1.0,
            aw_re in -200.0f64..200.0,
            aw_im in -200.0f64..200.0,
            phi in 0.0f64..0.05,
            q01 in 0.0f64..0.5,
            q10 in 0.0f64..0.5,
        ) {
            let model = ReadoutErrorModel::new(q01, q10).unwrap();
            let aw = c(aw_re, aw_im);
            let (e0, e1) = branch_etas(n, phi, aw, 0.0);
            prop_assume!(e0 + e1 > 0.0);
            let (p0, p1) = (e0 / (e0 + e1), e1 / (e0 + e1));
            let g = correction_factor(n, e0, e1, &model, None).unwrap();
            if p1 > 1e-6 {
                let err = error_rate(n, p0, p1, &model).unwrap();
                prop_assert!((g - (1.0 - err / p1)).abs() < 1e-12 / p1);
            }
            let k = ((n / 2) as f64 * kfrac).floor() as usize;
            let v = MajorityVoteRule::new(n, k).unwrap();
            let gv = correction_factor(n, e0, e1, &model, Some(&v)).unwrap();
            let f = fisher_factor(n, aw, &model, Some(&v)).unwrap();
            prop_assert!(g.abs() <= 1.0 && gv.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn voting_never_loses_more(n in 2usize..14, kfrac in 0.0f64..1.0, qq in 1e-4f64..0.5) {
            let k = 1 + ((n / 2 - 1) as f64 * kfrac).round() as usize;
            let v = MajorityVoteRule::new(n, k).unwrap();
            let model = q(qq);
            prop_assert!(loss_rate(n, &model, Some(&v)).unwrap() < loss_rate(n, &model, None).unwrap());
        }
    }
}
