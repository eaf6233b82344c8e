//! n-copy collective observables and GHZ-type pre/postselection.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::qcore::{apply_to_factor, embed, matrix, CMatrix, HermitianObservable, QuantumState};

/// Largest joint state (amplitudes) handled by this module.
pub const MAX_JOINT_AMPLITUDES: usize = 1 << 16;
/// Largest dense collective observable (matrix elements).
pub const MAX_DENSE_ELEMENTS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub copies: usize,
    pub single_obs: HermitianObservable,
    /// Relative phase between the two GHZ branches.
    pub phase: f64,
}

impl EnsembleConfig {
    pub fn new(copies: usize, single_obs: HermitianObservable) -> Result<Self> {
        Self::with_phase(copies, single_obs, 0.0)
    }

    pub fn with_phase(copies: usize, single_obs: HermitianObservable, phase: f64) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidParameter("copies must be at least 1".into()));
        }
        let d = single_obs.dim();
        let joint = joint_dim(d, copies).ok_or(Error::DimensionTooLarge {
            dim: usize::MAX,
            limit: MAX_JOINT_AMPLITUDES,
        })?;
        if joint > MAX_JOINT_AMPLITUDES {
            return Err(Error::DimensionTooLarge {
                dim: joint,
                limit: MAX_JOINT_AMPLITUDES,
            });
        }
        Ok(Self {
            copies,
            single_obs,
            phase,
        })
    }

    pub fn joint_dim(&self) -> usize {
        self.single_obs.dim().pow(self.copies as u32)
    }

    pub fn joint_dims(&self) -> Vec<usize> {
        vec![self.single_obs.dim(); self.copies]
    }
}

fn joint_dim(d: usize, n: usize) -> Option<usize> {
    (0..n).try_fold(1usize, |acc, _| acc.checked_mul(d))
}

/// `Σₖ I⊗…⊗A⊗…⊗I` as a dense matrix.
pub fn collective_observable(cfg: &EnsembleConfig) -> Result<HermitianObservable> {
    let dim = cfg.joint_dim();
    if dim * dim > MAX_DENSE_ELEMENTS {
        return Err(Error::DimensionTooLarge {
            dim,
            limit: (MAX_DENSE_ELEMENTS as f64).sqrt() as usize,
        });
    }
    let dims = cfg.joint_dims();
    let mut total = CMatrix::zeros(dim);
    for k in 0..cfg.copies {
        total = &total + &embed(cfg.single_obs.matrix(), &dims, k)?;
    }
    HermitianObservable::with_dims(total, dims)
}

/// `A⁽ⁿ⁾|ψ⟩` without forming the collective matrix.
pub fn collective_apply(cfg: &EnsembleConfig, state: &QuantumState) -> Result<QuantumState> {
    if state.dims() != cfg.joint_dims().as_slice() {
        return Err(Error::InvalidLayout(format!(
            "state dims {:?} do not match {} copies of dimension {}",
            state.dims(),
            cfg.copies,
            cfg.single_obs.dim()
        )));
    }
    let mut acc = vec![C64::new(0.0, 0.0); state.dim()];
    for k in 0..cfg.copies {
        let term = apply_to_factor(state, cfg.single_obs.matrix(), k)?;
        acc.iter_mut()
            .zip(term.amplitudes())
            .for_each(|(a, t)| *a += t);
    }
    QuantumState::new(acc, state.dims().to_vec())
}

/// Mean and variance of `A⁽ⁿ⁾` in `state`.
pub fn collective_moments(cfg: &EnsembleConfig, state: &QuantumState) -> Result<(f64, f64)> {
    let applied = collective_apply(cfg, state)?;
    let mean = matrix::inner(state.amplitudes(), applied.amplitudes()).re;
    let second = applied.norm_sqr();
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// Extreme single-copy eigenvectors used by the GHZ constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    pub a_max: f64,
    pub a_min: f64,
    pub all_max: QuantumState,
    pub all_min: QuantumState,
    /// An extreme eigenvalue was degenerate and the tie-break was applied.
    pub degenerate: bool,
}

pub fn extremes(cfg: &EnsembleConfig) -> Result<Extremes> {
    let s = cfg.single_obs.spectrum()?;
    if s.delta < crate::qcore::eigen::DEGENERACY_GAP {
        return Err(Error::ZeroVariance);
    }
    Ok(Extremes {
        a_max: s.a_max,
        a_min: s.a_min,
        all_max: s.v_max.power(cfg.copies)?,
        all_min: s.v_min.power(cfg.copies)?,
        degenerate: s.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhzState {
    pub state: QuantumState,
    pub degenerate: bool,
}

/// `(|a_max⟩^⊗n + e^{iθ}|a_min⟩^⊗n)/√2`
pub fn ghz_initial_state(cfg: &EnsembleConfig) -> Result<GhzState> {
    let ex = extremes(cfg)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let state = ex
        .all_max
        .combine(C64::new(h, 0.0), &ex.all_min, C64::from_polar(h, cfg.phase))?;
    Ok(GhzState {
        state,
        degenerate: ex.degenerate,
    })
}

/// Postselected state giving collective weak value `aw` with maximal
/// probability from the GHZ initial state.
pub fn optimal_entangled_postselection(cfg: &EnsembleConfig, aw: C64) -> Result<QuantumState> {
    let ex = extremes(cfg)?;
    let n = cfg.copies as f64;
    let c_max = -(C64::new(n * ex.a_min, 0.0) - aw.conj());
    let c_min = C64::from_polar(1.0, cfg.phase) * (C64::new(n * ex.a_max, 0.0) - aw.conj());
    ex.all_max.combine(c_max, &ex.all_min, c_min)?.normalized()
}

/// Postselected state with GHZ overlap probability `p_s` and the largest
/// real collective weak value.
pub fn fixed_probability_entangled_postselection(
    cfg: &EnsembleConfig,
    p_s: f64,
) -> Result<QuantumState> {
    if !(p_s > 0.0 && p_s <= 1.0) {
        return Err(Error::ProbabilityOutOfRange(p_s));
    }
    let ex = extremes(cfg)?;
    let (a, b) = ((p_s / 2.0).sqrt(), ((1.0 - p_s) / 2.0).sqrt());
    ex.all_max.combine(
        C64::new(a + b, 0.0),
        &ex.all_min,
        C64::from_polar(a - b, cfg.phase),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductBaseline {
    /// `1 − (1 − p1)ⁿ`
    pub exact: f64,
    /// `n·p1`
    pub linear: f64,
}

/// Probability that at least one of `n` independent copies is postselected.
pub fn product_baseline_probability(n: usize, p1: f64) -> Result<ProductBaseline> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::ProbabilityOutOfRange(p1));
    }
    Ok(ProductBaseline {
        exact: 1.0 - (1.0 - p1).powi(n as i32),
        linear: n as f64 * p1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{variance, ONE, ZERO};
    use crate::weakvalue::{optimal_postselection_for_weak_value, weak_value};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sz_cfg(n: usize) -> EnsembleConfig {
        EnsembleConfig::new(n, HermitianObservable::sigma_z()).unwrap()
    }

    fn random_observable(rng: &mut ChaCha8Rng, d: usize) -> HermitianObservable {
        let raw = CMatrix::from_fn(d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        HermitianObservable::new(&raw + &raw.adjoint()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> QuantumState {
        let total = dims.iter().product();
        let amps = (0..total)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        QuantumState::new(amps, dims).unwrap().normalized().unwrap()
    }

    #[test]
    fn collective_examples() {
        let one = collective_observable(&sz_cfg(1)).unwrap();
        assert_eq!(one.matrix(), HermitianObservable::sigma_z().matrix());
        let two = collective_observable(&sz_cfg(2)).unwrap();
        assert_eq!(two.matrix(), &CMatrix::diagonal(&[2.0, 0.0, 0.0, -2.0]));
        let s = collective_observable(&sz_cfg(3))
            .unwrap()
            .spectrum()
            .unwrap();
        assert_eq!((s.a_max, s.a_min), (3.0, -3.0));
        assert!(matches!(
            collective_observable(&sz_cfg(9)),
            Err(Error::DimensionTooLarge { .. })
        ));
        assert!(EnsembleConfig::new(17, HermitianObservable::sigma_z()).is_err());
    }

    #[test]
    fn ghz_examples() {
        let g1 = ghz_initial_state(&sz_cfg(1)).unwrap();
        assert!(g1.state.fidelity(&QuantumState::plus()).unwrap() > 1.0 - 1e-15);
        let cfg = sz_cfg(3);
        let g3 = ghz_initial_state(&cfg).unwrap();
        let v = variance(&g3.state, &collective_observable(&cfg).unwrap()).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        for n in 1..=10 {
            let cfg = sz_cfg(n);
            let (_, v) = collective_moments(&cfg, &ghz_initial_state(&cfg).unwrap().state).unwrap();
            assert!((v - (n * n) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_extremes_are_flagged() {
        let a = HermitianObservable::diagonal(&[1.0, 1.0, -1.0]);
        let cfg = EnsembleConfig::new(2, a).unwrap();
        let g = ghz_initial_state(&cfg).unwrap();
        assert!(g.degenerate);
        let (_, v) = collective_moments(&cfg, &g.state).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
        let flat = EnsembleConfig::new(2, HermitianObservable::identity(2)).unwrap();
        assert_eq!(ghz_initial_state(&flat), Err(Error::ZeroVariance));
    }

    #[test]
    fn entangled_postselection_n2() {
        let cfg = sz_cfg(2);
        let f = optimal_entangled_postselection(&cfg, C64::new(20.0, 0.0)).unwrap();
        let norm = (22f64 * 22.0 + 18.0 * 18.0).sqrt();
        let expected = [
            C64::new(22.0 / norm, 0.0),
            ZERO,
            ZERO,
            C64::new(-18.0 / norm, 0.0),
        ];
        for (a, b) in f.amplitudes().iter().zip(&expected) {
            assert!((a - b).norm() < 1e-14);
        }
        let ghz = ghz_initial_state(&cfg).unwrap().state;
        let w = weak_value(&ghz, &f, &collective_observable(&cfg).unwrap()).unwrap();
        assert!((w.value - C64::new(20.0, 0.0)).norm() < 1e-9);
        let p = f.inner(&ghz).unwrap().norm_sqr();
        assert!((p * 400.0 / 4.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn entangled_postselection_limit() {
        let cfg = sz_cfg(3);
        let f = optimal_entangled_postselection(&cfg, C64::new(1e9, 0.0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = extremes(&cfg).unwrap();
        let limit = e
            .all_max
            .combine(C64::new(h, 0.0), &e.all_min, C64::new(-h, 0.0))
            .unwrap();
        assert!(f.fidelity(&limit).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn fixed_probability_examples() {
        let cfg = sz_cfg(2);
        let ghz = ghz_initial_state(&cfg).unwrap().state;
        let f1 = fixed_probability_entangled_postselection(&cfg, 1.0).unwrap();
        assert!(f1.fidelity(&ghz).unwrap() > 1.0 - 1e-15);
        let half = fixed_probability_entangled_postselection(&cfg, 0.5).unwrap();
        assert!((half.amplitudes()[0] - ONE).norm() < 1e-15);
        assert!(half.amplitudes()[3].norm() < 1e-15);
        let f = fixed_probability_entangled_postselection(&cfg, 0.01).unwrap();
        assert!((f.inner(&ghz).unwrap().norm_sqr() - 0.01).abs() < 1e-12);
        let w = weak_value(&ghz, &f, &collective_observable(&cfg).unwrap()).unwrap();
        assert!((w.norm() - 2.0 * 99f64.sqrt()).abs() < 1e-10);
        assert!(fixed_probability_entangled_postselection(&cfg, 0.0).is_err());
    }

    #[test]
    fn product_baseline_examples() {
        let b = product_baseline_probability(1, 0.02).unwrap();
        assert!((b.exact - 0.02).abs() < 1e-15 && b.linear == 0.02);
        let b = product_baseline_probability(5, 0.01).unwrap();
        assert!((b.exact - 0.0490099501).abs() < 1e-10);
        assert!((b.linear - 0.05).abs() < 1e-17);
    }

    #[test]
    fn entangled_gain_is_order_n() {
        // GHZ vs independent copies, all postselected for the same weak value
        let aw = 100.0;
        let single = optimal_postselection_for_weak_value(
            &QuantumState::plus(),
            &HermitianObservable::sigma_z(),
            C64::new(aw, 0.0),
        )
        .unwrap();
        for n in 2..=5 {
            let cfg = sz_cfg(n);
            let ghz = ghz_initial_state(&cfg).unwrap().state;
            let f = optimal_entangled_postselection(&cfg, C64::new(aw, 0.0)).unwrap();
            let p_ent = f.inner(&ghz).unwrap().norm_sqr();
            let p_prod = product_baseline_probability(n, single.p_max)
                .unwrap()
                .linear;
            let ratio = p_ent / p_prod;
            assert!((ratio / n as f64 - 1.0).abs() < 0.01, "n={n} ratio={ratio}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn quadratic_scaling(seed in any::<u64>(), n in 1usize..=8, kind in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = match kind {
                0 => HermitianObservable::sigma_z(),
                1 => random_observable(&mut rng, 2),
                _ => random_observable(&mut rng, 3),
            };
            let cfg = EnsembleConfig::new(n, a).unwrap();
            let ex = extremes(&cfg).unwrap();
            let (_, v) = collective_moments(&cfg, &ghz_initial_state(&cfg).unwrap().state).unwrap();
            let expected = (n * n) as f64 * (ex.a_max - ex.a_min).powi(2) / 4.0;
            prop_assert!((v - expected).abs() < 1e-10 * expected.max(1.0));
        }

        #[test]
        fn product_variance_is_additive(seed in any::<u64>(), n in 1usize..=6, d in 2usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_observable(&mut rng, d);
            let cfg = EnsembleConfig::new(n, a.clone()).unwrap();
            let singles: Vec<QuantumState> = (0..n).map(|_| random_state(&mut rng, vec![d])).collect();
            let joint = singles[1..].iter().fold(singles[0].clone(), |acc, s| acc.tensor(s));
            let (_, v) = collective_moments(&cfg, &joint).unwrap();
            let sum: f64 = singles.iter().map(|s| variance(s, &a).unwrap()).sum();
            prop_assert!((v - sum).abs() < 1e-10);
        }

        #[test]
        fn entangled_weak_value_fidelity(n in 1usize..=5, scale in 5.0f64..50.0, angle in 0.0f64..std::f64::consts::TAU, theta in 0.0f64..std::f64::consts::TAU) {
            let cfg = EnsembleConfig::with_phase(n, HermitianObservable::sigma_z(), theta).unwrap();
            let aw = C64::from_polar(scale * n as f64, angle);
            let f = optimal_entangled_postselection(&cfg, aw).unwrap();
            let ghz = ghz_initial_state(&cfg).unwrap().state;
            let w = weak_value(&ghz, &f, &collective_observable(&cfg).unwrap()).unwrap();
            prop_assert!((w.value - aw).norm() < 1e-9 * aw.norm());
        }
    }

    #[test]
    fn variance_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=4 {
            let a = random_observable(&mut rng, 2);
            let cfg = EnsembleConfig::new(n, a).unwrap();
            let ex = extremes(&cfg).unwrap();
            let bound = (n * n) as f64 * (ex.a_max - ex.a_min).powi(2) / 4.0;
            for _ in 0..10_000 / 3 + 1 {
                let s = random_state(&mut rng, cfg.joint_dims());
                let (_, v) = collective_moments(&cfg, &s).unwrap();
                assert!(v <= bound + 1e-9);
            }
        }
    }
}
