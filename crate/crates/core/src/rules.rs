//! Single-step plasticity rules acting on an [`AssociativeState`].
//!
//! All rules write `alpha f(k)^T (...)` into `S`; they differ in what they
//! subtract first:
//!
//! | rule    | update                                                   |
//! |---------|----------------------------------------------------------|
//! | hebbian | `S + a f(k)^T g(v)`                                      |
//! | decay   | `gamma S + a f(k)^T g(v)`                                |
//! | delta   | `S + a f(k)^T (g(v) - f(k) S)`                           |
//! | oja     | `S (I - a diag(g(v)^2)) + a f(k)^T g(v)`                 |
//! | bcm     | `S + a f(k)^T psi`, `psi_j = g_j (g_j - theta_j)`        |
//!
//! None of the rules normalize `k`; the delta rule only overwrites exactly
//! when `|f(k)| = 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::kernels::{AssociativeState, HeadConfig};
use crate::linalg::{rank_one_update, vec_mat_into, RowVector};

/// Default BCM threshold time constant (in steps).
pub const DEFAULT_BCM_TAU: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlasticityRule {
    Hebbian,
    /// Exponential forgetting with factor `gamma` in (0, 1).
    Decay {
        gamma: f64,
    },
    Delta,
    Oja,
    /// Sliding-threshold rule; `tau` is the threshold's EMA time constant.
    Bcm {
        tau: f64,
    },
}

impl PlasticityRule {
    pub fn decay(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self::Decay { gamma })
    }

    pub fn bcm(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self::Bcm { tau })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hebbian => "hebbian",
            Self::Decay { .. } => "decay",
            Self::Delta => "delta",
            Self::Oja => "oja",
            Self::Bcm { .. } => "bcm",
        }
    }

    /// Apply one update. BCM keeps its thresholds inside the state and
    /// creates them (all zero) on first use.
    pub fn step(
        &self,
        state: &mut AssociativeState,
        k: &RowVector,
        v: &RowVector,
        cfg: &HeadConfig,
    ) -> Result<()> {
        match *self {
            Self::Hebbian => step_hebbian(state, k, v, cfg),
            Self::Decay { gamma } => step_decay(state, k, v, cfg, gamma),
            Self::Delta => step_delta(state, k, v, cfg),
            Self::Oja => step_oja(state, k, v, cfg),
            Self::Bcm { tau } => {
                let mut theta = match state.bcm.take() {
                    Some(t) => t,
                    None => BcmThresholdState::zeros(state.d_v())?,
                };
                let res = step_bcm(state, &mut theta, k, v, cfg, tau);
                state.bcm = Some(theta);
                res
            }
        }
    }
}

/// Per-output-neuron BCM thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct BcmThresholdState {
    theta: Vec<f64>,
}

impl BcmThresholdState {
    pub fn zeros(d_v: usize) -> Result<Self> {
        if d_v == 0 {
            return Err(invalid("BCM thresholds need d_v >= 1"));
        }
        Ok(Self {
            theta: vec![0.0; d_v],
        })
    }

    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(invalid("BCM thresholds must be finite and non-negative"));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(invalid("decay factor gamma must lie in (0, 1)"))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid("BCM time constant tau must be positive"))
    }
}

/// `S <- S + alpha f(k)^T g(v)`.
pub fn step_hebbian(
    state: &mut AssociativeState,
    k: &RowVector,
    v: &RowVector,
    cfg: &HeadConfig,
) -> Result<()> {
    state.associate(k, v, cfg)
}

/// `S <- gamma S + alpha f(k)^T g(v)`.
pub fn step_decay(
    state: &mut AssociativeState,
    k: &RowVector,
    v: &RowVector,
    cfg: &HeadConfig,
    gamma: f64,
) -> Result<()> {
    check_gamma(gamma)?;
    state.check_pair("step_decay", k, v)?;
    let s = state.matrix_mut();
    s.as_mut_slice().iter_mut().for_each(|x| *x *= gamma);
    let fk = cfg.f.apply_slice(k.as_slice());
    let gv = cfg.g.apply_slice(v.as_slice());
    rank_one_update(s, cfg.alpha, &fk, &gv);
    state.advance();
    Ok(())
}

/// Direct sum `alpha * sum_j gamma^(n-j) f(k_j)^T g(v_j)`.
pub fn decay_closed_form(
    d_k: usize,
    d_v: usize,
    keys: &[RowVector],
    values: &[RowVector],
    cfg: &HeadConfig,
    gamma: f64,
) -> Result<AssociativeState> {
    check_gamma(gamma)?;
    check_dim("decay_closed_form pairs", keys.len(), values.len())?;
    let mut state = AssociativeState::new(d_k, d_v)?;
    let n = keys.len();
    for (j, (k, v)) in keys.iter().zip(values).enumerate() {
        state.check_pair("decay_closed_form", k, v)?;
        let weight = cfg.alpha * libm::pow(gamma, (n - 1 - j) as f64);
        let fk = cfg.f.apply_slice(k.as_slice());
        let gv = cfg.g.apply_slice(v.as_slice());
        rank_one_update(state.matrix_mut(), weight, &fk, &gv);
        state.advance();
    }
    Ok(state)
}

/// `S <- S + alpha f(k)^T [g(v) - f(k) S]`.
pub fn step_delta(
    state: &mut AssociativeState,
    k: &RowVector,
    v: &RowVector,
    cfg: &HeadConfig,
) -> Result<()> {
    state.check_pair("step_delta", k, v)?;
    let fk = cfg.f.apply_slice(k.as_slice());
    let mut correction = cfg.g.apply_slice(v.as_slice());
    let mut prediction = vec![0.0; state.d_v()];
    vec_mat_into(&fk, state.matrix(), &mut prediction);
    correction
        .iter_mut()
        .zip(&prediction)
        .for_each(|(c, p)| *c -= p);
    rank_one_update(state.matrix_mut(), cfg.alpha, &fk, &correction);
    state.advance();
    Ok(())
}

/// `S <- S (I - alpha diag(g(v)^2)) + alpha f(k)^T g(v)`.
pub fn step_oja(
    state: &mut AssociativeState,
    k: &RowVector,
    v: &RowVector,
    cfg: &HeadConfig,
) -> Result<()> {
    state.check_pair("step_oja", k, v)?;
    let fk = cfg.f.apply_slice(k.as_slice());
    let gv = cfg.g.apply_slice(v.as_slice());
    let shrink: Vec<f64> = gv.iter().map(|g| 1.0 - cfg.alpha * g * g).collect();
    let s = state.matrix_mut();
    let cols = s.cols();
    for row in s.as_mut_slice().chunks_exact_mut(cols) {
        row.iter_mut().zip(&shrink).for_each(|(x, c)| *x *= c);
    }
    rank_one_update(s, cfg.alpha, &fk, &gv);
    state.advance();
    Ok(())
}

/// BCM update followed by the threshold EMA
/// `theta_j <- (1 - 1/tau) theta_j + (1/tau) g_j^2`.
pub fn step_bcm(
    state: &mut AssociativeState,
    thresholds: &mut BcmThresholdState,
    k: &RowVector,
    v: &RowVector,
    cfg: &HeadConfig,
    tau: f64,
) -> Result<()> {
    check_tau(tau)?;
    state.check_pair("step_bcm", k, v)?;
    check_dim("step_bcm thresholds", state.d_v(), thresholds.theta.len())?;
    let fk = cfg.f.apply_slice(k.as_slice());
    let gv = cfg.g.apply_slice(v.as_slice());
    let psi: Vec<f64> = gv
        .iter()
        .zip(&thresholds.theta)
        .map(|(g, t)| bcm_psi(*g, *t))
        .collect();
    rank_one_update(state.matrix_mut(), cfg.alpha, &fk, &psi);
    let rate = 1.0 / tau;
    thresholds
        .theta
        .iter_mut()
        .zip(&gv)
        .for_each(|(t, g)| *t = (1.0 - rate) * *t + rate * g * g);
    state.advance();
    Ok(())
}

/// `x (x - theta)`: negative (depression) between 0 and theta, positive above.
#[inline]
pub fn bcm_psi(x: f64, theta: f64) -> f64 {
    x * (x - theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{hebbian_accumulate, retrieve};
    use crate::linalg::{outer_product, DenseMatrix};
    use crate::sampling::sample_unit_sphere;
    use proptest::prelude::*;

    fn rv(x: &[f64]) -> RowVector {
        RowVector::from_slice(x).unwrap()
    }

    fn plain() -> HeadConfig {
        HeadConfig::plain()
    }

    #[test]
    fn hebbian_steps() {
        let keys = sample_unit_sphere(4, 6, 1).unwrap();
        let values = sample_unit_sphere(3, 6, 2).unwrap();
        let mut st = AssociativeState::new(4, 3).unwrap();
        step_hebbian(&mut st, &keys[0], &values[0], &plain()).unwrap();
        assert_eq!(st.matrix(), &outer_product(&keys[0], &values[0]));
        for j in 1..6 {
            step_hebbian(&mut st, &keys[j], &values[j], &plain()).unwrap();
        }
        let acc = hebbian_accumulate(4, 3, &keys, &values, &plain()).unwrap();
        assert_eq!(st, acc);

        let mut cfg2 = plain();
        cfg2.alpha = 2.0;
        let mut a = AssociativeState::new(4, 3).unwrap();
        let mut b = AssociativeState::new(4, 3).unwrap();
        step_hebbian(&mut a, &keys[0], &values[0], &plain()).unwrap();
        step_hebbian(&mut b, &keys[0], &values[0], &cfg2).unwrap();
        assert_eq!(b.matrix(), &a.matrix().scale(2.0));
    }

    #[test]
    fn decay_two_steps() {
        let k1 = rv(&[1.0, 0.0]);
        let k2 = rv(&[0.0, 1.0]);
        let v = rv(&[1.0]);
        let mut st = AssociativeState::new(2, 1).unwrap();
        step_decay(&mut st, &k1, &v, &plain(), 0.5).unwrap();
        step_decay(&mut st, &k2, &v, &plain(), 0.5).unwrap();
        assert_eq!(st.matrix().as_slice(), &[0.5, 1.0]);
        assert_eq!(st.step_index(), 2);
    }

    #[test]
    fn decay_tiny_gamma_keeps_latest() {
        let keys = sample_unit_sphere(3, 4, 5).unwrap();
        let values = sample_unit_sphere(3, 4, 6).unwrap();
        let mut st = AssociativeState::new(3, 3).unwrap();
        for j in 0..4 {
            step_decay(&mut st, &keys[j], &values[j], &plain(), 1e-300).unwrap();
        }
        let last = outer_product(&keys[3], &values[3]);
        assert!(st.matrix().max_abs_diff(&last).unwrap() < 1e-250);
    }

    #[test]
    fn decay_rejects_gamma_outside_unit_interval() {
        let mut st = AssociativeState::new(1, 1).unwrap();
        for g in [0.0, 1.0, -0.3, 1.5] {
            assert!(step_decay(&mut st, &rv(&[1.0]), &rv(&[1.0]), &plain(), g).is_err());
            assert!(PlasticityRule::decay(g).is_err());
        }
    }

    #[test]
    fn decay_closed_form_cases() {
        let k = rv(&[0.6, 0.8]);
        let v = rv(&[2.0, -1.0]);
        let one = decay_closed_form(2, 2, std::slice::from_ref(&k), std::slice::from_ref(&v), &plain(), 0.3).unwrap();
        assert_eq!(one.matrix(), &outer_product(&k, &v));

        let n = 10;
        let gamma: f64 = 0.9;
        let same = decay_closed_form(
            2,
            2,
            &vec![k.clone(); n],
            &vec![v.clone(); n],
            &plain(),
            gamma,
        )
        .unwrap();
        let geometric = (1.0 - gamma.powi(n as i32)) / (1.0 - gamma);
        let expect = outer_product(&k, &v).scale(geometric);
        assert!(same.matrix().max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn decay_recurrence_matches_closed_form_n32() {
        let keys = sample_unit_sphere(8, 32, 11).unwrap();
        let values = sample_unit_sphere(5, 32, 12).unwrap();
        let mut st = AssociativeState::new(8, 5).unwrap();
        for (k, v) in keys.iter().zip(&values) {
            step_decay(&mut st, k, v, &plain(), 0.95).unwrap();
        }
        let closed = decay_closed_form(8, 5, &keys, &values, &plain(), 0.95).unwrap();
        assert!(st.matrix().max_abs_diff(closed.matrix()).unwrap() <= 1e-12);
    }

    #[test]
    fn hebbian_is_gamma_to_one_limit() {
        let keys = sample_unit_sphere(6, 16, 21).unwrap();
        let values = sample_unit_sphere(6, 16, 22).unwrap();
        let mut st = AssociativeState::new(6, 6).unwrap();
        for (k, v) in keys.iter().zip(&values) {
            step_decay(&mut st, k, v, &plain(), 1.0 - 1e-12).unwrap();
        }
        let heb = hebbian_accumulate(6, 6, &keys, &values, &plain()).unwrap();
        let rel = st.matrix().max_abs_diff(heb.matrix()).unwrap() / heb.matrix().max_abs();
        assert!(rel <= 1e-9, "{rel}");
    }

    #[test]
    fn delta_overwrites_and_is_idempotent() {
        let k = rv(&[0.6, 0.0, 0.8]);
        let v1 = rv(&[1.0, 2.0]);
        let v2 = rv(&[-3.0, 0.5]);
        let mut st = AssociativeState::new(3, 2).unwrap();
        step_delta(&mut st, &k, &v1, &plain()).unwrap();
        let mut heb = AssociativeState::new(3, 2).unwrap();
        step_hebbian(&mut heb, &k, &v1, &plain()).unwrap();
        assert_eq!(st.matrix(), heb.matrix());

        step_delta(&mut st, &k, &v2, &plain()).unwrap();
        let r = retrieve(&k, &st, &plain()).unwrap();
        assert!(r.max_abs_diff(&v2).unwrap() < 1e-12);

        let before = st.matrix().clone();
        step_delta(&mut st, &k, &v2, &plain()).unwrap();
        assert!(st.matrix().max_abs_diff(&before).unwrap() < 1e-15);
    }

    #[test]
    fn oja_examples() {
        let k = rv(&[1.0, 2.0]);
        let v = rv(&[0.5, 0.0, -1.0]);
        let mut st = AssociativeState::new(2, 3).unwrap();
        step_oja(&mut st, &k, &v, &plain()).unwrap();
        assert_eq!(st.matrix(), &outer_product(&k, &v));

        let prior = DenseMatrix::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 4.0, -1.5]).unwrap();
        let mut cfg = plain();
        cfg.alpha = 0.1;
        let mut st = AssociativeState::from_matrix(prior.clone());
        step_oja(&mut st, &k, &v, &cfg).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let expect = prior.get(i, j) * (1.0 - 0.1 * v[j] * v[j]) + 0.1 * k[i] * v[j];
                assert!((st.matrix().get(i, j) - expect).abs() < 1e-15);
            }
        }
        // g(v)[1] = 0: column untouched apart from the (zero) additive term
        assert_eq!(st.matrix().get(0, 1), prior.get(0, 1));
        assert_eq!(st.matrix().get(1, 1), prior.get(1, 1));
    }

    #[test]
    fn bcm_examples() {
        let k = rv(&[1.0, -1.0]);
        let v = rv(&[0.5, 2.0]);
        // at threshold: no change in S
        let mut st = AssociativeState::new(2, 2).unwrap();
        let mut th = BcmThresholdState::new(vec![0.5, 2.0]).unwrap();
        step_bcm(&mut st, &mut th, &k, &v, &plain(), 32.0).unwrap();
        assert_eq!(st.matrix().max_abs(), 0.0);
        // theta moved toward v^2
        assert!((th.theta()[0] - (0.5 * 31.0 / 32.0 + 0.25 / 32.0)).abs() < 1e-15);

        // zero threshold: psi = v^2
        let mut st = AssociativeState::new(2, 2).unwrap();
        let mut th = BcmThresholdState::zeros(2).unwrap();
        step_bcm(&mut st, &mut th, &k, &v, &plain(), 32.0).unwrap();
        let sq = rv(&[0.25, 4.0]);
        assert_eq!(st.matrix(), &outer_product(&k, &sq));

        assert!(bcm_psi(0.3, 0.5) < 0.0);
        assert!(bcm_psi(0.7, 0.5) > 0.0);
        assert_eq!(bcm_psi(0.5, 0.5), 0.0);

        let mut th = BcmThresholdState::zeros(2).unwrap();
        assert!(step_bcm(&mut st, &mut th, &k, &v, &plain(), 0.0).is_err());
        assert!(PlasticityRule::bcm(-1.0).is_err());
    }

    #[test]
    fn rule_dispatch_tracks_bcm_state() {
        let rule = PlasticityRule::bcm(4.0).unwrap();
        let mut st = AssociativeState::new(2, 2).unwrap();
        rule.step(&mut st, &rv(&[1.0, 0.0]), &rv(&[1.0, 0.0]), &plain())
            .unwrap();
        assert_eq!(st.bcm_thresholds().unwrap().theta(), &[0.25, 0.0]);
        assert_eq!(st.step_index(), 1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut st = AssociativeState::new(2, 2).unwrap();
        let k = rv(&[1.0]);
        let v = rv(&[1.0, 2.0]);
        for rule in [
            PlasticityRule::Hebbian,
            PlasticityRule::Decay { gamma: 0.5 },
            PlasticityRule::Delta,
            PlasticityRule::Oja,
            PlasticityRule::Bcm { tau: 2.0 },
        ] {
            assert!(
                rule.step(&mut st, &k, &v, &plain()).is_err(),
                "{}",
                rule.name()
            );
        }
        assert_eq!(st.step_index(), 0);
    }

    proptest! {
        #[test]
        fn hebbian_state_is_order_independent(seed in 0u64..1000, n in 1usize..12) {
            let keys = sample_unit_sphere(4, n, seed).unwrap();
            let values = sample_unit_sphere(3, n, seed + 1).unwrap();
            let fwd = hebbian_accumulate(4, 3, &keys, &values, &plain()).unwrap();
            let rk: Vec<_> = keys.iter().rev().cloned().collect();
            let rvv: Vec<_> = values.iter().rev().cloned().collect();
            let rev = hebbian_accumulate(4, 3, &rk, &rvv, &plain()).unwrap();
            prop_assert!(fwd.matrix().max_abs_diff(rev.matrix()).unwrap() <= 1e-14);
        }

        #[test]
        fn delta_overwrite_from_any_prior(
            prior in prop::collection::vec(-5.0f64..5.0, 12),
            seed in 0u64..10_000,
        ) {
            let k = &sample_unit_sphere(4, 1, seed).unwrap()[0];
            let v = rv(&prior[..3]).scale(0.7);
            let mut st = AssociativeState::from_matrix(DenseMatrix::new(4, 3, prior.clone()).unwrap());
            step_delta(&mut st, k, &v, &plain()).unwrap();
            let r = retrieve(k, &st, &plain()).unwrap();
            prop_assert!(r.max_abs_diff(&v).unwrap() <= 1e-12);
        }

        #[test]
        fn rules_stay_finite(seed in 0u64..500, alpha in 0.01f64..1.0, which in 0usize..5) {
            let rule = [
                PlasticityRule::Hebbian,
                PlasticityRule::Decay { gamma: 0.9 },
                PlasticityRule::Delta,
                PlasticityRule::Oja,
                PlasticityRule::Bcm { tau: 16.0 },
            ][which];
            let cfg = HeadConfig::new(
                crate::ActivationKind::Identity,
                crate::ActivationKind::Identity,
                alpha,
                crate::NormKind::None,
            ).unwrap();
            let keys = sample_unit_sphere(6, 300, seed).unwrap();
            let values = sample_unit_sphere(6, 300, seed ^ 0xff).unwrap();
            let mut st = AssociativeState::new(6, 6).unwrap();
            for (k, v) in keys.iter().zip(&values) {
                rule.step(&mut st, k, v, &cfg).unwrap();
            }
            prop_assert!(st.matrix().is_finite());
            prop_assert_eq!(st.step_index(), 300);
        }
    }
}
