//! Elementwise activations (the `f`, `g`, `phi` maps) and output normalization.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::linalg::RowVector;

/// Stabilizer added to the mean square in rms and layer normalization.
pub const NORM_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ActivationKind {
    Identity,
    Relu,
    /// `x + 1` for `x >= 0`, `exp(x)` otherwise. Strictly positive.
    #[default]
    EluPlusOne,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [Self::Identity, Self::Relu, Self::EluPlusOne];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            // exp underflows to 0 below about -745; clamp keeps the output positive
            Self::EluPlusOne if x >= 0.0 => x + 1.0,
            Self::EluPlusOne => libm::exp(x).max(f64::MIN_POSITIVE),
        }
    }

    pub(crate) fn apply_slice(self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.eval(v)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
            Self::EluPlusOne => "elu-plus-one",
        }
    }
}

/// Output normalization applied to a retrieved vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NormKind {
    None,
    #[default]
    Rms,
    /// Zero mean, unit variance; no affine parameters.
    Layer,
    /// Kernelized-attention denominator `phi(q) . sum phi(k)`. Only meaningful
    /// inside linear attention, where the running key sum is available.
    Denominator,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [Self::None, Self::Rms, Self::Layer, Self::Denominator];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Rms => "rms",
            Self::Layer => "layer",
            Self::Denominator => "denominator",
        }
    }
}

pub fn apply_activation(kind: ActivationKind, x: &RowVector) -> RowVector {
    RowVector::from_vec_unchecked(kind.apply_slice(x.as_slice()))
}

/// Normalize a retrieved vector.
///
/// `Denominator` is rejected here: it needs the key sum and is handled by the
/// attention kernels themselves.
pub fn normalize(kind: NormKind, x: &RowVector) -> Result<RowVector> {
    let mut out = x.as_slice().to_vec();
    normalize_in_place(kind, &mut out)?;
    Ok(RowVector::from_vec_unchecked(out))
}

pub(crate) fn normalize_in_place(kind: NormKind, x: &mut [f64]) -> Result<()> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(invalid("normalize: NaN input"));
    }
    if x.is_empty() {
        return Err(invalid("normalize: empty input"));
    }
    let n = x.len() as f64;
    match kind {
        NormKind::None => {}
        NormKind::Rms => {
            let ms = x.iter().map(|v| v * v).sum::<f64>() / n;
            let inv = 1.0 / libm::sqrt(ms + NORM_EPSILON);
            x.iter_mut().for_each(|v| *v *= inv);
        }
        NormKind::Layer => {
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / libm::sqrt(var + NORM_EPSILON);
            x.iter_mut().for_each(|v| *v = (*v - mean) * inv);
        }
        NormKind::Denominator => {
            return Err(invalid(
                "denominator normalization is only defined inside linear attention",
            ))
        }
    }
    Ok(())
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid("unknown activation (identity|relu|elu-plus-one)"))
    }
}

impl FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid("unknown norm (none|rms|layer|denominator)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(x: &[f64]) -> RowVector {
        RowVector::from_slice(x).unwrap()
    }

    #[test]
    fn activation_examples() {
        let x = rv(&[1.0, -2.0, 3.0]);
        assert_eq!(apply_activation(ActivationKind::Identity, &x), x);
        assert_eq!(
            apply_activation(ActivationKind::Relu, &x).as_slice(),
            &[1.0, 0.0, 3.0]
        );
        let e = apply_activation(ActivationKind::EluPlusOne, &rv(&[0.0, -50.0, -1e4]));
        assert_eq!(e[0], 1.0);
        assert!(e[1] > 0.0 && e[1] < 1e-20);
        assert!(e[2] > 0.0);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(
            normalize(NormKind::None, &rv(&[3.0, 4.0])).unwrap(),
            rv(&[3.0, 4.0])
        );
        // rms of (3, 4) is sqrt(12.5)
        let r = normalize(NormKind::Rms, &rv(&[3.0, 4.0])).unwrap();
        let rms = 12.5f64.sqrt();
        assert!((r[0] - 3.0 / rms).abs() < 1e-6 && (r[1] - 4.0 / rms).abs() < 1e-6);
        let l = normalize(NormKind::Layer, &rv(&[1.0, 3.0])).unwrap();
        assert!((l[0] + 1.0).abs() < 1e-6 && (l[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rms_of_zero_is_zero() {
        let z = normalize(NormKind::Rms, &RowVector::zeros(4).unwrap()).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nan_and_denominator_are_rejected() {
        let mut x = [1.0, f64::NAN];
        assert!(normalize_in_place(NormKind::Rms, &mut x).is_err());
        assert!(normalize(NormKind::Denominator, &rv(&[1.0])).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in ActivationKind::ALL {
            assert_eq!(k.name().parse::<ActivationKind>().unwrap(), k);
        }
        for k in NormKind::ALL {
            assert_eq!(k.name().parse::<NormKind>().unwrap(), k);
        }
        assert!("gelu".parse::<ActivationKind>().is_err());
    }

    proptest! {
        #[test]
        fn rms_is_scale_invariant(
            x in prop::collection::vec(-10.0f64..10.0, 1..32),
            c in 1.0f64..50.0,
        ) {
            // keep eps_norm / mean(x^2) well below the tolerance
            prop_assume!(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64 > 1.0);
            let a = normalize(NormKind::Rms, &rv(&x)).unwrap();
            let b = normalize(NormKind::Rms, &rv(&x).scale(c)).unwrap();
            let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-6 * scale.max(1.0));
        }

        #[test]
        fn elu_plus_one_is_positive(x in prop::collection::vec(-1e6f64..1e6, 1..16)) {
            let y = apply_activation(ActivationKind::EluPlusOne, &rv(&x));
            prop_assert!(y.as_slice().iter().all(|&v| v > 0.0));
        }
    }
}
