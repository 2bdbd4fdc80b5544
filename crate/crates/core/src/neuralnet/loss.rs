//! Segmentation metrics and the joint training loss
//! `L = BCE - ln(soft Jaccard)`.

use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor4};
use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Probabilities are clipped to `[EPS_CLIP, 1 - EPS_CLIP]` inside the log
/// terms of the cross-entropy.
pub const EPS_CLIP: f64 = 1e-7;
/// Smoothing added to numerator and denominator of the soft Jaccard.
pub const EPS_SMOOTH: f64 = 1e-12;

/// Hard Jaccard index of two binary masks. Two empty masks score 1.
pub fn jaccard(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if !pred.same_shape(truth) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let (i, u) = intersection_union(pred.data(), truth.data());
    Ok(jaccard_from_counts(i, u))
}

/// Intersection and union pixel counts of two 0/1 buffers.
pub fn intersection_union(pred: &[u8], truth: &[u8]) -> (u64, u64) {
    pred.iter().zip(truth).fold((0, 0), |(i, u), (&p, &t)| {
        (i + (p & t) as u64, u + (p | t) as u64)
    })
}

pub fn jaccard_from_counts(intersection: u64, union: u64) -> f64 {
    if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    }
}

/// How the soft Jaccard is reduced over pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JaccardMode {
    /// One ratio over the whole batch:
    /// `(sum y*p + eps) / (sum (y + p - y*p) + eps)`.
    #[default]
    Aggregate,
    /// Mean of the per-pixel ratios `y*p / (y + p - y*p)`.
    PerPixelMean,
}

fn check_pair<T: Scalar>(y: &[T], p: &[T]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} targets vs {} predictions",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("loss of an empty batch".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy with clipped probabilities.
pub fn bce<T: Scalar>(y: &[T], p: &[T]) -> Result<T> {
    check_pair(y, p)?;
    let lo = EPS_CLIP;
    let hi = 1.0 - EPS_CLIP;
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&y, &p)| {
            let (y, p) = (y.to_f64_lossy(), p.to_f64_lossy().clamp(lo, hi));
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(T::lit(total / y.len() as f64))
}

/// Per-pixel clipped cross-entropy terms.
pub fn bce_terms(y: &[f32], p: &[f32]) -> Vec<f64> {
    y.iter()
        .zip(p)
        .map(|(&y, &p)| {
            let (y, p) = (y as f64, (p as f64).clamp(EPS_CLIP, 1.0 - EPS_CLIP));
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .collect()
}

fn sums(y: &[f64], p: &[f64]) -> (f64, f64) {
    y.iter().zip(p).fold((0.0, 0.0), |(i, u), (&y, &p)| {
        (i + y * p, u + y + p - y * p)
    })
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// Soft (differentiable) Jaccard index of targets `y` and probabilities `p`.
pub fn soft_jaccard<T: Scalar>(y: &[T], p: &[T], mode: JaccardMode) -> Result<T> {
    check_pair(y, p)?;
    let (y, p) = (to_f64(y), to_f64(p));
    let j = match mode {
        JaccardMode::Aggregate => {
            let (i, u) = sums(&y, &p);
            (i + EPS_SMOOTH) / (u + EPS_SMOOTH)
        }
        JaccardMode::PerPixelMean => {
            y.iter()
                .zip(&p)
                .map(|(&y, &p)| (y * p + EPS_SMOOTH) / (y + p - y * p + EPS_SMOOTH))
                .sum::<f64>()
                / y.len() as f64
        }
    };
    Ok(T::lit(j))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub bce: f64,
    pub soft_jaccard: f64,
}

/// Joint loss and its gradient with respect to every probability.
pub fn joint_loss<T: Scalar>(y: &[T], p: &[T], mode: JaccardMode) -> Result<(LossValue, Vec<T>)> {
    check_pair(y, p)?;
    let n = y.len() as f64;
    let (yf, pf) = (to_f64(y), to_f64(p));
    let bce_value = bce(y, p)?.to_f64_lossy();
    let mut grad: Vec<f64> = yf
        .iter()
        .zip(&pf)
        .map(|(&y, &p)| {
            if p < EPS_CLIP || p > 1.0 - EPS_CLIP {
                0.0
            } else {
                (-y / p + (1.0 - y) / (1.0 - p)) / n
            }
        })
        .collect();
    let j = match mode {
        JaccardMode::Aggregate => {
            let (i, u) = sums(&yf, &pf);
            let (i, u) = (i + EPS_SMOOTH, u + EPS_SMOOTH);
            // d(-ln J)/dp = -(dI/dp)/I + (dU/dp)/U with dI/dp = y, dU/dp = 1 - y.
            for (g, &y) in grad.iter_mut().zip(&yf) {
                *g += -y / i + (1.0 - y) / u;
            }
            i / u
        }
        JaccardMode::PerPixelMean => {
            let mut total = 0.0;
            let mut dj = Vec::with_capacity(yf.len());
            for (&y, &p) in yf.iter().zip(&pf) {
                let num = y * p + EPS_SMOOTH;
                let den = y + p - y * p + EPS_SMOOTH;
                total += num / den;
                dj.push((y * den - num * (1.0 - y)) / (den * den) / n);
            }
            let j = total / n;
            for (g, d) in grad.iter_mut().zip(dj) {
                *g -= d / j;
            }
            j
        }
    };
    if !(j > 0.0) {
        return Err(Error::NonFinite("soft Jaccard collapsed to zero".into()));
    }
    let value = LossValue {
        total: bce_value - j.ln(),
        bce: bce_value,
        soft_jaccard: j,
    };
    if !value.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((value, grad.into_iter().map(T::lit).collect()))
}

/// Joint loss for a batch of single-channel prediction tensors.
pub fn joint_loss_tensor<T: Scalar>(
    y: &Tensor4<T>,
    p: &Tensor4<T>,
    mode: JaccardMode,
) -> Result<(LossValue, Tensor4<T>)> {
    if y.shape() != p.shape() {
        return Err(Error::ShapeMismatch(format!(
            "target shape {:?} vs prediction shape {:?}",
            y.shape(),
            p.shape()
        )));
    }
    let (value, grad) = joint_loss(&y.data, &p.data, mode)?;
    let [n, c, h, w] = p.shape();
    Ok((value, Tensor4::from_vec(n, c, h, w, grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hard_jaccard_cases() {
        let a = BinaryMask::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let b = BinaryMask::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        assert_relative_eq!(jaccard(&a, &b).unwrap(), 1.0 / 3.0);
        let z = BinaryMask::zeros(2, 2);
        assert_eq!(jaccard(&z, &z).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &z).unwrap(), 0.0);
        assert!(jaccard(&a, &BinaryMask::zeros(1, 2)).is_err());
    }

    #[test]
    fn joint_loss_hand_values() {
        let y = [1.0f64, 0.0];
        let p = [0.8, 0.2];
        let (v, _) = joint_loss(&y, &p, JaccardMode::Aggregate).unwrap();
        // BCE = -ln 0.8; J = 0.8 / (1 + 0.2) = 2/3.
        assert_relative_eq!(v.bce, -(0.8f64).ln(), epsilon = 1e-12);
        assert_relative_eq!(v.soft_jaccard, 2.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(v.total, -(0.8f64).ln() - (2.0f64 / 3.0).ln(), epsilon = 1e-9);
    }

    #[test]
    fn gradients_match_differences() {
        let y = [1.0f64, 0.0, 1.0, 0.0, 1.0];
        let p = [0.7f64, 0.3, 0.2, 0.9, 0.55];
        for mode in [JaccardMode::Aggregate, JaccardMode::PerPixelMean] {
            let (_, g) = joint_loss(&y, &p, mode).unwrap();
            for i in 0..p.len() {
                let h = 1e-6;
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let fa = joint_loss(&y, &a, mode).unwrap().0.total;
                let fb = joint_loss(&y, &b, mode).unwrap().0.total;
                assert_relative_eq!(g[i], (fa - fb) / (2.0 * h), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn clipping_zeroes_gradient() {
        let (v, g) = joint_loss(&[1.0f64, 0.0], &[1.0, 0.0], JaccardMode::Aggregate).unwrap();
        assert!(v.bce > 0.0 && v.bce < 1e-6);
        assert_relative_eq!(v.soft_jaccard, 1.0);
        // Only the Jaccard term contributes once the probabilities are clipped.
        assert_relative_eq!(g[0], -1.0 / (1.0 + EPS_SMOOTH), epsilon = 1e-9);
    }
}
