//! Central finite-difference checking of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers;
use super::loss::{joint_loss_tensor, JaccardMode};
use super::{Tensor4, UNetModel};
use crate::error::{Error, Result};

/// A scalar function of a set of named parameter tensors with an analytic
/// gradient.
pub trait Objective {
    /// `(name, length)` of each trainable tensor.
    fn tensors(&self) -> Vec<(String, usize)>;
    fn get(&self, tensor: usize, index: usize) -> f64;
    fn set(&mut self, tensor: usize, index: usize, value: f64);
    fn loss(&mut self) -> Result<f64>;
    /// One gradient vector per entry of [`tensors`](Self::tensors).
    fn gradient(&mut self) -> Result<Vec<Vec<f64>>>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Number of parameters compared; every tensor contributes at least one.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-4,
            samples: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

pub fn gradient_check<O: Objective>(obj: &mut O, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let tensors = obj.tensors();
    let offsets: Vec<usize> = tensors
        .iter()
        .scan(0, |acc, (_, len)| {
            let start = *acc;
            *acc += len;
            Some(start)
        })
        .collect();
    let total: usize = tensors.iter().map(|(_, len)| len).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("objective has no parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picks: Vec<usize> = offsets
        .iter()
        .zip(&tensors)
        .filter(|(_, (_, len))| *len > 0)
        .map(|(&o, _)| o)
        .collect();
    let extra = cfg.samples.saturating_sub(picks.len()).min(total);
    picks.extend(sample(&mut rng, total, extra));
    picks.sort_unstable();
    picks.dedup();

    let grad = obj.gradient()?;
    let mut entries = Vec::with_capacity(picks.len());
    for flat in picks {
        let t = offsets.partition_point(|&o| o <= flat) - 1;
        let i = flat - offsets[t];
        let original = obj.get(t, i);
        obj.set(t, i, original + cfg.step);
        let plus = obj.loss()?;
        obj.set(t, i, original - cfg.step);
        let minus = obj.loss()?;
        obj.set(t, i, original);
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let analytic = grad[t][i];
        entries.push(GradCheckEntry {
            tensor: tensors[t].0.clone(),
            index: i,
            analytic,
            numeric,
            relative_error: relative_error(analytic, numeric),
        });
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        entries,
        max_relative_error,
        tolerance: cfg.tolerance,
    })
}

/// Joint loss of a U-Net in training mode (batch statistics) on a fixed
/// batch.
pub struct UNetObjective {
    pub model: UNetModel<f64>,
    pub input: Tensor4<f64>,
    pub target: Tensor4<f64>,
    pub mode: JaccardMode,
    /// Multiplies the analytic gradient; anything but 1 corrupts it.
    pub gradient_scale: f64,
    trainable: Vec<usize>,
}

impl UNetObjective {
    pub fn new(model: UNetModel<f64>, input: Tensor4<f64>, target: Tensor4<f64>, mode: JaccardMode) -> Self {
        let trainable = model
            .params()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kind.trainable())
            .map(|(i, _)| i)
            .collect();
        Self {
            model,
            input,
            target,
            mode,
            gradient_scale: 1.0,
            trainable,
        }
    }
}

impl Objective for UNetObjective {
    fn tensors(&self) -> Vec<(String, usize)> {
        self.trainable
            .iter()
            .map(|&i| {
                let p = &self.model.params()[i];
                (p.name.clone(), p.value.len())
            })
            .collect()
    }

    fn get(&self, tensor: usize, index: usize) -> f64 {
        self.model.params()[self.trainable[tensor]].value[index]
    }

    fn set(&mut self, tensor: usize, index: usize, value: f64) {
        let t = self.trainable[tensor];
        self.model.params_mut()[t].value[index] = value;
    }

    fn loss(&mut self) -> Result<f64> {
        let trace = self.model.forward_train(&self.input)?;
        Ok(joint_loss_tensor(&self.target, &trace.output, self.mode)?.0.total)
    }

    fn gradient(&mut self) -> Result<Vec<Vec<f64>>> {
        let trace = self.model.forward_train(&self.input)?;
        let (_, g_out) = joint_loss_tensor(&self.target, &trace.output, self.mode)?;
        let grads = self.model.backward(&trace, &g_out)?;
        Ok(self
            .trainable
            .iter()
            .map(|&i| grads.params[i].iter().map(|g| g * self.gradient_scale).collect())
            .collect())
    }
}

/// A single 3x3 convolution with bias under a mean squared error. Its loss
/// is quadratic in the parameters, so central differences are exact up to
/// rounding.
pub struct LinearConvObjective {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Tensor4<f64>,
    pub target: Tensor4<f64>,
}

impl LinearConvObjective {
    fn residual(&self) -> Tensor4<f64> {
        let mut out = layers::conv_forward(&self.input, &self.weight, Some(&self.bias), self.target.c, 3);
        for (o, &t) in out.data.iter_mut().zip(&self.target.data) {
            *o -= t;
        }
        out
    }
}

impl Objective for LinearConvObjective {
    fn tensors(&self) -> Vec<(String, usize)> {
        vec![("weight".into(), self.weight.len()), ("bias".into(), self.bias.len())]
    }

    fn get(&self, tensor: usize, index: usize) -> f64 {
        if tensor == 0 {
            self.weight[index]
        } else {
            self.bias[index]
        }
    }

    fn set(&mut self, tensor: usize, index: usize, value: f64) {
        if tensor == 0 {
            self.weight[index] = value;
        } else {
            self.bias[index] = value;
        }
    }

    fn loss(&mut self) -> Result<f64> {
        let r = self.residual();
        Ok(0.5 * r.data.iter().map(|v| v * v).sum::<f64>() / r.data.len() as f64)
    }

    fn gradient(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut r = self.residual();
        let n = r.data.len() as f64;
        r.data.iter_mut().for_each(|v| *v /= n);
        let g = layers::conv_backward(&self.input, &self.weight, &r, 3, true, false);
        Ok(vec![g.weight, g.bias.unwrap_or_default()])
    }
}
