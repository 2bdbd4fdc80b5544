//! The multispectral U-Net: contracting path, bottleneck, expansive path
//! with skip connections, a 1x1 sigmoid head and a center crop on the
//! output.
//!
//! Every unit is `conv3x3 (pad 1, no bias) -> batch norm -> ELU`. Encoder
//! levels run two units and then 2x2 max pooling; channel counts double at
//! each down-sampling step. A decoder level upsamples (nearest, x2), runs
//! one unit that halves the channels, concatenates the skip tensor and runs
//! two more units. Convolution biases are omitted in front of batch norm,
//! which cancels them exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, BnEluCache};
use super::loss::{joint_loss_tensor, JaccardMode, LossValue};
use super::nadam::Nadam;
use super::{Scalar, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub base_channels: usize,
    /// Number of down-sampling steps.
    pub depth: usize,
    /// Pixels removed from each side of the output.
    pub output_crop: usize,
    pub bn_epsilon: f64,
    /// Weight of the newest batch in the running statistics.
    pub bn_momentum: f64,
    pub elu_alpha: f64,
}

impl Default for UNetConfig {
    /// Desk-scale configuration: 16 inputs, base 16, depth 3, crop 8.
    fn default() -> Self {
        Self {
            in_channels: 16,
            base_channels: 16,
            depth: 3,
            output_crop: 8,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
            elu_alpha: 1.0,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_channels == 0 || self.depth == 0 {
            return Err(Error::Config(
                "in_channels, base_channels and depth must be positive".into(),
            ));
        }
        if self.depth > 8 {
            return Err(Error::Config(format!("depth {} is unreasonably deep", self.depth)));
        }
        if !(self.bn_epsilon > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) || !(self.elu_alpha > 0.0) {
            return Err(Error::Config("invalid batch-norm or ELU constants".into()));
        }
        Ok(())
    }

    pub fn channels_at(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Spatial size must be a multiple of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }

    /// Output height and width for an input of the given size.
    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        (h - 2 * self.output_crop, w - 2 * self.output_crop)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    ConvWeight,
    ConvBias,
    BnScale,
    BnShift,
    BnRunningMean,
    BnRunningVar,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::BnRunningMean | ParamKind::BnRunningVar)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Parameter indices of one conv -> BN -> ELU unit.
#[derive(Clone, Copy, Debug)]
struct Unit {
    cin: usize,
    cout: usize,
    weight: usize,
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Clone, Copy, Debug)]
struct DecoderLevel {
    up: Unit,
    first: Unit,
    second: Unit,
}

struct UnitTrace<T> {
    input: Tensor4<T>,
    cache: BnEluCache<T>,
}

struct DecoderTrace<T> {
    up: UnitTrace<T>,
    first: UnitTrace<T>,
    second: UnitTrace<T>,
}

/// Everything the backward pass needs from a training forward pass.
pub struct Trace<T> {
    encoders: Vec<(UnitTrace<T>, UnitTrace<T>, Vec<u8>)>,
    bottleneck: (UnitTrace<T>, UnitTrace<T>),
    /// Indexed by level.
    decoders: Vec<DecoderTrace<T>>,
    head_input: Tensor4<T>,
    probs_full: Tensor4<T>,
    /// Cropped sigmoid probabilities.
    pub output: Tensor4<T>,
}

impl<T: Scalar> Trace<T> {
    /// Probabilities before the output crop.
    pub fn uncropped(&self) -> &Tensor4<T> {
        &self.probs_full
    }
}

/// Per-parameter gradients, aligned with [`UNetModel::params`]. Running
/// statistics get all-zero entries.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub params: Vec<Vec<T>>,
    /// Gradient with respect to the uncropped output probabilities; zero on
    /// the cropped border.
    pub output_full: Tensor4<T>,
}

#[derive(Clone, Debug)]
pub struct UNetModel<T> {
    config: UNetConfig,
    params: Vec<Param<T>>,
    encoders: Vec<(Unit, Unit)>,
    bottleneck: (Unit, Unit),
    decoders: Vec<DecoderLevel>,
    head_weight: usize,
    head_bias: usize,
    mode: Mode,
}

struct Builder<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> Builder<T> {
    fn push(&mut self, name: String, kind: ParamKind, shape: Vec<usize>, fill: T) -> usize {
        let len = shape.iter().product();
        self.params.push(Param {
            name,
            kind,
            shape,
            value: vec![fill; len],
        });
        self.params.len() - 1
    }

    fn unit(&mut self, prefix: &str, cin: usize, cout: usize) -> Unit {
        Unit {
            cin,
            cout,
            weight: self.push(format!("{prefix}.conv.weight"), ParamKind::ConvWeight, vec![cout, cin, 3, 3], T::zero()),
            gamma: self.push(format!("{prefix}.bn.scale"), ParamKind::BnScale, vec![cout], T::one()),
            beta: self.push(format!("{prefix}.bn.shift"), ParamKind::BnShift, vec![cout], T::zero()),
            mean: self.push(format!("{prefix}.bn.running_mean"), ParamKind::BnRunningMean, vec![cout], T::zero()),
            var: self.push(format!("{prefix}.bn.running_var"), ParamKind::BnRunningVar, vec![cout], T::one()),
        }
    }
}

impl<T: Scalar> UNetModel<T> {
    /// Builds the architecture with zero kernels, identity batch norm and
    /// zero biases.
    pub fn zeroed(config: UNetConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder { params: Vec::new() };
        let mut encoders = Vec::with_capacity(config.depth);
        let mut cin = config.in_channels;
        for level in 0..config.depth {
            let c = config.channels_at(level);
            encoders.push((b.unit(&format!("enc{level}.0"), cin, c), b.unit(&format!("enc{level}.1"), c, c)));
            cin = c;
        }
        let cb = config.channels_at(config.depth);
        let bottleneck = (b.unit("mid.0", cin, cb), b.unit("mid.1", cb, cb));
        let mut decoders = Vec::with_capacity(config.depth);
        for level in (0..config.depth).rev() {
            let c = config.channels_at(level);
            decoders.push(DecoderLevel {
                up: b.unit(&format!("dec{level}.up"), 2 * c, c),
                first: b.unit(&format!("dec{level}.0"), 2 * c, c),
                second: b.unit(&format!("dec{level}.1"), c, c),
            });
        }
        decoders.reverse();
        let c0 = config.channels_at(0);
        let head_weight = b.push("head.weight".into(), ParamKind::ConvWeight, vec![1, c0, 1, 1], T::zero());
        let head_bias = b.push("head.bias".into(), ParamKind::ConvBias, vec![1], T::zero());
        Ok(Self {
            config,
            params: b.params,
            encoders,
            bottleneck,
            decoders,
            head_weight,
            head_bias,
            mode: Mode::Train,
        })
    }

    /// He-uniform kernels, zero biases, unit BN scale and zero shift.
    pub fn new(config: UNetConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params {
            if p.kind == ParamKind::ConvWeight {
                let fan_in: usize = p.shape[1..].iter().product();
                let limit = (6.0 / fan_in as f64).sqrt();
                for v in &mut p.value {
                    *v = T::lit(rng.random_range(-limit..limit));
                }
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.kind.trainable())
            .map(|p| p.value.len())
            .sum()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> UNetModel<U> {
        UNetModel {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    shape: p.shape.clone(),
                    value: p.value.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
                })
                .collect(),
            encoders: self.encoders.clone(),
            bottleneck: self.bottleneck,
            decoders: self.decoders.clone(),
            head_weight: self.head_weight,
            head_bias: self.head_bias,
            mode: self.mode,
        }
    }

    /// Replaces every parameter value; shapes and names must match.
    pub fn load_values(&mut self, values: Vec<Vec<T>>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter tensors for a model with {}",
                values.len(),
                self.params.len()
            )));
        }
        for (p, v) in self.params.iter().zip(&values) {
            if p.value.len() != v.len() {
                return Err(Error::ShapeMismatch(format!("parameter `{}` has wrong length", p.name)));
            }
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v;
        }
        Ok(())
    }

    pub fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let m = self.config.size_multiple();
        if x.c != self.config.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} input channels, got {}",
                self.config.in_channels, x.c
            )));
        }
        if x.h % m != 0 || x.w % m != 0 || x.h == 0 || x.w == 0 {
            return Err(Error::ShapeMismatch(format!(
                "spatial size {}x{} must be a positive multiple of {m}",
                x.h, x.w
            )));
        }
        if x.h <= 2 * self.config.output_crop || x.w <= 2 * self.config.output_crop {
            return Err(Error::ShapeMismatch(format!(
                "crop {} leaves nothing of a {}x{} input",
                self.config.output_crop, x.h, x.w
            )));
        }
        Ok(())
    }

    fn eps(&self) -> T {
        T::lit(self.config.bn_epsilon)
    }

    fn alpha(&self) -> T {
        T::lit(self.config.elu_alpha)
    }

    fn unit_inference(&self, u: Unit, x: &Tensor4<T>) -> Tensor4<T> {
        debug_assert_eq!(x.c, u.cin);
        let z = layers::conv_forward(x, &self.params[u.weight].value, None, u.cout, 3);
        layers::bn_elu_forward_inference(
            &z,
            &self.params[u.gamma].value,
            &self.params[u.beta].value,
            &self.params[u.mean].value,
            &self.params[u.var].value,
            self.eps(),
            self.alpha(),
        )
    }

    fn unit_train(&mut self, u: Unit, x: Tensor4<T>) -> UnitTrace<T> {
        debug_assert_eq!(x.c, u.cin);
        let z = layers::conv_forward(&x, &self.params[u.weight].value, None, u.cout, 3);
        let (cache, stats) = layers::bn_elu_forward_train(
            &z,
            &self.params[u.gamma].value,
            &self.params[u.beta].value,
            self.eps(),
            self.alpha(),
        );
        let momentum = T::lit(self.config.bn_momentum);
        let keep = T::one() - momentum;
        for (r, &m) in self.params[u.mean].value.iter_mut().zip(&stats.mean) {
            *r = keep * *r + momentum * m;
        }
        for (r, &v) in self.params[u.var].value.iter_mut().zip(&stats.var_unbiased) {
            *r = keep * *r + momentum * v;
        }
        UnitTrace { input: x, cache }
    }

    fn head(&self, x: &Tensor4<T>) -> Tensor4<T> {
        let mut z = layers::conv_forward(
            x,
            &self.params[self.head_weight].value,
            Some(&self.params[self.head_bias].value),
            1,
            1,
        );
        z.data.iter_mut().for_each(|v| *v = layers::sigmoid(*v));
        z
    }

    /// Inference with running statistics; returns the full, uncropped
    /// probability map.
    pub fn forward_uncropped(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(self.config.depth);
        let mut h = x.clone();
        for &(a, b) in &self.encoders {
            let s = self.unit_inference(b, &self.unit_inference(a, &h));
            h = layers::maxpool_forward(&s).0;
            skips.push(s);
        }
        h = self.unit_inference(self.bottleneck.1, &self.unit_inference(self.bottleneck.0, &h));
        for (level, dec) in self.decoders.iter().enumerate().rev() {
            let up = self.unit_inference(dec.up, &layers::upsample_forward(&h));
            let cat = layers::concat_channels(&skips[level], &up);
            h = self.unit_inference(dec.second, &self.unit_inference(dec.first, &cat));
        }
        let probs = self.head(&h);
        if !probs.all_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(probs)
    }

    /// Inference forward pass (running statistics, no state change).
    pub fn forward_inference(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        Ok(self.forward_uncropped(x)?.center_crop(self.config.output_crop))
    }

    /// Training forward pass: batch statistics, running statistics updated,
    /// intermediate tensors kept for [`backward`](Self::backward).
    pub fn forward_train(&mut self, x: &Tensor4<T>) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut encoders = Vec::with_capacity(self.config.depth);
        let mut h = x.clone();
        for level in 0..self.config.depth {
            let (a, b) = self.encoders[level];
            let ta = self.unit_train(a, h);
            let tb = self.unit_train(b, ta.cache.out.clone());
            let (pooled, arg) = layers::maxpool_forward(&tb.cache.out);
            h = pooled;
            encoders.push((ta, tb, arg));
        }
        let (ba, bb) = self.bottleneck;
        let t0 = self.unit_train(ba, h);
        let t1 = self.unit_train(bb, t0.cache.out.clone());
        h = t1.cache.out.clone();
        let bottleneck = (t0, t1);
        let mut decoders: Vec<Option<DecoderTrace<T>>> = (0..self.config.depth).map(|_| None).collect();
        for level in (0..self.config.depth).rev() {
            let dec = self.decoders[level];
            let up = self.unit_train(dec.up, layers::upsample_forward(&h));
            let cat = layers::concat_channels(&encoders[level].1.cache.out, &up.cache.out);
            let first = self.unit_train(dec.first, cat);
            let second = self.unit_train(dec.second, first.cache.out.clone());
            h = second.cache.out.clone();
            decoders[level] = Some(DecoderTrace { up, first, second });
        }
        let probs_full = self.head(&h);
        if !probs_full.all_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        let output = probs_full.center_crop(self.config.output_crop);
        Ok(Trace {
            encoders,
            bottleneck,
            decoders: decoders.into_iter().map(|d| d.expect("every level visited")).collect(),
            head_input: h,
            probs_full,
            output,
        })
    }

    /// Mode-dependent forward: training mode uses (and updates) batch
    /// statistics, inference mode uses running statistics.
    pub fn forward(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        match self.mode {
            Mode::Train => Ok(self.forward_train(x)?.output),
            Mode::Inference => self.forward_inference(x),
        }
    }

    fn unit_backward(
        &self,
        u: Unit,
        t: &UnitTrace<T>,
        grad_out: &Tensor4<T>,
        grads: &mut [Vec<T>],
        need_input_grad: bool,
    ) -> Option<Tensor4<T>> {
        let bn = layers::bn_elu_backward(&t.cache, &self.params[u.gamma].value, grad_out, self.alpha());
        accumulate(&mut grads[u.gamma], &bn.gamma);
        accumulate(&mut grads[u.beta], &bn.beta);
        let conv = layers::conv_backward(&t.input, &self.params[u.weight].value, &bn.input, 3, false, need_input_grad);
        accumulate(&mut grads[u.weight], &conv.weight);
        conv.input
    }

    /// Backpropagates `grad_output` (the loss gradient with respect to the
    /// cropped probabilities) through the network. The cropped border
    /// receives zero gradient.
    pub fn backward(&self, trace: &Trace<T>, grad_output: &Tensor4<T>) -> Result<Gradients<T>> {
        let crop = self.config.output_crop;
        if grad_output.shape() != trace.output.shape() {
            return Err(Error::ShapeMismatch("output gradient does not match the output".into()));
        }
        let mut grads: Vec<Vec<T>> = self.params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();

        let output_full = grad_output.zero_pad(crop);
        let mut dz = output_full.clone();
        for (d, &p) in dz.data.iter_mut().zip(&trace.probs_full.data) {
            *d = *d * p * (T::one() - p);
        }
        let head = layers::conv_backward(&trace.head_input, &self.params[self.head_weight].value, &dz, 1, true, true);
        accumulate(&mut grads[self.head_weight], &head.weight);
        accumulate(&mut grads[self.head_bias], head.bias.as_deref().unwrap_or(&[]));
        let mut g = head.input.expect("requested");

        let mut skip_grads: Vec<Option<Tensor4<T>>> = (0..self.config.depth).map(|_| None).collect();
        for level in 0..self.config.depth {
            let dec = self.decoders[level];
            let t = &trace.decoders[level];
            let g1 = self.unit_backward(dec.second, &t.second, &g, &mut grads, true).expect("requested");
            let gcat = self.unit_backward(dec.first, &t.first, &g1, &mut grads, true).expect("requested");
            let (g_skip, g_up) = layers::split_channels(&gcat, self.config.channels_at(level));
            skip_grads[level] = Some(g_skip);
            let gu = self.unit_backward(dec.up, &t.up, &g_up, &mut grads, true).expect("requested");
            g = layers::upsample_backward(&gu);
        }

        let (b0, b1) = self.bottleneck;
        let g1 = self.unit_backward(b1, &trace.bottleneck.1, &g, &mut grads, true).expect("requested");
        g = self.unit_backward(b0, &trace.bottleneck.0, &g1, &mut grads, true).expect("requested");

        for level in (0..self.config.depth).rev() {
            let (a, b) = self.encoders[level];
            let (ta, tb, arg) = &trace.encoders[level];
            let mut gs = layers::maxpool_backward(&g, arg);
            if let Some(skip) = &skip_grads[level] {
                accumulate(&mut gs.data, &skip.data);
            }
            let ga = self.unit_backward(b, tb, &gs, &mut grads, true).expect("requested");
            match self.unit_backward(a, ta, &ga, &mut grads, level > 0) {
                Some(next) => g = next,
                None => break,
            }
        }

        for (p, gr) in self.params.iter().zip(&grads) {
            if gr.iter().any(|v| !v.is_finite()) {
                return Err(Error::NaNGradient { param: p.name.clone() });
            }
        }
        Ok(Gradients {
            params: grads,
            output_full,
        })
    }
}

impl<T: Scalar> UNetModel<T> {
    /// Applies one optimizer update to every trainable tensor.
    pub fn apply_update(&mut self, opt: &mut Nadam, grads: &Gradients<T>, learning_rate: f64) -> Result<()> {
        let trainable: Vec<bool> = self.params.iter().map(|p| p.kind.trainable()).collect();
        let g: Vec<&[T]> = grads.params.iter().map(|g| g.as_slice()).collect();
        let mut p: Vec<&mut [T]> = self.params.iter_mut().map(|p| p.value.as_mut_slice()).collect();
        opt.step(&mut p, &g, &trainable, learning_rate)
    }

    /// Forward, joint loss, backward and one optimizer update on a batch.
    pub fn train_step(
        &mut self,
        opt: &mut Nadam,
        x: &Tensor4<T>,
        y: &Tensor4<T>,
        mode: JaccardMode,
        learning_rate: f64,
    ) -> Result<LossValue> {
        let trace = self.forward_train(x)?;
        let (value, g_out) = joint_loss_tensor(y, &trace.output, mode)?;
        let grads = self.backward(&trace, &g_out)?;
        self.apply_update(opt, &grads, learning_rate)?;
        Ok(value)
    }
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> UNetConfig {
        UNetConfig {
            in_channels: 2,
            base_channels: 2,
            depth: 2,
            output_crop: 2,
            ..Default::default()
        }
    }

    #[test]
    fn parameter_layout() {
        let m = UNetModel::<f32>::new(tiny(), 1).unwrap();
        let names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names[0], "enc0.0.conv.weight");
        assert_eq!(*names.last().unwrap(), "head.bias");
        assert_eq!(m.params()[0].shape, vec![2, 2, 3, 3]);
        let mid = m.params().iter().find(|p| p.name == "mid.0.conv.weight").unwrap();
        assert_eq!(mid.shape, vec![8, 4, 3, 3]);
        let up = m.params().iter().find(|p| p.name == "dec0.up.conv.weight").unwrap();
        assert_eq!(up.shape, vec![2, 4, 3, 3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut m = UNetModel::<f32>::new(tiny(), 1).unwrap();
        assert!(m.forward(&Tensor4::zeros(1, 3, 8, 8)).is_err());
        assert!(m.forward(&Tensor4::zeros(1, 2, 6, 8)).is_err());
        assert!(m.forward(&Tensor4::zeros(1, 2, 4, 4)).is_err());
        assert_eq!(m.forward(&Tensor4::zeros(1, 2, 8, 8)).unwrap().shape(), [1, 1, 4, 4]);
    }

    #[test]
    fn running_stats_only_move_in_training() {
        let mut m = UNetModel::<f32>::new(tiny(), 3).unwrap();
        let x = Tensor4::from_vec(2, 2, 8, 8, (0..256).map(|i| (i as f32 * 0.1).sin()).collect()).unwrap();
        let before = m.params().to_vec();
        m.set_mode(Mode::Inference);
        m.forward(&x).unwrap();
        assert_eq!(m.params(), &before[..]);
        m.set_mode(Mode::Train);
        m.forward(&x).unwrap();
        let moved = m
            .params()
            .iter()
            .zip(&before)
            .filter(|(a, b)| a != b)
            .all(|(a, _)| !a.kind.trainable());
        assert!(moved);
        assert_ne!(m.params(), &before[..]);
    }
}
