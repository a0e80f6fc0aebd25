use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{
    activation_apply, dense_forward, dropout_mask, flatten, min_denominator_term, pade_forward, pade_on_tape,
    pade_param_count, ActivationKind, DenseActivation, DenseParams, Mode, PadeLayerParams,
    PadeVars,
};
use crate::model::config::{ModelConfig, POOL_SIZE};
use crate::numerics::{maxpool1d, KernelShape, RngStream, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Pade {
        params: PadeLayerParams,
        activation: ActivationKind,
    },
    MaxPool {
        pool: usize,
    },
    Flatten,
    Dropout {
        rate: f64,
    },
    Dense {
        params: DenseParams,
        activation: DenseActivation,
    },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Pade { .. } => "pade",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Flatten => "flatten",
            Layer::Dropout { .. } => "dropout",
            Layer::Dense { .. } => "dense",
        }
    }
}

/// Description of one trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    /// Whether the squared-norm penalty applies (Padé kernels only).
    pub regularized: bool,
}

/// Tape nodes produced by [`Model::record`].
pub struct Recorded {
    pub probs: Var,
    /// Leaves in [`Model::param_infos`] order.
    pub params: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
}

impl Model {
    /// Builds the network with freshly initialized parameters.
    pub fn build(config: &ModelConfig, rng: &mut RngStream) -> Result<Self> {
        Self::assemble(config, Some(rng))
    }

    /// Same structure as [`Model::build`] with every parameter zero.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        Self::assemble(config, None)
    }

    fn assemble(config: &ModelConfig, mut rng: Option<&mut RngStream>) -> Result<Self> {
        let mut pade = |p, q, shape| match rng.as_deref_mut() {
            Some(r) => PadeLayerParams::init(p, q, shape, r),
            None => PadeLayerParams::zeros(p, q, shape),
        };
        config.validate()?;
        let mut layers = Vec::with_capacity(3 * config.blocks + 4);
        for block in 0..config.blocks {
            let cin = if block == 0 {
                config.input_channels
            } else {
                config.filters
            };
            let shape = KernelShape {
                taps: config.kernel,
                cin,
                cout: config.filters,
            };
            layers.push(Layer::Pade {
                params: pade(config.p, config.q, shape)?,
                activation: config.activation,
            });
            layers.push(Layer::MaxPool { pool: POOL_SIZE });
        }
        let mut dense = |i, o| match rng.as_deref_mut() {
            Some(r) => DenseParams::glorot(i, o, r),
            None => DenseParams::zeros(i, o),
        };
        layers.push(Layer::Flatten);
        layers.push(Layer::Dropout {
            rate: config.dropout,
        });
        layers.push(Layer::Dense {
            params: dense(config.flatten_features(), config.dense_units),
            activation: DenseActivation::Tanh,
        });
        layers.push(Layer::Dense {
            params: dense(config.dense_units, config.classes),
            activation: DenseActivation::Softmax,
        });
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Display names of the layers, e.g. `pade_1`, `maxpool_1`, ..., `dense_2`.
    pub fn layer_names(&self) -> Vec<String> {
        let mut counts = std::collections::HashMap::new();
        self.layers
            .iter()
            .map(|l| {
                let n = counts.entry(l.kind()).or_insert(0);
                *n += 1;
                match l {
                    Layer::Flatten | Layer::Dropout { .. } => l.kind().to_string(),
                    _ => format!("{}_{}", l.kind(), n),
                }
            })
            .collect()
    }

    /// Trainable tensors in a fixed order: per Padé layer the numerator
    /// kernels, numerator biases and denominator kernels, then each dense
    /// layer's weights and bias.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Pade { params, .. } => {
                    out.extend(params.numerator.iter());
                    out.extend(params.numerator_bias.iter());
                    out.extend(params.denominator.iter());
                }
                Layer::Dense { params, .. } => {
                    out.push(&params.weights);
                    out.push(&params.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Pade { params, .. } => {
                    out.extend(params.numerator.iter_mut());
                    out.extend(params.numerator_bias.iter_mut());
                    out.extend(params.denominator.iter_mut());
                }
                Layer::Dense { params, .. } => {
                    out.push(&mut params.weights);
                    out.push(&mut params.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_infos(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        let (mut pade_idx, mut dense_idx) = (0, 0);
        for layer in &self.layers {
            match layer {
                Layer::Pade { params, .. } => {
                    pade_idx += 1;
                    let info = |name: String, t: &Tensor, regularized| ParamInfo {
                        name,
                        shape: t.shape().to_vec(),
                        regularized,
                    };
                    for (m, t) in params.numerator.iter().enumerate() {
                        out.push(info(format!("pade_{pade_idx}.num_{}.kernel", m + 1), t, true));
                    }
                    for (m, t) in params.numerator_bias.iter().enumerate() {
                        out.push(info(format!("pade_{pade_idx}.num_{}.bias", m + 1), t, false));
                    }
                    for (n, t) in params.denominator.iter().enumerate() {
                        out.push(info(format!("pade_{pade_idx}.den_{}.kernel", n + 1), t, true));
                    }
                }
                Layer::Dense { params, .. } => {
                    dense_idx += 1;
                    out.push(ParamInfo {
                        name: format!("dense_{dense_idx}.weights"),
                        shape: params.weights.shape().to_vec(),
                        regularized: false,
                    });
                    out.push(ParamInfo {
                        name: format!("dense_{dense_idx}.bias"),
                        shape: params.bias.shape().to_vec(),
                        regularized: false,
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Total trainable scalars.
    pub fn count_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Output shape of every layer for a batch of `batch` inputs, derived
    /// from the configuration alone.
    pub fn output_shapes(&self, batch: usize) -> Vec<Vec<usize>> {
        let c = &self.config;
        let mut shape = vec![batch, c.input_length, c.input_channels];
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = match layer {
                Layer::Pade { .. } => vec![batch, shape[1], c.filters],
                Layer::MaxPool { pool } => vec![batch, shape[1] / pool, shape[2]],
                Layer::Flatten => vec![batch, shape[1] * shape[2]],
                Layer::Dropout { .. } => shape,
                Layer::Dense { params, .. } => vec![batch, params.outputs()],
            };
            out.push(shape.clone());
        }
        out
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let c = &self.config;
        if x.rank() != 3 || x.dim(1) != c.input_length || x.dim(2) != c.input_channels {
            return Err(Error::shape(format!(
                "model expects [batch, {}, {}], got {:?}",
                c.input_length,
                c.input_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    fn apply(layer: &Layer, x: &Tensor) -> Result<Tensor> {
        match layer {
            Layer::Pade { params, activation } => {
                activation_apply(&pade_forward(x, params)?, *activation)
            }
            Layer::MaxPool { pool } => maxpool1d(x, *pool),
            Layer::Flatten => flatten(x),
            Layer::Dropout { .. } => Ok(x.clone()),
            Layer::Dense { params, activation } => dense_forward(x, params, *activation),
        }
    }

    /// Inference forward pass: class probabilities `[batch, classes]`.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = Self::apply(layer, &h)?;
        }
        Ok(h)
    }

    /// Inference pass keeping every layer's output.
    pub fn trace(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        let mut outs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let h = outs.last().unwrap_or(x);
            let next = Self::apply(layer, h)?;
            outs.push(next);
        }
        Ok(outs)
    }

    /// Smallest `|w_n ⊛ x^n|` over every Padé layer for input `x`. Gradients
    /// are only classical where this is nonzero.
    pub fn min_denominator_term(&self, x: &Tensor) -> Result<f64> {
        self.check_input(x)?;
        let mut best = f64::INFINITY;
        let mut h = x.clone();
        for layer in &self.layers {
            if let Layer::Pade { params, .. } = layer {
                if params.q() > 0 {
                    best = best.min(min_denominator_term(&h, params)?);
                }
            }
            h = Self::apply(layer, &h)?;
        }
        Ok(best)
    }

    /// Records a forward pass on `tape`. Parameters become leaves in
    /// [`Model::params`] order. `dropout_rng` is only drawn from in
    /// [`Mode::Train`].
    pub fn record(
        &self,
        tape: &mut Tape,
        x: Var,
        mode: Mode,
        dropout_rng: &mut RngStream,
    ) -> Result<Recorded> {
        let params: Vec<Var> = self
            .params()
            .into_iter()
            .map(|t| tape.param(t.clone()).0)
            .collect();
        let probs = self.record_with(tape, x, &params, mode, dropout_rng)?;
        Ok(Recorded { probs, params })
    }

    /// Like [`Model::record`] but reads parameters from existing tape nodes,
    /// given in [`Model::params`] order. The stored parameter values are
    /// ignored.
    pub fn record_with(
        &self,
        tape: &mut Tape,
        x: Var,
        params: &[Var],
        mode: Mode,
        dropout_rng: &mut RngStream,
    ) -> Result<Var> {
        self.check_input(tape.value(x))?;
        let expected = self.params().len();
        if params.len() != expected {
            return Err(Error::Contract(format!(
                "expected {expected} parameter nodes, got {}",
                params.len()
            )));
        }
        let mut next = params.iter().copied();
        let mut take = |n: usize| -> Vec<Var> { next.by_ref().take(n).collect() };
        let mut h = x;
        for layer in &self.layers {
            h = match layer {
                Layer::Pade {
                    params: p,
                    activation,
                } => {
                    let vars = PadeVars {
                        numerator: take(p.p()),
                        numerator_bias: take(p.p()),
                        denominator: take(p.q()),
                    };
                    let y = pade_on_tape(tape, h, &vars)?;
                    tape.activation(y, *activation)
                }
                Layer::MaxPool { pool } => tape.maxpool(h, *pool)?,
                Layer::Flatten => {
                    let s = tape.value(h).shape().to_vec();
                    tape.reshape(h, &[s[0], s[1] * s[2]])?
                }
                Layer::Dropout { rate } => {
                    if mode == Mode::Train && *rate > 0.0 {
                        let mask = dropout_mask(tape.value(h).len(), *rate, dropout_rng)?;
                        tape.mask(h, mask)?
                    } else {
                        h
                    }
                }
                Layer::Dense { activation, .. } => {
                    let wb = take(2);
                    let z = tape.affine(h, wb[0], wb[1])?;
                    match activation {
                        DenseActivation::Tanh => tape.tanh(z),
                        DenseActivation::Softmax => tape.softmax(z)?,
                    }
                }
            };
        }
        Ok(h)
    }
}

/// Trainable scalars of a configuration without building it.
pub fn closed_form_param_count(config: &ModelConfig) -> usize {
    let mut total = 0;
    for block in 0..config.blocks {
        let cin = if block == 0 {
            config.input_channels
        } else {
            config.filters
        };
        let shape = KernelShape {
            taps: config.kernel,
            cin,
            cout: config.filters,
        };
        total += pade_param_count(config.p, config.q, shape);
    }
    total += (config.flatten_features() + 1) * config.dense_units;
    total += (config.dense_units + 1) * config.classes;
    total
}

/// Trainable scalars of the full-size network for orders `(p, q)`.
pub fn count_params_for(p: usize, q: usize) -> usize {
    closed_form_param_count(&ModelConfig {
        p,
        q,
        ..ModelConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: [(usize, usize, usize); 6] = [
        (1, 0, 58_376),
        (1, 1, 101_608),
        (1, 2, 144_840),
        (2, 0, 101_832),
        (2, 1, 145_064),
        (3, 0, 145_288),
    ];

    fn config(p: usize, q: usize) -> ModelConfig {
        let activation = if q == 0 && p > 1 {
            ActivationKind::Tanh
        } else {
            ActivationKind::LeakyRelu
        };
        ModelConfig::with_orders(p, q, activation)
    }

    #[test]
    fn parameter_counts() {
        for (p, q, expect) in TABLE {
            let model = Model::zeros(&config(p, q)).unwrap();
            assert_eq!(model.count_params(), expect, "P={p} Q={q}");
            assert_eq!(closed_form_param_count(model.config()), expect);
            assert_eq!(count_params_for(p, q), expect);
            let from_infos: usize = model
                .param_infos()
                .iter()
                .map(|i| i.shape.iter().product::<usize>())
                .sum();
            assert_eq!(from_infos, expect);
        }
    }

    #[test]
    fn eighteen_layers_and_shapes() {
        let model = Model::zeros(&config(2, 1)).unwrap();
        assert_eq!(model.layers().len(), 18);
        let shapes = model.output_shapes(1);
        assert_eq!(shapes.last().unwrap(), &vec![1, 8]);
        assert_eq!(shapes[14], vec![1, 224]);
        let names = model.layer_names();
        assert_eq!(names[0], "pade_1");
        assert_eq!(names[13], "maxpool_7");
        assert_eq!(names[17], "dense_2");
    }

    #[test]
    fn same_seed_same_initialization() {
        let c = config(2, 1);
        let a = Model::build(&c, &mut RngStream::new(5)).unwrap();
        let b = Model::build(&c, &mut RngStream::new(5)).unwrap();
        let d = Model::build(&c, &mut RngStream::new(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn rejects_leaky_self_onn() {
        let c = ModelConfig::with_orders(2, 0, ActivationKind::LeakyRelu);
        assert!(matches!(Model::build(&c, &mut RngStream::new(1)), Err(Error::Config(_))));
        let c = ModelConfig::with_orders(0, 1, ActivationKind::LeakyRelu);
        assert!(Model::build(&c, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn record_matches_predict_in_eval_mode() {
        let c = ModelConfig {
            input_length: 64,
            blocks: 3,
            filters: 4,
            dense_units: 8,
            ..config(2, 1)
        };
        let mut rng = RngStream::new(9);
        let model = Model::build(&c, &mut rng).unwrap();
        let x = Tensor::new(&[3, 64, 1], rng.uniform(-1.0, 1.0, 192).unwrap()).unwrap();
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let rec = model.record(&mut tape, xv, Mode::Eval, &mut rng).unwrap();
        assert_eq!(tape.value(rec.probs), &model.predict(&x).unwrap());
        assert_eq!(rec.params.len(), model.params().len());
    }

    #[test]
    fn finite_outputs_for_every_table_configuration() {
        let mut rng = RngStream::new(11);
        let x = Tensor::new(&[2, 1000, 1], rng.uniform(-1.0, 1.0, 2000).unwrap()).unwrap();
        for (p, q, _) in TABLE {
            let model = Model::build(&config(p, q), &mut rng).unwrap();
            let probs = model.predict(&x).unwrap();
            assert_eq!(probs.shape(), &[2, 8]);
            assert!(probs.all_finite(), "P={p} Q={q}");
            for row in probs.data().chunks(8) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_matches_declared_shapes() {
        let model = Model::build(&config(2, 1), &mut RngStream::new(3)).unwrap();
        let x = Tensor::zeros(&[1, 1000, 1]);
        let trace = model.trace(&x).unwrap();
        let shapes: Vec<Vec<usize>> = trace.iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, model.output_shapes(1));
        let pooled: Vec<usize> = shapes
            .iter()
            .zip(model.layers())
            .filter(|(_, l)| matches!(l, Layer::MaxPool { .. }))
            .map(|(s, _)| s[1])
            .collect();
        assert_eq!(pooled, vec![500, 250, 125, 62, 31, 15, 7]);
        assert!(shapes[..14].iter().all(|s| s[2] == 32));
        assert_eq!(shapes[14], vec![1, 224]);
        assert_eq!(shapes[16], vec![1, 64]);
        assert_eq!(shapes[17], vec![1, 8]);
    }
}
