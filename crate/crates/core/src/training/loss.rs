use crate::autodiff::{cross_entropy_value, grad_check, GradCheckReport, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::layers::ActivationKind;
use crate::model::{Model, ModelConfig};
use crate::numerics::{RngStream, Tensor};

/// `λ Σ w²` over the tensors flagged as regularized.
pub fn l2_penalty(model: &Model, lambda: f64) -> f64 {
    let infos = model.param_infos();
    let sum: f64 = infos
        .iter()
        .zip(model.params())
        .filter(|(info, _)| info.regularized)
        .map(|(_, t)| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    lambda * sum
}

/// Mean categorical cross-entropy (probabilities floored at 1e-12) plus the
/// L2 penalty on Padé kernels.
pub fn cross_entropy_loss(probs: &Tensor, targets: &Tensor, model: &Model, lambda: f64) -> Result<f64> {
    if probs.rank() != 2 {
        return Err(Error::shape(format!(
            "probabilities must be [batch, classes], got {:?}",
            probs.shape()
        )));
    }
    targets.expect_shape(probs.shape())?;
    Ok(cross_entropy_value(probs, targets) + l2_penalty(model, lambda))
}

/// Records the training loss on `tape`. `params` are the model's leaves in
/// [`Model::param_infos`] order.
pub fn record_loss(
    tape: &mut Tape,
    model: &Model,
    probs: Var,
    params: &[Var],
    targets: &Tensor,
    lambda: f64,
) -> Result<Var> {
    let data = tape.cross_entropy(probs, targets)?;
    if lambda == 0.0 {
        return Ok(data);
    }
    let mut penalty: Option<Var> = None;
    for (info, &var) in model.param_infos().iter().zip(params) {
        if !info.regularized {
            continue;
        }
        let sq = tape.sum_squares(var);
        penalty = Some(match penalty {
            Some(acc) => tape.add(acc, sq)?,
            None => sq,
        });
    }
    match penalty {
        Some(p) => {
            let scaled = tape.scale(p, lambda);
            tape.add(data, scaled)
        }
        None => Ok(data),
    }
}

/// Finite-difference check of the whole network's training loss with
/// respect to every parameter. In [`Mode::Train`] the same dropout mask,
/// drawn from `dropout_seed`, is used for every evaluation.
pub fn grad_check_network(
    model: &Model,
    x: &Tensor,
    targets: &Tensor,
    mode: Mode,
    dropout_seed: u64,
    eps: f64,
) -> Result<GradCheckReport> {
    let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
    let lambda = model.config().l2_lambda;
    grad_check(
        |tape, vars| {
            let xv = tape.input(x.clone());
            let mut rng = RngStream::new(dropout_seed);
            let probs = model.record_with(tape, xv, vars, mode, &mut rng)?;
            record_loss(tape, model, probs, vars, targets, lambda)
        },
        &params,
        eps,
    )
}

/// Smallest denominator term below which a draw is not checked: the
/// absolute value has a kink at zero.
pub const KINK_MARGIN: f64 = 1e-6;

/// Configuration of the toy network used for whole-model gradient checks:
/// the full layer stack at length 32 with two blocks.
pub fn toy_config(p: usize, q: usize, activation: ActivationKind) -> ModelConfig {
    ModelConfig {
        input_length: 32,
        blocks: 2,
        filters: 3,
        dense_units: 5,
        ..ModelConfig::with_orders(p, q, activation)
    }
}

/// Gradient check of the toy network for one random draw, in training mode
/// so dropout is exercised with a fixed mask. Returns `None` when the draw
/// has a denominator term within [`KINK_MARGIN`] of zero.
pub fn toy_network_grad_check(
    p: usize,
    q: usize,
    activation: ActivationKind,
    seed: u64,
    eps: f64,
) -> Result<Option<GradCheckReport>> {
    let config = toy_config(p, q, activation);
    let root = RngStream::new(seed);
    let mut model = Model::build(&config, &mut root.fork(1))?;
    // Spread the denominator banks so they matter at this scale.
    let mut spread = root.fork(2);
    let infos = model.param_infos();
    for (info, t) in infos.iter().zip(model.params_mut()) {
        if info.name.contains(".den_") {
            let n = t.len();
            *t = Tensor::new(&info.shape, spread.uniform(-1.0, 1.0, n)?)?;
        }
    }
    let batch = 2;
    let mut data = root.fork(3);
    let x = Tensor::new(
        &[batch, config.input_length, config.input_channels],
        data.uniform(-1.0, 1.0, batch * config.input_length * config.input_channels)?,
    )?;
    let mut targets = Tensor::zeros(&[batch, config.classes]);
    for b in 0..batch {
        let class = (data.next_u64() % config.classes as u64) as usize;
        targets.data_mut()[b * config.classes + class] = 1.0;
    }
    if q > 0 && model.min_denominator_term(&x)? < KINK_MARGIN {
        return Ok(None);
    }
    grad_check_network(&model, &x, &targets, Mode::Train, seed, eps).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(lambda: f64) -> Model {
        let c = ModelConfig {
            input_length: 8,
            blocks: 1,
            filters: 1,
            kernel: 1,
            dense_units: 1,
            classes: 8,
            l2_lambda: lambda,
            ..ModelConfig::with_orders(1, 0, ActivationKind::LeakyRelu)
        };
        Model::zeros(&c).unwrap()
    }

    #[test]
    fn documented_values() {
        let model = tiny(0.0);
        let uniform = Tensor::filled(&[2, 8], 0.125);
        let mut t = Tensor::zeros(&[2, 8]);
        t.data_mut()[3] = 1.0;
        t.data_mut()[8 + 5] = 1.0;
        let v = cross_entropy_loss(&uniform, &t, &model, 0.0).unwrap();
        assert!((v - 8f64.ln()).abs() < 1e-15);
        assert!((v - 2.079442).abs() < 1e-6);
        assert_eq!(cross_entropy_loss(&t, &t, &model, 0.0).unwrap(), 0.0);

        let mut model = tiny(1e-4);
        model.params_mut()[0].data_mut()[0] = 2.0;
        let v = cross_entropy_loss(&t, &t, &model, 1e-4).unwrap();
        assert!((v - 4e-4).abs() < 1e-18);
    }

    #[test]
    fn penalty_skips_biases_and_dense_layers() {
        let mut model = tiny(1.0);
        for t in model.params_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 1.0);
        }
        let kernels: usize = model
            .param_infos()
            .iter()
            .filter(|i| i.regularized)
            .map(|i| i.shape.iter().product::<usize>())
            .sum();
        assert_eq!(kernels, 1);
        assert_eq!(l2_penalty(&model, 1.0), 1.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let model = tiny(0.0);
        assert!(cross_entropy_loss(&Tensor::zeros(&[2, 8]), &Tensor::zeros(&[2, 7]), &model, 0.0).is_err());
    }

    #[test]
    fn recorded_loss_matches_value() {
        let c = ModelConfig {
            input_length: 16,
            blocks: 2,
            filters: 2,
            dense_units: 3,
            ..ModelConfig::with_orders(2, 1, ActivationKind::Tanh)
        };
        let mut rng = RngStream::new(4);
        let model = Model::build(&c, &mut rng).unwrap();
        let x = Tensor::new(&[3, 16, 1], rng.uniform(-1.0, 1.0, 48).unwrap()).unwrap();
        let mut t = Tensor::zeros(&[3, 8]);
        for b in 0..3 {
            t.data_mut()[b * 8 + b] = 1.0;
        }
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let rec = model.record(&mut tape, xv, Mode::Eval, &mut rng).unwrap();
        let loss = record_loss(&mut tape, &model, rec.probs, &rec.params, &t, c.l2_lambda).unwrap();
        let direct = cross_entropy_loss(&model.predict(&x).unwrap(), &t, &model, c.l2_lambda).unwrap();
        assert!((tape.value(loss).item() - direct).abs() < 1e-14);
    }

    #[test]
    fn toy_network_gradients_agree() {
        let mut checked = 0;
        for seed in 0..3 {
            if let Some(r) = toy_network_grad_check(2, 1, ActivationKind::Tanh, seed, 1e-5).unwrap() {
                assert!(r.max_rel_error <= 1e-5, "seed {seed}: {r:?}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
