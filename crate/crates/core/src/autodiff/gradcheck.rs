use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Smallest relative-error denominator.
pub const REL_ERROR_FLOOR: f64 = 1e-12;

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter tensor and flat element where the maximum occurred.
    pub worst_param: usize,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

fn evaluate<F>(loss_fn: &F, params: &[Tensor]) -> Result<(Tape, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone()).0).collect();
    let loss = loss_fn(&mut tape, &vars)?;
    Ok((tape, loss))
}

fn loss_at<F>(loss_fn: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (tape, loss) = evaluate(loss_fn, params)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::numeric("non-finite loss at perturbed point"));
    }
    Ok(value)
}

/// Compares [`Tape::backward`] against `(f(θ+eps) - f(θ-eps)) / (2 eps)` for
/// every scalar in `params`, returning the largest
/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
///
/// `loss_fn` receives the parameter leaves in the order given and must return
/// a scalar node.
pub fn grad_check<F>(loss_fn: F, params: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::config(format!("finite-difference step {eps} outside [1e-6, 1e-4]")));
    }
    let (tape, loss) = evaluate(&loss_fn, params)?;
    let analytic = tape.backward(loss)?;
    drop(tape);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: 0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut probe: Vec<Tensor> = params.to_vec();
    for (pi, grad) in analytic.iter().enumerate() {
        for i in 0..params[pi].len() {
            let original = params[pi].data()[i];
            probe[pi].data_mut()[i] = original + eps;
            let up = loss_at(&loss_fn, &probe)?;
            probe[pi].data_mut()[i] = original - eps;
            let down = loss_at(&loss_fn, &probe)?;
            probe[pi].data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = pi;
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{min_denominator_term, pade_on_tape, PadeLayerParams, PadeVars};
    use crate::numerics::{KernelShape, RngStream};

    fn random(shape: &[usize], rng: &mut RngStream) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, rng.uniform(-1.0, 1.0, n).unwrap()).unwrap()
    }

    fn flatten_pade(p: &PadeLayerParams) -> Vec<Tensor> {
        p.numerator
            .iter()
            .chain(&p.numerator_bias)
            .chain(&p.denominator)
            .cloned()
            .collect()
    }

    fn pade_loss(p: usize, q: usize, x: Tensor, proj: Tensor) -> impl Fn(&mut Tape, &[Var]) -> Result<Var> {
        move |tape, vars| {
            let pv = PadeVars {
                numerator: vars[..p].to_vec(),
                numerator_bias: vars[p..2 * p].to_vec(),
                denominator: vars[2 * p..2 * p + q].to_vec(),
            };
            let xv = tape.input(x.clone());
            let y = pade_on_tape(tape, xv, &pv)?;
            tape.dot(y, &proj)
        }
    }

    #[test]
    fn rejects_step_outside_range() {
        let f = |tape: &mut Tape, v: &[Var]| Ok(tape.sum_squares(v[0]));
        assert!(grad_check(f, &[Tensor::vector(vec![1.0])], 1e-3).is_err());
    }

    #[test]
    fn pade_layer_p2_q1() {
        let mut rng = RngStream::new(17);
        let shape = KernelShape { taps: 3, cin: 1, cout: 1 };
        let mut checked = 0;
        while checked < 5 {
            let mut params = PadeLayerParams::zeros(2, 1, shape).unwrap();
            for t in params.numerator.iter_mut().chain(&mut params.numerator_bias).chain(&mut params.denominator) {
                *t = random(t.shape(), &mut rng);
            }
            let x = random(&[1, 8, 1], &mut rng);
            if min_denominator_term(&x, &params).unwrap() < 1e-6 {
                continue;
            }
            let proj = random(&[1, 8, 1], &mut rng);
            let report = grad_check(pade_loss(2, 1, x, proj), &flatten_pade(&params), 1e-5).unwrap();
            assert!(report.max_rel_error <= 1e-6, "{report:?}");
            checked += 1;
        }
    }

    #[test]
    fn pure_convolution() {
        let mut rng = RngStream::new(18);
        let shape = KernelShape { taps: 5, cin: 2, cout: 3 };
        let mut params = PadeLayerParams::zeros(1, 0, shape).unwrap();
        params.numerator[0] = random(&shape.dims(), &mut rng);
        params.numerator_bias[0] = random(&[3], &mut rng);
        let x = random(&[2, 10, 2], &mut rng);
        let proj = random(&[2, 10, 3], &mut rng);
        let report = grad_check(pade_loss(1, 0, x, proj), &flatten_pade(&params), 1e-5).unwrap();
        assert!(report.max_rel_error <= 1e-8, "{report:?}");
    }

    #[test]
    fn dense_softmax_cross_entropy() {
        let mut rng = RngStream::new(19);
        let x = random(&[4, 6], &mut rng);
        let mut targets = Tensor::zeros(&[4, 5]);
        for (r, c) in [(0, 1), (1, 4), (2, 0), (3, 1)] {
            targets.data_mut()[r * 5 + c] = 1.0;
        }
        let params = vec![random(&[6, 5], &mut rng), random(&[5], &mut rng)];
        let loss = move |tape: &mut Tape, v: &[Var]| {
            let xv = tape.input(x.clone());
            let z = tape.affine(xv, v[0], v[1])?;
            let p = tape.softmax(z)?;
            tape.cross_entropy(p, &targets)
        };
        let report = grad_check(loss, &params, 1e-5).unwrap();
        assert!(report.max_rel_error <= 1e-6, "{report:?}");
    }
}
