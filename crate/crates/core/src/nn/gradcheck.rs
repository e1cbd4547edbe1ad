use ndarray::{Array2, ArrayView2};

use crate::error::{invalid, Result};
use crate::nn::mlp::{Gradients, Mlp};

/// Scalar loss over a network output batch, returning the loss and its
/// gradient with respect to that output.
pub trait Loss: Fn(&Array2<f64>) -> (f64, Array2<f64>) {}
impl<F: Fn(&Array2<f64>) -> (f64, Array2<f64>)> Loss for F {}

/// Backpropagated gradient of `loss` at input `x`.
pub fn analytic_gradient(net: &Mlp, x: ArrayView2<f64>, loss: &impl Loss) -> Result<Gradients> {
    let (out, cache) = net.forward_cached(x)?;
    let (_, upstream) = loss(&out);
    Ok(net.backward(&cache, upstream.view())?.0)
}

/// Max over parameters of `|analytic - central difference| / max(1, |analytic|)`.
pub fn grad_check(net: &Mlp, x: ArrayView2<f64>, loss: &impl Loss, eps: f64) -> Result<f64> {
    let analytic = analytic_gradient(net, x, loss)?;
    grad_check_against(net, x, loss, eps, &analytic)
}

/// Same comparison against a caller-supplied gradient.
pub fn grad_check_against(
    net: &Mlp,
    x: ArrayView2<f64>,
    loss: &impl Loss,
    eps: f64,
    analytic: &Gradients,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(invalid("eps", "perturbation must lie in [1e-6, 1e-3]"));
    }
    let base = net.params();
    let flat = analytic.flat();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        params[i] = base[i] + eps;
        probe.set_params(&params)?;
        let plus = loss(&probe.forward_batch(x)?).0;
        params[i] = base[i] - eps;
        probe.set_params(&params)?;
        let minus = loss(&probe.forward_batch(x)?).0;
        params[i] = base[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let err = (flat[i] - numeric).abs() / flat[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `mean((y - target)^2)` over all entries.
pub fn mse_loss(target: Array2<f64>) -> impl Loss {
    move |y: &Array2<f64>| {
        let n = y.len() as f64;
        let diff = y - &target;
        let loss = diff.mapv(|d| d * d).sum() / n;
        (loss, diff * (2.0 / n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{Activation, Dense};
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn random_small_networks_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let net = Mlp::new(&[2, 16, 16, 2], Activation::Tanh, 1.0, &mut rng).unwrap();
            let x = random_batch(&mut rng, 4, 2);
            let target = random_batch(&mut rng, 4, 2);
            let err = grad_check(&net, x.view(), &mse_loss(target), 1e-5).unwrap();
            assert!(err < 1e-4, "relative error {err}");
        }
    }

    #[test]
    fn linear_network_is_exact() {
        let net = Mlp::from_layers(vec![Dense {
            weights: array![[0.5, -0.25], [1.0, 2.0]],
            bias: Array1::zeros(2),
            activation: Activation::Linear,
        }])
        .unwrap();
        let x = array![[0.3, -0.7], [1.1, 0.2]];
        let err = grad_check(&net, x.view(), &mse_loss(array![[0.0, 1.0], [1.0, 0.0]]), 1e-4).unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[2, 16, 16, 2], Activation::Tanh, 1.0, &mut rng).unwrap();
        let x = random_batch(&mut rng, 3, 2);
        let loss = mse_loss(random_batch(&mut rng, 3, 2));
        let mut grads = analytic_gradient(&net, x.view(), &loss).unwrap();
        grads.layers[1].0[[3, 5]] += 0.5;
        let err = grad_check_against(&net, x.view(), &loss, 1e-5, &grads).unwrap();
        assert!(err > 1e-2, "corruption not detected: {err}");
    }

    #[test]
    fn eps_outside_range_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[2, 3, 1], Activation::Tanh, 1.0, &mut rng).unwrap();
        let x = array![[0.1, 0.2]];
        assert!(grad_check(&net, x.view(), &mse_loss(array![[0.0]]), 0.1).is_err());
    }
}
