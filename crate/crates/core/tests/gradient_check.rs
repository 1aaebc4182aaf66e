//! Back-propagated gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochq::approx::MlpParams;

const H: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms: below it the
/// finite difference is dominated by rounding in the loss, not by the method.
const FLOOR: f64 = 1e-6;

fn max_relative_error(net: &MlpParams, batch: &[(Vec<f64>, f64)]) -> f64 {
    let (_, grad) = net.gradient(batch).unwrap();
    let analytic: Vec<f64> = grad.iter().copied().collect();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        *plus.iter_mut().nth(i).unwrap() += H;
        let mut minus = net.clone();
        *minus.iter_mut().nth(i).unwrap() -= H;
        let numeric = (plus.loss(batch).unwrap() - minus.loss(batch).unwrap()) / (2.0 * H);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}

/// Smallest `|pre-activation|` over the hidden units for input `x`.
fn hidden_margin(net: &MlpParams, x: &[f64]) -> f64 {
    let layers = net.layers();
    let mut act = x.to_vec();
    let mut margin = f64::INFINITY;
    for layer in &layers[..layers.len() - 1] {
        let mut z = layer.b.clone();
        for (i, &xi) in act.iter().enumerate() {
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += xi * layer.w[i * layer.n_out + o];
            }
        }
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        act = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    margin
}

/// Random network and batch, redrawing inputs that put a hidden unit within
/// `MARGIN` of its ReLU kink, where a difference quotient of width `2H`
/// would straddle a point of non-differentiability.
fn random_point(seed: u64, sizes: &[usize], batch: usize) -> (MlpParams, Vec<(Vec<f64>, f64)>) {
    const MARGIN: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = MlpParams::init(sizes, &mut rng).unwrap();
    let mut data = Vec::with_capacity(batch);
    while data.len() < batch {
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        if hidden_margin(&net, &x) > MARGIN {
            data.push((x, rng.random_range(-2.0..2.0)));
        }
    }
    (net, data)
}

#[test]
fn gradient_matches_finite_differences_4_64_64_1() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (net, batch) = random_point(seed, &[4, 64, 64, 1], 4);
        worst = worst.max(max_relative_error(&net, &batch));
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn gradient_matches_on_deeper_narrow_net() {
    for seed in 100..105 {
        let (net, batch) = random_point(seed, &[3, 5, 7, 4, 1], 6);
        let e = max_relative_error(&net, &batch);
        assert!(e < 1e-4, "seed {seed}: {e:e}");
    }
}
