use dynaq_core::net::{LayeredNet, Loss, NetParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;

pub fn random_net(rng: &mut ChaCha8Rng, loss: Loss) -> (LayeredNet, Vec<f64>, Vec<f64>) {
    let params = NetParams {
        hidden: rng.gen_range(1..12),
        init_bound: rng.gen_range(0.05..1.5),
        learning_rate: 0.1,
        hidden_slope: rng.gen_range(0.5..2.0),
        output_slope: rng.gen_range(0.3..1.5),
        loss,
    };
    let (n, m) = (rng.gen_range(1..8), rng.gen_range(1..5));
    let net = LayeredNet::new(params, n, m, rng);
    let input = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let target = (0..m).map(|_| rng.gen_range(0.05..0.95)).collect();
    (net, input, target)
}

/// Central differences of the loss, parameter by parameter.
pub fn finite_difference(net: &LayeredNet, input: &[f64], target: &[f64]) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.params().len())
        .map(|i| {
            let base = probe.params()[i];
            probe.params_mut()[i] = base + H;
            let up = probe.loss_value(input, target).unwrap();
            probe.params_mut()[i] = base - H;
            let down = probe.loss_value(input, target).unwrap();
            probe.params_mut()[i] = base;
            (up - down) / (2.0 * H)
        })
        .collect()
}

pub fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}
