use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wtap_core::nn::{NetArchitecture, Network, Variant, Workspace};

fn half_sq(net: &Network, x: &[f64], y: &[f64]) -> f64 {
    let out = net.forward(x).unwrap();
    0.5 * out.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Central differences over every parameter of a small residual net, which
/// exercises weights, biases, trunk slopes and shortcut slopes.
#[test]
fn gradient_matches_finite_differences() {
    let arch = NetArchitecture::residual(Variant::Custom, 6, 5, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut net = Network::init(&arch, 3).unwrap();
    // Move slopes away from their shared initial value so a slope mix-up shows.
    for p in net.params_mut().iter_mut() {
        *p += rng.random_range(-0.1..0.1);
    }
    let x = random_vec(&mut rng, 6, 1.0);
    let y = random_vec(&mut rng, 3, 1.0);
    let analytic = net.backward(&x, &y).unwrap();

    let h = 1e-6;
    let layout = net.layout().clone();
    let mut checked = [0usize; 4];
    for i in 0..layout.total {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = half_sq(&net, &x, &y);
        net.params_mut()[i] = orig - h;
        let down = half_sq(&net, &x, &y);
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = (numeric - analytic[i]).abs();
        assert!(
            err <= 1e-4 * analytic[i].abs().max(numeric.abs()).max(1e-3),
            "param {i}: analytic {} numeric {numeric}",
            analytic[i]
        );
        let class = if layout.shortcuts.iter().any(|r| r.contains(&i)) {
            3
        } else if layout.layers.iter().any(|s| s.weight.contains(&i)) {
            0
        } else if layout.layers.iter().any(|s| s.bias.contains(&i)) {
            1
        } else {
            2
        };
        checked[class] += 1;
    }
    assert!(checked.iter().all(|&c| c > 0), "{checked:?}");
}

#[test]
fn deep_net_gradient_spot_check() {
    let arch = NetArchitecture::deep_net();
    let net = Network::init(&arch, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_vec(&mut rng, 72, 1.0);
    let y = random_vec(&mut rng, 6, 2.0);
    let analytic = net.backward(&x, &y).unwrap();
    let mut probe = net.clone();
    let h = 1e-6;
    let layout = net.layout().clone();
    let mut picks: Vec<usize> = layout
        .layers
        .iter()
        .flat_map(|s| [s.weight.start + 7, s.bias.start + 1])
        .collect();
    picks.extend(layout.layers.iter().filter_map(|s| s.slope.as_ref().map(|r| r.start + 3)));
    picks.extend(layout.shortcuts.iter().map(|r| r.start + 5));
    for i in picks {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = half_sq(&probe, &x, &y);
        probe.params_mut()[i] = orig - h;
        let down = half_sq(&probe, &x, &y);
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        assert!(
            (numeric - analytic[i]).abs() <= 1e-4 * analytic[i].abs().max(1e-3),
            "param {i}: analytic {} numeric {numeric}",
            analytic[i]
        );
    }
}

#[test]
fn overfits_a_single_sample() {
    let arch = NetArchitecture::deep_net();
    let mut net = Network::init(&arch, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_vec(&mut rng, 72, 0.5);
    let y = random_vec(&mut rng, 6, 3.0);
    let mut grad = vec![0.0; net.layout().total];
    let mut ws = Workspace::default();
    let mut loss = f64::INFINITY;
    for _ in 0..2000 {
        loss = net.loss_and_grad(&x, &y, 1, &mut grad, &mut ws).unwrap().half_sq;
        if loss <= 1e-6 {
            break;
        }
        net.adam_step(&grad, 1e-3);
    }
    assert!(loss <= 1e-6, "loss {loss}");
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        rng_seed: RngSeed::Fixed(0x5ec7),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    /// A short step against the gradient never increases the batch loss.
    #[test]
    fn small_descent_step_does_not_increase_loss(seed in any::<u64>()) {
        let arch = NetArchitecture::residual(Variant::Custom, 8, 6, 3, 2);
        let mut net = Network::init(&arch, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let batch = 4;
        let x = random_vec(&mut rng, batch * 8, 1.0);
        let y = random_vec(&mut rng, batch * 3, 1.0);
        let mut grad = vec![0.0; net.layout().total];
        let mut ws = Workspace::default();
        let before = net.loss_and_grad(&x, &y, batch, &mut grad, &mut ws).unwrap().half_sq;
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        let eta = 1e-4 / norm2.sqrt().max(1.0);
        for (p, g) in net.params_mut().iter_mut().zip(&grad) {
            *p -= eta * g;
        }
        let mut scratch = vec![0.0; grad.len()];
        let after = net.loss_and_grad(&x, &y, batch, &mut scratch, &mut ws).unwrap().half_sq;
        prop_assert!(after <= before + 1e-15, "{before} -> {after}");
    }
}
