#![allow(dead_code)]

use skillchain::tensorlite::{Head, Mlp};

/// Result of comparing backprop against central differences.
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates skipped because the perturbation flipped a ReLU.
    pub skipped: usize,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Checks every parameter and input gradient of `sum(upstream * net(input))`
/// against central finite differences with step `eps`.
pub fn grad_check(net: &Mlp, input: &[f64], batch: usize, upstream: &[f64], eps: f64) -> GradCheck {
    let loss = |n: &Mlp, x: &[f64]| -> (f64, Vec<bool>) {
        let tape = n.forward_cached(x, batch).unwrap();
        let l = tape.output().iter().zip(upstream).map(|(o, u)| o * u).sum();
        (l, tape.active_units())
    };
    let tape = net.forward_cached(input, batch).unwrap();
    let grads = net.backward(&tape, upstream).unwrap();
    let base_mask = tape.active_units();

    let mut report = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut probe = net.clone();
    for k in 0..net.num_params() {
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + eps;
        let (lp, mp) = loss(&probe, input);
        probe.params_mut()[k] = orig - eps;
        let (lm, mm) = loss(&probe, input);
        probe.params_mut()[k] = orig;
        if mp != base_mask || mm != base_mask {
            report.skipped += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * eps);
        report.max_rel_err = report.max_rel_err.max(rel_err(grads.params[k], fd));
        report.checked += 1;
    }
    let mut x = input.to_vec();
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + eps;
        let (lp, mp) = loss(net, &x);
        x[k] = orig - eps;
        let (lm, mm) = loss(net, &x);
        x[k] = orig;
        if mp != base_mask || mm != base_mask {
            report.skipped += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * eps);
        report.max_rel_err = report.max_rel_err.max(rel_err(grads.input[k], fd));
        report.checked += 1;
    }
    report
}

pub fn all_heads(out: usize) -> Vec<Head> {
    vec![
        Head::Identity,
        Head::Tanh {
            lo: (0..out).map(|j| -1.0 - j as f64).collect(),
            hi: (0..out).map(|j| 0.5 + j as f64).collect(),
        },
        Head::Gaussian,
    ]
}
