//! Whole-model gradient checking: analytic backward vs central finite
//! differences of the scalar loss, over every parameter value.

use crate::error::Result;
use crate::model::config::{Activation, ModelConfig};
use crate::model::forward::{model_forward, RunMode};
use crate::model::loss::cross_entropy;
use crate::model::params::{init_parameters, Initializer, Parameters};
use crate::numerics::RandomSource;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub worst_tensor: String,
    pub checked_values: usize,
    /// Seed actually used (ReLU configs may advance past kink-adjacent draws).
    pub seed: u64,
}

/// Relative error with a floor: entries below the floor are compared
/// absolutely at `floor * tol`. The floor absorbs the ~1e-8 noise of central
/// differences on a loss of order one.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

const REL_ERR_FLOOR: f64 = 1e-4;

fn scalar_loss(
    params: &Parameters,
    config: &ModelConfig,
    tokens: &[usize],
    targets: &[usize],
) -> f64 {
    let (logits, _) = model_forward(
        tokens,
        params,
        config,
        RunMode::Train,
        &mut RandomSource::new(0),
    )
    .expect("gradcheck forward");
    cross_entropy(&logits, targets).expect("gradcheck loss").0
}

/// Checks every parameter gradient of a dropout-free model against central
/// finite differences. ReLU configs skip seeds that put any FFN
/// preactivation within 1e-3 of the kink.
pub fn run_gradcheck(config: &ModelConfig, seed: u64, eps: f64) -> Result<GradcheckReport> {
    assert_eq!(
        config.dropout_rate, 0.0,
        "gradient checks require dropout_rate 0"
    );
    let mut seed = seed;
    for _attempt in 0..64 {
        let mut rng = RandomSource::new(seed);
        let params = init_parameters(config, Initializer::MegatronSmall, &mut rng)?;
        let mut data_rng = rng.fork();
        let tokens: Vec<usize> = (0..config.seq_len)
            .map(|_| data_rng.index(config.vocab_size))
            .collect();
        let targets: Vec<usize> = (0..config.seq_len)
            .map(|_| data_rng.index(config.vocab_size))
            .collect();

        if config.activation == Activation::ReLU {
            let (_, cache) = model_forward(
                &tokens,
                &params,
                config,
                RunMode::Train,
                &mut RandomSource::new(0),
            )?;
            let min_abs_pre = cache
                .layers
                .iter()
                .flat_map(|lc| lc.ffn.pre.as_slice().iter())
                .fold(f64::INFINITY, |m, &v| m.min(v.abs()));
            if min_abs_pre <= 1e-3 {
                seed = seed.wrapping_add(7919);
                continue;
            }
        }

        return Ok(gradcheck_at(&params, config, &tokens, &targets, eps, seed));
    }
    unreachable!("could not find a kink-free ReLU draw in 64 attempts");
}

fn gradcheck_at(
    params: &Parameters,
    config: &ModelConfig,
    tokens: &[usize],
    targets: &[usize],
    eps: f64,
    seed: u64,
) -> GradcheckReport {
    let (logits, cache) = model_forward(
        tokens,
        params,
        config,
        RunMode::Train,
        &mut RandomSource::new(0),
    )
    .expect("forward");
    let (_, d_logits) = cross_entropy(&logits, targets).expect("loss");
    let analytic = crate::model::backward::model_backward(&cache, params, config, &d_logits)
        .expect("backward");

    let analytic_flat: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|s| (s.name, s.tensor.as_slice().to_vec()))
        .collect();

    let mut work = params.clone();
    let n_slots = analytic_flat.len();
    let mut max_rel = 0.0_f64;
    let mut worst = String::new();
    let mut checked = 0usize;

    let set = |w: &mut Parameters, s: usize, idx: usize, v: f64| {
        w.tensors_mut()[s].1.as_mut_slice()[idx] = v;
    };

    for s in 0..n_slots {
        let (name, an_values) = &analytic_flat[s];
        // The embedding-table gradient is deliberately the gamma-scaled loss
        // derivative under EmbedDetach (the detached branch carries value but
        // no gradient), so the finite-difference oracle for those tensors is
        // gamma times the plain loss derivative.
        let fd_scale = if name == "embedding" || name == "pos_embedding" {
            config.embed_mode.gradient_scale()
        } else {
            1.0
        };
        for (idx, &an) in an_values.iter().enumerate() {
            let orig = work.tensors_mut()[s].1.as_slice()[idx];
            set(&mut work, s, idx, orig + eps);
            let lp = scalar_loss(&work, config, tokens, targets);
            set(&mut work, s, idx, orig - eps);
            let lm = scalar_loss(&work, config, tokens, targets);
            set(&mut work, s, idx, orig);
            let fd = fd_scale * (lp - lm) / (2.0 * eps);
            let err = rel_err(an, fd, REL_ERR_FLOOR);
            if err > max_rel {
                max_rel = err;
                worst = format!("{name}[{idx}]");
            }
            checked += 1;
        }
    }

    GradcheckReport {
        max_rel_err: max_rel,
        worst_tensor: worst,
        checked_values: checked,
        seed,
    }
}
