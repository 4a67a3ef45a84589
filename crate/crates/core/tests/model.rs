mod common;

use common::{random_batch, random_tensor, rng, small_config, zero_params};
use diffetm::gradcore::{finite_diff_check, GradCheckOptions, ParamStore, Tape, Tensor2D, Var};
use diffetm::model::{
    doc_topic_dist, draw_noise, kl_loss, reconstruct, reconstruction_loss, reparameterize, sample_eps,
    sample_eps_values, topic_word_dist, total_loss, DiffEtm, EvalPath, Mode, ModelConfig, Network, NoiseSchedule,
    Phase, TOPIC_EMBEDDINGS, WORD_EMBEDDINGS,
};
use diffetm::{Error, Result};
use proptest::prelude::*;
use rand::Rng;

const ALPHA_BAR_100: f64 = 0.36539785696983107;
const KL_LN4: f64 = 0.8068528194400546;

fn scalar(tape: &Tape, v: Var) -> f64 {
    tape.value(v).item().unwrap()
}

fn t(rows: &[&[f64]]) -> Tensor2D {
    Tensor2D::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

fn moments(col: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = col.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn paper_schedule_matches_product_oracle() {
    let s = NoiseSchedule::linear(100, 0.0, 0.02).unwrap();
    assert!((s.betas().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!((s.final_alpha_bar() - ALPHA_BAR_100).abs() <= 1e-12);
    assert!(s.final_alpha_bar() <= (-1.0f64).exp());
    let mut prod = 1.0;
    for (b, ab) in s.betas().iter().zip(s.alpha_bars()) {
        prod *= 1.0 - b;
        assert!((prod - ab).abs() <= 1e-12);
    }
}

#[test]
fn single_step_schedule_is_noise_free() {
    let s = NoiseSchedule::linear(1, 0.0, 0.02).unwrap();
    assert_eq!(s.betas(), &[0.0]);
    assert_eq!(s.final_alpha_bar(), 1.0);
    assert_eq!(NoiseSchedule::linear(0, 0.0, 0.02).unwrap().final_alpha_bar(), 1.0);
}

#[test]
fn schedule_rejects_beta_end_of_one() {
    assert!(matches!(NoiseSchedule::linear(10, 0.0, 1.0), Err(Error::InvalidSchedule(_))));
}

proptest! {
    #[test]
    fn alpha_bar_is_positive_and_non_increasing(steps in 0usize..300, a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s = NoiseSchedule::linear(steps, lo, hi).unwrap();
        prop_assert_eq!(s.steps(), steps);
        let mut prev = 1.0;
        for &ab in s.alpha_bars() {
            prop_assert!(ab > 0.0 && ab <= prev);
            prev = ab;
        }
    }

    #[test]
    fn theta_and_beta_rows_are_positive_distributions(seed in 0u64..1000, scale in 0.1f64..8.0) {
        let mut g = rng(seed);
        let z = random_tensor(&mut g, 4, 6, scale);
        let alpha = random_tensor(&mut g, 6, 3, scale);
        let rho = random_tensor(&mut g, 9, 3, scale);
        let mut tape = Tape::new();
        let zv = tape.constant(z);
        let th = doc_topic_dist(&mut tape, zv);
        let (a, r) = (tape.constant(alpha), tape.constant(rho));
        let be = topic_word_dist(&mut tape, a, r).unwrap();
        for v in [th, be] {
            let m = tape.value(v);
            prop_assert!(m.data().iter().all(|&x| x > 0.0));
            for s in m.row_sums() {
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn kl_is_nonnegative(seed in 0u64..1000) {
        let mut g = rng(seed);
        let mut tape = Tape::new();
        let mu = tape.constant(random_tensor(&mut g, 3, 4, 3.0));
        let lv = tape.constant(random_tensor(&mut g, 3, 4, 3.0));
        let kl = kl_loss(&mut tape, mu, lv).unwrap();
        prop_assert!(scalar(&tape, kl) > 0.0);
    }
}

#[test]
fn encoders_with_zero_weights_return_final_bias() {
    let mut model = DiffEtm::new(small_config(Mode::Diffusion, 1), 30).unwrap();
    let mut g = rng(1);
    for net in Network::ALL {
        for layer in 0..3 {
            model.params.value_mut(&net.weight(layer)).unwrap().fill(0.0);
        }
        *model.params.value_mut(&net.bias(2)).unwrap() = random_tensor(&mut g, 1, 5, 1.0);
    }
    let (counts, norm) = random_batch(&mut g, 4, 30);
    let mut tape = Tape::new();
    let vars = model.record(&mut tape, &counts, &norm, None).unwrap();
    for (v, net) in [(vars.x0, Network::DiffusionEncoder), (vars.mu, Network::Mu), (vars.logvar, Network::LogVar)] {
        let bias = model.params.value(&net.bias(2)).unwrap();
        for r in 0..4 {
            assert_eq!(tape.value(v).row(r), bias.row(0));
        }
    }
}

#[test]
fn identical_rows_encode_identically() {
    let model = DiffEtm::new(small_config(Mode::Diffusion, 2), 30).unwrap();
    let (counts, norm) = random_batch(&mut rng(2), 1, 30);
    let rep = |m: &Tensor2D| Tensor2D::from_fn(3, 30, |_, j| m.get(0, j));
    let mut tape = Tape::new();
    let vars = model.record(&mut tape, &rep(&counts), &rep(&norm), None).unwrap();
    for v in [vars.x0, vars.mu, vars.logvar, vars.theta] {
        let m = tape.value(v);
        assert_eq!(m.row(0), m.row(1));
        assert_eq!(m.row(0), m.row(2));
    }
}

#[test]
fn sample_eps_modes() {
    let x0 = t(&[&[0.5, -1.0]]);
    let n = t(&[&[0.3, 0.7]]);
    let paper = NoiseSchedule::linear(100, 0.0, 0.02).unwrap();
    let empty = NoiseSchedule::linear(0, 0.0, 0.02).unwrap();
    let zero = NoiseSchedule::linear(50, 0.0, 0.0).unwrap();
    let eval = |s: &NoiseSchedule, mode, noise: Option<&Tensor2D>| {
        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let e = sample_eps(&mut tape, x, s, mode, noise).unwrap();
        tape.value(e).clone()
    };
    assert_eq!(eval(&empty, Mode::Diffusion, Some(&n)), x0);
    assert_eq!(eval(&zero, Mode::Diffusion, Some(&n)), x0);
    assert_eq!(eval(&paper, Mode::NoDiffusion, Some(&n)), x0);
    assert_eq!(eval(&paper, Mode::StandardEtm, Some(&n)), n);
    assert_eq!(eval(&paper, Mode::StandardEtm, None), Tensor2D::zeros(1, 2));
    let a = paper.final_alpha_bar();
    let got = eval(&paper, Mode::Diffusion, Some(&n));
    for j in 0..2 {
        let want = a.sqrt() * x0.get(0, j) + (1.0 - a).sqrt() * n.get(0, j);
        assert!((got.get(0, j) - want).abs() <= 1e-15);
    }
    let mean = eval(&paper, Mode::Diffusion, None);
    assert!((mean.get(0, 1) + a.sqrt()).abs() <= 1e-15);
    let mut g = rng(0);
    assert_eq!(sample_eps_values(&x0, &zero, Mode::Diffusion, &mut g), x0);
}

const DRAWS: usize = 100_000;

#[test]
fn standard_etm_noise_is_standard_normal() {
    let x0 = Tensor2D::full(DRAWS, 3, 5.0);
    let s = NoiseSchedule::linear(100, 0.0, 0.02).unwrap();
    let eps = sample_eps_values(&x0, &s, Mode::StandardEtm, &mut rng(11));
    for j in 0..3 {
        let (m, v) = moments((0..DRAWS).map(|r| eps.get(r, j)));
        assert!(m.abs() <= 4e-2, "mean {m}");
        assert!((v - 1.0).abs() <= 0.02, "var {v}");
    }
}

#[test]
fn diffusion_noise_matches_closed_form() {
    let center = [1.5, -0.7, 0.0];
    let x0 = Tensor2D::from_fn(DRAWS, 3, |_, j| center[j]);
    let s = NoiseSchedule::linear(100, 0.0, 0.02).unwrap();
    let a = s.final_alpha_bar();
    let eps = sample_eps_values(&x0, &s, Mode::Diffusion, &mut rng(12));
    for j in 0..3 {
        let (m, v) = moments((0..DRAWS).map(|r| eps.get(r, j)));
        let se = ((1.0 - a) / DRAWS as f64).sqrt();
        assert!((m - a.sqrt() * center[j]).abs() <= 5.0 * se, "mean {m}");
        assert!((v / (1.0 - a) - 1.0).abs() <= 0.02, "var {v}");
    }
}

#[test]
fn iterated_steps_match_one_shot_draw() {
    let s = NoiseSchedule::linear(5, 0.1, 0.5).unwrap();
    let x0 = 2.0;
    let mut g = rng(13);
    let iterated: Vec<f64> = (0..DRAWS)
        .map(|_| {
            s.betas().iter().fold(x0, |x, &b| {
                let n: f64 = g.sample(rand_distr::StandardNormal);
                (1.0 - b).sqrt() * x + b.sqrt() * n
            })
        })
        .collect();
    let one_shot = sample_eps_values(&Tensor2D::full(DRAWS, 1, x0), &s, Mode::Diffusion, &mut rng(14));
    let (mi, vi) = moments(iterated.into_iter());
    let (mo, vo) = moments(one_shot.data().iter().copied());
    let a = s.final_alpha_bar();
    for (m, v) in [(mi, vi), (mo, vo)] {
        assert!((m / (a.sqrt() * x0) - 1.0).abs() <= 0.02, "mean {m}");
        assert!((v / (1.0 - a) - 1.0).abs() <= 0.02, "var {v}");
    }
    assert!((mi / mo - 1.0).abs() <= 0.02 && (vi / vo - 1.0).abs() <= 0.02);
}

#[test]
fn reparameterize_examples() {
    let run = |e: Tensor2D, m: Tensor2D, l: Tensor2D| {
        let mut tape = Tape::new();
        let (e, m, l) = (tape.constant(e), tape.constant(m), tape.constant(l));
        let z = reparameterize(&mut tape, e, m, l).unwrap();
        tape.value(z).clone()
    };
    let mu = t(&[&[0.3, -2.0]]);
    let eps = t(&[&[1.1, 0.4]]);
    assert_eq!(run(Tensor2D::zeros(1, 2), mu.clone(), t(&[&[1.0, -3.0]])), mu);
    assert_eq!(run(eps.clone(), Tensor2D::zeros(1, 2), Tensor2D::zeros(1, 2)), eps);
    let z = run(t(&[&[2.0]]), t(&[&[1.0]]), t(&[&[4f64.ln()]]));
    assert!((z.item().unwrap() - 5.0).abs() <= 1e-12);
}

#[test]
fn doc_topic_examples() {
    let run = |z: Tensor2D| {
        let mut tape = Tape::new();
        let v = tape.constant(z);
        let th = doc_topic_dist(&mut tape, v);
        tape.value(th).clone()
    };
    assert!(run(Tensor2D::zeros(1, 5)).data().iter().all(|&x| (x - 0.2).abs() <= 1e-15));
    let th = run(t(&[&[0.0, 3f64.ln()]]));
    assert!((th.get(0, 0) - 0.25).abs() <= 1e-12 && (th.get(0, 1) - 0.75).abs() <= 1e-12);
    let z = t(&[&[0.1, -0.4, 2.0]]);
    assert!(run(z.clone()).max_abs_diff(&run(z.map(|x| x + 17.0))) <= 1e-12);
}

#[test]
fn topic_word_examples() {
    let run = |a: Tensor2D, r: Tensor2D| {
        let mut tape = Tape::new();
        let (a, r) = (tape.constant(a), tape.constant(r));
        let b = topic_word_dist(&mut tape, a, r).unwrap();
        tape.value(b).clone()
    };
    let mut g = rng(5);
    let rho = random_tensor(&mut g, 7, 3, 1.0);
    assert!(run(Tensor2D::zeros(2, 3), rho.clone()).data().iter().all(|&x| (x - 1.0 / 7.0).abs() <= 1e-15));
    let beta = run(t(&[&[1.0]]), t(&[&[0.0], &[3f64.ln()]]));
    assert!((beta.get(0, 0) - 0.25).abs() <= 1e-12 && (beta.get(0, 1) - 0.75).abs() <= 1e-12);

    // Rescaling one word's embedding only moves that word's logit column.
    let alpha = random_tensor(&mut g, 2, 3, 1.0);
    let logits = |r: &Tensor2D| diffetm::gradcore::matmul(&alpha, diffetm::gradcore::Trans::No, r, diffetm::gradcore::Trans::Yes).unwrap();
    let mut scaled = rho.clone();
    scaled.row_mut(4).iter_mut().for_each(|x| *x *= 3.0);
    let (l0, l1) = (logits(&rho), logits(&scaled));
    for k in 0..2 {
        for j in 0..7 {
            if j == 4 {
                assert!((l1.get(k, j) - 3.0 * l0.get(k, j)).abs() <= 1e-12);
            } else {
                assert_eq!(l0.get(k, j), l1.get(k, j));
            }
        }
    }
    let mut tape = Tape::new();
    let (a, r) = (tape.constant(t(&[&[1.0, 0.0]])), tape.constant(t(&[&[1.0, 2.0, 3.0]])));
    assert!(matches!(topic_word_dist(&mut tape, a, r), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn reconstruct_examples() {
    let beta = t(&[&[0.1, 0.2, 0.7], &[0.5, 0.25, 0.25]]);
    let run = |th: Tensor2D| {
        let mut tape = Tape::new();
        let (th, b) = (tape.constant(th), tape.constant(beta.clone()));
        let x = reconstruct(&mut tape, th, b).unwrap();
        tape.value(x).clone()
    };
    assert_eq!(run(t(&[&[0.0, 1.0]])).row(0), beta.row(1));
    let avg = run(t(&[&[0.5, 0.5]]));
    for j in 0..3 {
        assert!((avg.get(0, j) - 0.5 * (beta.get(0, j) + beta.get(1, j))).abs() <= 1e-15);
    }
    let x = run(t(&[&[0.3, 0.7], &[0.9, 0.1]]));
    assert!(x.row_sums().iter().all(|s| (s - 1.0).abs() <= 1e-9));
}

#[test]
fn reconstruction_loss_examples() {
    let run = |c: Tensor2D, x: Tensor2D, floor| {
        let mut tape = Tape::new();
        let (c, x) = (tape.constant(c), tape.constant(x));
        reconstruction_loss(&mut tape, c, x, floor).map(|l| scalar(&tape, l))
    };
    assert_eq!(run(t(&[&[0.0, 1.0]]), t(&[&[0.0, 1.0]]), Some(1e-12)).unwrap(), 0.0);
    let v = 8;
    let counts = t(&[&[2.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 4.0], &[0.0, 7.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
    let uniform = Tensor2D::full(2, v, 1.0 / v as f64);
    let got = run(counts.clone(), uniform, None).unwrap();
    assert!((got - 7.0 * (v as f64).ln()).abs() <= 1e-12);

    let mut g = rng(6);
    let (c, _) = random_batch(&mut g, 5, 12);
    let x = random_tensor(&mut g, 5, 12, 1.0).map(|x| x.abs() + 0.01);
    let mut naive = 0.0;
    for d in 0..5 {
        for j in 0..12 {
            naive -= c.get(d, j) * x.get(d, j).ln();
        }
    }
    assert!((run(c, x, None).unwrap() - naive / 5.0).abs() <= 1e-10);

    let err = run(t(&[&[1.0, 1.0]]), t(&[&[0.0, 1.0]]), None);
    assert!(matches!(err, Err(Error::DomainError { .. })));
}

#[test]
fn kl_examples() {
    let run = |m: Tensor2D, l: Tensor2D| {
        let mut tape = Tape::new();
        let (m, l) = (tape.constant(m), tape.constant(l));
        let k = kl_loss(&mut tape, m, l).unwrap();
        scalar(&tape, k)
    };
    assert_eq!(run(Tensor2D::zeros(3, 4), Tensor2D::zeros(3, 4)), 0.0);
    assert!((run(t(&[&[1.0]]), t(&[&[0.0]])) - 0.5).abs() <= 1e-15);
    assert!((run(t(&[&[0.0]]), t(&[&[4f64.ln()]])) - KL_LN4).abs() <= 1e-12);
}

#[test]
fn total_loss_examples() {
    let run = |r: f64, k: f64, lambda: f64| {
        let mut tape = Tape::new();
        let (r, k) = (tape.constant(Tensor2D::scalar(r)), tape.constant(Tensor2D::scalar(k)));
        let l = total_loss(&mut tape, r, k, lambda).unwrap();
        scalar(&tape, l)
    };
    assert_eq!(run(2.0, 3.0, 1.0), 5.0);
    assert_eq!(run(2.0, 3.0, 0.0), 2.0);
    let mut prev = f64::NEG_INFINITY;
    for i in 0..10 {
        let l = run(2.0, 0.4, i as f64 * 0.3);
        assert!(l >= prev);
        prev = l;
    }
}

fn with_params(model: &DiffEtm, store: &ParamStore) -> DiffEtm {
    DiffEtm {
        params: store.clone(),
        ..model.clone()
    }
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for mode in [Mode::Diffusion, Mode::NoDiffusion, Mode::StandardEtm] {
        let model = DiffEtm::new(small_config(mode, 21), 30).unwrap();
        let mut g = rng(21);
        let (counts, norm) = random_batch(&mut g, 6, 30);
        let noise = draw_noise(&mut g, 6, 5);
        let loss = |tape: &mut Tape, s: &ParamStore| -> Result<Var> {
            let m = with_params(&model, s);
            Ok(m.record(tape, &counts, &norm, Some(&noise))?.total)
        };
        let skip_encoder = mode == Mode::StandardEtm;
        for name in model.params.names() {
            if skip_encoder && name.starts_with(Network::DiffusionEncoder.prefix()) {
                continue;
            }
            // The loss is O(10), so difference quotients carry ~1e-10 of round-off.
            let opts = GradCheckOptions {
                max_coords: 24,
                min_scale: 1e-5,
                ..Default::default()
            };
            let err = finite_diff_check(&model.params, name, loss, &opts).unwrap();
            assert!(err <= 1e-4, "{mode:?} {name}: {err}");
        }
    }
}

#[test]
fn encoder_gradients_match_finite_differences() {
    let model = DiffEtm::new(small_config(Mode::Diffusion, 22), 30).unwrap();
    let (_, norm) = random_batch(&mut rng(22), 4, 30);
    for net in Network::ALL {
        let loss = |tape: &mut Tape, s: &ParamStore| -> Result<Var> {
            let x = tape.constant(norm.clone());
            let out = net.record(tape, s, x)?;
            Ok(tape.sum_all(out))
        };
        let err = finite_diff_check(&model.params, &net.weight(0), loss, &GradCheckOptions::default()).unwrap();
        assert!(err <= 1e-4, "{net:?}: {err}");
    }
}

#[test]
fn total_gradient_is_recon_plus_weighted_kl() {
    let mut cfg = small_config(Mode::Diffusion, 23);
    cfg.kl_weight = 0.37;
    let model = DiffEtm::new(cfg, 30).unwrap();
    let mut g = rng(23);
    let (counts, norm) = random_batch(&mut g, 5, 30);
    let noise = draw_noise(&mut g, 5, 5);
    let grads = |pick: fn(&diffetm::model::BatchVars) -> Var| {
        let mut store = model.params.clone();
        store.zero_grads();
        let mut tape = Tape::new();
        let vars = model.record(&mut tape, &counts, &norm, Some(&noise)).unwrap();
        tape.backward(pick(&vars), &mut store).unwrap();
        store
    };
    let total = grads(|v| v.total);
    let recon = grads(|v| v.recon);
    let kl = grads(|v| v.kl);
    for name in model.params.names() {
        let (a, b, c) = (total.grad(name).unwrap(), recon.grad(name).unwrap(), kl.grad(name).unwrap());
        for i in 0..a.len() {
            assert!((a.data()[i] - (b.data()[i] + 0.37 * c.data()[i])).abs() <= 1e-10, "{name}");
        }
    }
}

#[test]
fn standard_etm_deterministic_path_uses_mu() {
    let model = DiffEtm::new(small_config(Mode::StandardEtm, 24), 30).unwrap();
    let (counts, norm) = random_batch(&mut rng(24), 4, 30);
    let out = model.forward_batch(&counts, &norm, Phase::Eval, &mut rng(0)).unwrap();
    assert_eq!(out.latent.z, out.latent.mu);
}

#[test]
fn forward_is_deterministic_per_seed() {
    for eval_path in [EvalPath::Deterministic, EvalPath::Sampled] {
        let cfg = ModelConfig {
            eval_path,
            ..small_config(Mode::Diffusion, 25)
        };
        let (counts, norm) = random_batch(&mut rng(25), 4, 30);
        let run = || {
            let model = DiffEtm::new(cfg.clone(), 30).unwrap();
            model.forward_batch(&counts, &norm, Phase::Train, &mut rng(9)).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.total.to_bits(), b.total.to_bits());
        assert_eq!(a, b);
    }
}

#[test]
fn no_diffusion_equals_zero_step_diffusion() {
    let (counts, norm) = random_batch(&mut rng(26), 4, 30);
    let nd = DiffEtm::new(small_config(Mode::NoDiffusion, 26), 30).unwrap();
    let d0 = DiffEtm::new(
        ModelConfig {
            diffusion_steps: 0,
            ..small_config(Mode::Diffusion, 26)
        },
        30,
    )
    .unwrap();
    for phase in [Phase::Train, Phase::Eval] {
        let a = nd.forward_batch(&counts, &norm, phase, &mut rng(1)).unwrap();
        let b = d0.forward_batch(&counts, &norm, phase, &mut rng(1)).unwrap();
        assert_eq!((a.recon, a.kl, a.total), (b.recon, b.kl, b.total));
    }
}

#[test]
fn batch_shares_one_beta_and_reconstructs_rows() {
    let model = DiffEtm::new(small_config(Mode::Diffusion, 27), 30).unwrap();
    let (counts, norm) = random_batch(&mut rng(27), 6, 30);
    let mut tape = Tape::new();
    let vars = model.record(&mut tape, &counts, &norm, None).unwrap();
    assert_eq!(tape.value(vars.beta), &model.topic_word().unwrap());
    assert!(tape.value(vars.x_recon).row_sums().iter().all(|s| (s - 1.0).abs() <= 1e-9));
    assert!(tape.value(vars.theta).row_sums().iter().all(|s| (s - 1.0).abs() <= 1e-6));
}

#[test]
fn zero_mu_logvar_nets_give_zero_kl_and_unit_sigma() {
    let mut model = DiffEtm::new(small_config(Mode::Diffusion, 28), 30).unwrap();
    zero_params(&mut model, Network::Mu.prefix());
    zero_params(&mut model, Network::LogVar.prefix());
    let (counts, norm) = random_batch(&mut rng(28), 3, 30);
    let out = model.forward_batch(&counts, &norm, Phase::Train, &mut rng(2)).unwrap();
    assert_eq!(out.kl, 0.0);
    assert_eq!(out.latent.z, out.latent.eps);
}

#[test]
fn zero_topic_embeddings_give_uniform_beta() {
    let mut model = DiffEtm::new(small_config(Mode::Diffusion, 29), 30).unwrap();
    zero_params(&mut model, TOPIC_EMBEDDINGS);
    let beta = model.topic_word().unwrap();
    assert!(beta.data().iter().all(|&x| (x - 1.0 / 30.0).abs() <= 1e-15));
    assert_eq!(model.params.value(WORD_EMBEDDINGS).unwrap().shape(), (30, 8));
}

#[test]
fn wrong_vocabulary_width_is_rejected() {
    let model = DiffEtm::new(small_config(Mode::Diffusion, 30), 30).unwrap();
    let (counts, norm) = random_batch(&mut rng(30), 2, 29);
    let err = model.forward_batch(&counts, &norm, Phase::Eval, &mut rng(0));
    assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
}

#[test]
fn invalid_model_configs_are_rejected() {
    for cfg in [
        ModelConfig { num_topics: 1, ..Default::default() },
        ModelConfig { kl_weight: -1.0, ..Default::default() },
        ModelConfig { beta_start: 0.03, beta_end: 0.02, ..Default::default() },
        ModelConfig { beta_end: 1.0, ..Default::default() },
    ] {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}
