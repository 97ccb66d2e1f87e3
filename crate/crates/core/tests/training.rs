mod common;

use encircle_core::policy::{tau_grid, Policy, PolicyConfig, Variant};
use encircle_core::training::*;
use encircle_kernel::ParamGrads;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny(variant: Variant) -> PolicyConfig {
    PolicyConfig {
        variant,
        latent_dim: 8,
        heads: 2,
        relation_layers: 1,
        quantile_embedding: 8,
        online_quantiles: 4,
        target_quantiles: 4,
        ..PolicyConfig::default()
    }
}

fn transition(seed: u64, reward: f64, done: bool) -> Transition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Transition {
        observation: common::random_observation(&mut rng),
        action: (seed % 9) as usize,
        reward,
        next_observation: common::random_observation(&mut rng),
        done,
        pursuer_id: 0,
        episode_id: 0,
        step: seed,
    }
}

fn small_run(steps: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        total_steps: steps,
        batch_size: 4,
        train_every: 8,
        learning_starts: 200,
        replay_capacity: 2000,
        target_sync: 20,
        episode_cap: 300,
        seed,
        curriculum: Some(Curriculum::fixed(3, 1, 0, 2)),
        policy: tiny(Variant::Terl),
        ..TrainConfig::default()
    }
}

#[test]
fn td_target_examples() {
    let target = Policy::new(&tiny(Variant::Terl), 3).unwrap();
    let taus = [0.2, 0.7, 0.9];
    assert_eq!(td_targets(&target, &transition(1, 2.5, true), 0.99, &taus), vec![2.5; 3]);
    assert_eq!(td_targets(&target, &transition(1, 2.5, false), 0.0, &taus), vec![2.5; 3]);

    let t = transition(2, -1.0, false);
    let z = target.quantiles(&t.next_observation, &taus);
    let q = target.q_values(&t.next_observation, &taus);
    let best = (0..9).fold(0, |b, a| if q[a] > q[b] { a } else { b });
    let y = td_targets(&target, &t, 1.0, &taus);
    for (j, yj) in y.iter().enumerate() {
        assert_eq!(*yj, -1.0 + z.get(j, best));
    }

    let dqn = Policy::new(&tiny(Variant::DqnAvgpool), 3).unwrap();
    assert_eq!(td_targets(&dqn, &t, 0.5, &taus).len(), 1);
}

#[test]
fn batch_loss_is_mean_of_transition_losses() {
    for variant in [Variant::Terl, Variant::DqnAvgpool] {
        let online = Policy::new(&tiny(variant), 5).unwrap();
        let target = Policy::new(&tiny(variant), 6).unwrap();
        let ts: Vec<Transition> = (0..4).map(|i| transition(10 + i, i as f64 - 1.5, i == 3)).collect();
        let batch: Vec<&Transition> = ts.iter().collect();

        let mut grads = ParamGrads::zeros_like(&online.store);
        let total = batch_loss(&online, &target, &batch, 0.9, &mut ChaCha8Rng::seed_from_u64(0), &mut grads);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sum = 0.0;
        let mut summed = ParamGrads::zeros_like(&online.store);
        for t in &batch {
            let taus = online.sample_taus(online.config().online_quantiles, &mut rng);
            let target_taus = online.sample_taus(online.config().target_quantiles, &mut rng);
            let y = td_targets(&target, t, 0.9, &target_taus);
            sum += transition_loss(&online, t, y, &taus, 0.25, &mut summed);
        }
        assert!((total - sum / 4.0).abs() < 1e-12);
        for id in online.store.ids() {
            let (a, b) = (grads.get(id), summed.get(id));
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

fn filled_buffer(n: u64) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(64);
    for i in 0..n {
        b.push(transition(i, (i % 3) as f64, i % 5 == 0));
    }
    b
}

#[test]
fn train_step_is_deterministic_and_syncs() {
    let cfg = TrainConfig {
        batch_size: 4,
        target_sync: 3,
        policy: tiny(Variant::Terl),
        ..TrainConfig::default()
    };
    let buffer = filled_buffer(16);
    let run = || {
        let mut l = Learner::new(Policy::new(&cfg.policy, 1).unwrap(), &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let losses: Vec<f64> = (0..3).map(|_| l.train_step(&buffer, &mut rng).unwrap()).collect();
        (l, losses)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(la, lb);
    assert!(a.online.store.values_equal(&b.online.store));
    assert_eq!(a.updates, 3);
    assert!(a.target.store.values_equal(&a.online.store));

    let mut short = Learner::new(Policy::new(&cfg.policy, 1).unwrap(), &cfg);
    assert!(short.train_step(&filled_buffer(3), &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    assert_eq!(short.updates, 0);
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let cfg = TrainConfig {
        lr: 0.0,
        batch_size: 4,
        policy: tiny(Variant::Terl),
        ..TrainConfig::default()
    };
    let start = Policy::new(&cfg.policy, 9).unwrap();
    let mut l = Learner::new(start.clone(), &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..3 {
        l.train_step(&filled_buffer(16), &mut rng).unwrap();
    }
    assert!(l.online.store.values_equal(&start.store));
}

#[test]
fn loss_falls_when_fitting_fixed_returns() {
    for variant in [Variant::Terl, Variant::MeanEmbedding, Variant::DqnAvgpool] {
        let cfg = TrainConfig {
            lr: 3e-3,
            batch_size: 8,
            policy: tiny(variant),
            ..TrainConfig::default()
        };
        let mut buffer = ReplayBuffer::new(8);
        for i in 0..8 {
            buffer.push(transition(i, 3.0, true));
        }
        let mut l = Learner::new(Policy::new(&cfg.policy, 2).unwrap(), &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = l.train_step(&buffer, &mut rng).unwrap();
        let mut last = first;
        for _ in 0..150 {
            last = l.train_step(&buffer, &mut rng).unwrap();
        }
        assert!(last < 0.2 * first, "{variant}: {first} -> {last}");
        let q = l.online.q_values(&buffer_obs(&buffer), &tau_grid(32));
        assert!(q.iter().any(|v| (v - 3.0).abs() < 0.5), "{variant}: {q:?}");
    }
}

fn buffer_obs(b: &ReplayBuffer) -> encircle_core::perception::ObservationBundle {
    b.sample(1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()[0].observation.clone()
}

#[test]
fn training_runs_are_reproducible() {
    let a = run_training(&small_run(3000, 7), None).unwrap();
    let b = run_training(&small_run(3000, 7), None).unwrap();
    assert!(!a.log.is_empty());
    assert!(a.updates > 0);
    assert_eq!(a.log, b.log);
    assert!(a.policy.store.values_equal(&b.policy.store));
    let c = run_training(&small_run(3000, 8), None).unwrap();
    assert!(!a.policy.store.values_equal(&c.policy.store));

    let mut bytes = Vec::new();
    write_log(&a.log, &mut bytes).unwrap();
    assert_eq!(read_log(bytes.as_slice()).unwrap(), a.log);
}

#[test]
fn checkpoints_are_written_and_identical() {
    let dir = tempfile::tempdir().unwrap();
    let zero = run_training(&small_run(0, 1), Some(dir.path())).unwrap();
    assert_eq!(zero.checkpoints, vec![dir.path().join("step_0.ckpt")]);
    assert!(zero.log.is_empty());

    let cfg = TrainConfig {
        checkpoint_every: 250,
        ..small_run(600, 1)
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_training(&cfg, Some(d1.path())).unwrap();
    run_training(&cfg, Some(d2.path())).unwrap();
    let names: Vec<String> = r1
        .checkpoints
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["step_0.ckpt", "step_250.ckpt", "step_500.ckpt", "step_600.ckpt"]);
    for n in &names {
        assert_eq!(std::fs::read(d1.path().join(n)).unwrap(), std::fs::read(d2.path().join(n)).unwrap());
    }
    let restored = Policy::load(&d1.path().join("step_600.ckpt"), Some(Variant::Terl)).unwrap();
    assert!(restored.store.values_equal(&r1.policy.store));
}

#[test]
fn compressed_schedule_boundaries() {
    let c = Curriculum::standard().scaled(0.01);
    assert!(c.is_well_formed());
    assert_eq!(c.stage_at(0).counts(), (3, 1, 0, 4));
    assert_eq!(c.stage_at(19_999).counts(), (3, 1, 0, 4));
    assert_eq!(c.stage_at(20_000).counts(), (4, 1, 1, 6));
    assert_eq!(c.stage_at(60_000).counts(), (15, 4, 6, 8));
    assert_eq!(c.stage_at(10_000_000).counts(), (15, 4, 6, 8));
    let cfg = TrainConfig {
        compression: 0.01,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.curriculum(), c);
}

#[test]
fn config_rejects_bad_values() {
    for text in ["gamma = 1.5", "batch_size = 0", "reward_scale = 0.0", "unknown_key = 1", "compression = -1.0"] {
        assert!(TrainConfig::from_toml_str(text).is_err(), "{text}");
    }
    let cfg = TrainConfig::from_toml_str("total_steps = 10\nreward_scale = 0.5").unwrap();
    assert_eq!((cfg.total_steps, cfg.reward_scale), (10, 0.5));
}
