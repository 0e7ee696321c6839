use std::path::Path;

use proptest::prelude::*;
use tvgan::data::{synth_palm_lines, Dataset, SynthClassParams};
use tvgan::nn::Module;
use tvgan::trainer::{
    load_checkpoint, run_epochs, sample, save_checkpoint, train, Checkpoint, LossTrace, TrainConfig, CHECKPOINT_VERSION,
    DIVERGENCE_PATIENCE, TRACE_CSV_HEADER,
};
use tvgan::Error;

fn tiny(epochs: u64, count: usize, batch: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: batch,
        workers: 0,
        latent_dim: 8,
        image_size: 32,
        base_width: 4,
        synthetic_count: count,
        checkpoint_every: 1,
        ..TrainConfig::default()
    }
}

fn dataset(config: &TrainConfig) -> Dataset {
    config.dataset_spec().load().unwrap()
}

fn param_snapshot<M: Module<f32>>(m: &M) -> Vec<Vec<f32>> {
    m.params().into_iter().map(|(_, p)| p.value.iter().copied().collect()).collect()
}

#[test]
fn one_epoch_of_80_with_batch_40_gives_two_records() {
    let c = tiny(1, 80, 40);
    let (state, trace) = train(&c, &dataset(&c)).unwrap();
    assert_eq!(trace.len(), 2);
    assert_eq!(state.iteration, 2);
    assert_eq!(state.epoch, 1);
    let its: Vec<u64> = trace.records().iter().map(|r| r.iteration).collect();
    assert_eq!(its, vec![0, 1]);
    assert!(trace.all_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn trace_count_formula(epochs in 1u64..3, count in 8usize..30, batch in 2usize..8) {
        let c = tiny(epochs, count, batch);
        let (_, trace) = train(&c, &dataset(&c)).unwrap();
        prop_assert_eq!(trace.len() as u64, epochs * (count / batch) as u64);
        let records = trace.records();
        prop_assert!(records.windows(2).all(|w| w[0].iteration < w[1].iteration));
        prop_assert!(records.iter().all(|r| r.epoch >= 1 && r.epoch <= epochs));
    }
}

#[test]
fn losses_decompose() {
    let mut c = tiny(1, 40, 8);
    c.lambda_tv = 0.5;
    let (_, trace) = train(&c, &dataset(&c)).unwrap();
    for r in trace.records() {
        let l = r.losses;
        assert_eq!(l.g_total, l.g_adv + 0.5 * l.g_tv);
        assert!(l.g_tv >= 0.0 && l.d_loss >= 0.0);
    }
}

#[test]
fn lambda_enters_only_the_generator_step() {
    let c0 = tiny(1, 40, 8);
    let c1 = TrainConfig { lambda_tv: 0.05, ..c0.clone() };
    let ds = dataset(&c0);
    let real = ds.gather(&ds.epoch_order(0)[..8]);
    let mut a = Checkpoint::new(&c0).unwrap();
    let mut b = Checkpoint::new(&c1).unwrap();

    let la = a.discriminator_step(real.view()).unwrap();
    let lb = b.discriminator_step(real.view()).unwrap();
    assert_eq!(la, lb);
    assert_eq!(a.discriminator, b.discriminator);
    assert_eq!(a.generator, b.generator);

    a.generator_step(8).unwrap();
    b.generator_step(8).unwrap();
    assert_eq!(a.discriminator, b.discriminator);
    assert_ne!(param_snapshot(&a.generator), param_snapshot(&b.generator));
}

#[test]
fn steps_alternate() {
    let c = tiny(1, 40, 8);
    let ds = dataset(&c);
    let mut s = Checkpoint::new(&c).unwrap();
    for it in 0..3 {
        let real = ds.gather(&ds.epoch_order(0)[it * 8..(it + 1) * 8]);
        let (g0, d0) = (param_snapshot(&s.generator), param_snapshot(&s.discriminator));
        s.discriminator_step(real.view()).unwrap();
        let (g1, d1) = (param_snapshot(&s.generator), param_snapshot(&s.discriminator));
        assert_eq!(g0, g1, "generator moved during a discriminator step");
        assert_ne!(d0, d1);
        s.generator_step(8).unwrap();
        let (g2, d2) = (param_snapshot(&s.generator), param_snapshot(&s.discriminator));
        assert_eq!(d1, d2, "discriminator moved during a generator step");
        assert_ne!(g1, g2);
        s.iteration += 1;
    }
}

#[test]
fn training_is_deterministic() {
    let c = tiny(2, 24, 6);
    let ds = dataset(&c);
    let (s1, t1) = train(&c, &ds).unwrap();
    let (s2, t2) = train(&c, &ds).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(s1.to_bytes(), s2.to_bytes());
    let other = TrainConfig { seed: 1, ..c.clone() };
    let (_, t3) = train(&other, &other.dataset_spec().load().unwrap()).unwrap();
    assert_ne!(t1, t3);
}

#[test]
fn resume_is_bit_exact() {
    let c2 = tiny(2, 24, 6);
    let c1 = TrainConfig { epochs: 1, ..c2.clone() };
    let ds = dataset(&c2);
    let (full, full_trace) = train(&c2, &ds).unwrap();

    let (half, first) = train(&c1, &ds).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.tvgn");
    save_checkpoint(&half, &path).unwrap();
    let mut resumed = load_checkpoint(&path, &c2, false).unwrap();
    assert_eq!(resumed.epoch, 1);
    let second = run_epochs(&mut resumed, &ds, |_, _| Ok(())).unwrap();

    let mut joined = first.clone();
    joined.extend(&second).unwrap();
    assert_eq!(joined, full_trace);
    assert_eq!(resumed.to_bytes(), full.to_bytes());
}

#[test]
fn save_load_save_is_byte_identical() {
    let c = tiny(1, 16, 4);
    let (state, _) = train(&c, &dataset(&c)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.tvgn"), dir.path().join("b.tvgn"));
    state.save(&a).unwrap();
    Checkpoint::load(&a).unwrap().save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(std::fs::read(&a).unwrap().starts_with(b"TVGN"));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 2);
}

fn corrupt_and_load(bytes: &[u8]) -> Result<Checkpoint, Error> {
    Checkpoint::from_bytes(bytes, Path::new("test.tvgn"))
}

#[test]
fn flipped_version_byte_is_a_version_error() {
    let c = tiny(1, 16, 4);
    let bytes = Checkpoint::new(&c).unwrap().to_bytes();
    let mut bad = bytes.clone();
    bad[4] ^= 0x01;
    match corrupt_and_load(&bad) {
        Err(Error::CheckpointVersion { found, expected }) => {
            assert_eq!(expected, CHECKPOINT_VERSION);
            assert_ne!(found, expected);
        }
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let c = tiny(1, 16, 4);
    let bytes = Checkpoint::new(&c).unwrap().to_bytes();
    assert!(matches!(corrupt_and_load(&bytes[..bytes.len() - 3]), Err(Error::Corrupt { .. })));
    assert!(matches!(corrupt_and_load(b"NOPE"), Err(Error::Corrupt { .. })));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(corrupt_and_load(&trailing), Err(Error::Corrupt { .. })));
    let mut fp = bytes.clone();
    fp[10] ^= 0xff;
    assert!(matches!(corrupt_and_load(&fp), Err(Error::Corrupt { .. })));
    assert!(corrupt_and_load(&bytes).is_ok());
}

#[test]
fn fingerprint_mismatch_needs_override() {
    let c = tiny(1, 16, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.tvgn");
    Checkpoint::new(&c).unwrap().save(&path).unwrap();
    let other = TrainConfig { learning_rate: 1e-3, ..c.clone() };
    assert!(matches!(load_checkpoint(&path, &other, false), Err(Error::FingerprintMismatch)));
    let loaded = load_checkpoint(&path, &other, true).unwrap();
    assert_eq!(loaded.config.learning_rate, 1e-3);
    assert_eq!(loaded.gen_opt.learning_rate, 1e-3);
    let longer = TrainConfig { epochs: 50, workers: 3, ..c.clone() };
    assert!(load_checkpoint(&path, &longer, false).is_ok());
    let wider = TrainConfig { base_width: 8, ..c };
    assert!(load_checkpoint(&path, &wider, true).is_err());
}

#[test]
fn dataset_smaller_than_a_batch_is_a_data_error() {
    let c = tiny(1, 10, 16);
    assert!(matches!(train(&c, &dataset(&c)), Err(Error::Data(_))));
}

#[test]
fn dataset_of_wrong_size_is_rejected() {
    let c = tiny(1, 16, 4);
    let images = synth_palm_lines(16, 64, &SynthClassParams::default()).unwrap();
    assert!(matches!(train(&c, &Dataset::new(images, 0).unwrap()), Err(Error::Dimension(_))));
}

#[test]
fn persistent_non_finite_losses_diverge() {
    let c = tiny(1, 2 * (DIVERGENCE_PATIENCE + 10), 2);
    let ds = dataset(&c);
    let mut state = Checkpoint::new(&c).unwrap();
    for (_, p) in state.generator.params_mut() {
        p.value.fill(f32::NAN);
    }
    match run_epochs(&mut state, &ds, |_, _| Ok(())) {
        Err(Error::Divergence { iteration, consecutive, trace }) => {
            assert_eq!(consecutive, DIVERGENCE_PATIENCE);
            assert_eq!(iteration, DIVERGENCE_PATIENCE as u64 - 1);
            assert_eq!(trace.len(), DIVERGENCE_PATIENCE);
        }
        other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
    }
}

#[test]
fn sampling_contract() {
    let c = tiny(1, 16, 4);
    let (state, _) = train(&c, &dataset(&c)).unwrap();
    let a = sample(&state, 16, 7).unwrap();
    assert_eq!(a.dim(), (16, 1, 32, 32));
    assert_eq!(a, sample(&state, 16, 7).unwrap());
    assert_ne!(a, sample(&state, 16, 8).unwrap());
    let fresh = Checkpoint::new(&c).unwrap();
    assert!(fresh.sample(64, 0).unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn trace_csv_round_trip() {
    let c = tiny(1, 16, 4);
    let (_, trace) = train(&c, &dataset(&c)).unwrap();
    let csv = trace.to_csv();
    assert!(csv.starts_with(TRACE_CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + trace.len());
    assert_eq!(LossTrace::from_csv(&csv).unwrap(), trace);
}
