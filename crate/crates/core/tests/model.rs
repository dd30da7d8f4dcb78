use shvc::ans::{encode_image_shvc, AuxSource};
use shvc::model::{
    expected_layout, GoldenVectors, Mode, ModelConfig, ModelWeights, ShvcModel, WEIGHT_MAGIC, WEIGHT_VERSION,
};
use shvc::tensor::{subpixel_unshuffle_g, Tensor};
use shvc::Error;

fn tiny(layers: usize, mode: Mode, seed: u64) -> ModelConfig {
    let mut c = ModelConfig::lite(layers, mode).with_seed(seed);
    c.widths = vec![4; layers + 1];
    c.mixtures = 2;
    c
}

#[test]
fn zero_input_forward_is_finite_for_many_seeds() {
    for seed in 0..1000 {
        let m = ShvcModel::seeded(&tiny(1, Mode::Shvc, seed)).unwrap();
        let x = Tensor::filled(3, 4, 4, 0.0f32);
        let q = m.posterior_params(1, &x).unwrap();
        let d = m.context_features(1, &q.means.map(|v| v as f32)).unwrap();
        let prefix = subpixel_unshuffle_g(&x, 2).unwrap();
        let p = m.prior_subblock_params(0, &d, &prefix, 3).unwrap();
        let finite = q.means.data().iter().chain(q.log_scales.data()).chain(p.raw().data()).all(|v| v.is_finite());
        assert!(finite, "seed {seed}");
    }
}

#[test]
fn seeds_change_weights() {
    let a = ModelWeights::init_seeded(&tiny(2, Mode::Arib, 1)).unwrap();
    let b = ModelWeights::init_seeded(&tiny(2, Mode::Arib, 2)).unwrap();
    assert_eq!(a.to_bytes(), ModelWeights::init_seeded(&tiny(2, Mode::Arib, 1)).unwrap().to_bytes());
    assert_ne!(a.records, b.records);
    assert_ne!(a.hash(), b.hash());
}

/// Serializes weights the way an external exporter would, straight from the
/// documented layout, without going through `ModelWeights::to_bytes`.
fn external_export(config: &ModelConfig, value: impl Fn(usize, usize) -> f32) -> Vec<u8> {
    let mut out = WEIGHT_MAGIC.to_vec();
    out.push(WEIGHT_VERSION);
    out.push(config.layers as u8);
    out.push(config.k as u8);
    out.extend((config.channels as u16).to_le_bytes());
    out.extend((config.split as u16).to_le_bytes());
    out.push(config.mode.to_u8());
    out.push(config.mixtures as u8);
    for &w in &config.widths {
        out.extend((w as u16).to_le_bytes());
    }
    for &c in &config.latent_channels {
        out.extend((c as u16).to_le_bytes());
    }
    out.extend(config.downsample.iter().map(|&d| d as u8));
    out.extend(config.seed.to_le_bytes());
    let layout = expected_layout(config);
    out.extend((layout.len() as u32).to_le_bytes());
    for (r, (name, shape)) in layout.iter().enumerate() {
        out.extend((name.len() as u16).to_le_bytes());
        out.extend(name.as_bytes());
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend((d as u32).to_le_bytes());
        }
        for i in 0..shape.iter().product() {
            out.extend(value(r, i).to_le_bytes());
        }
    }
    out
}

#[test]
fn externally_written_weights_load_and_round_trip() {
    let cfg = tiny(2, Mode::Arib, 0);
    let bytes = external_export(&cfg, |r, i| ((r * 31 + i * 7) % 97) as f32 / 970.0 - 0.05);
    let w = ModelWeights::from_bytes(&bytes).unwrap();
    assert_eq!(w.config, cfg);
    assert_eq!(w.to_bytes(), bytes);
    let model = ShvcModel::new(&w).unwrap();
    assert_eq!(model.weights_hash(), shvc::model::fnv1a64(&bytes));
}

#[test]
fn golden_file_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(2, Mode::Arib, 3);
    let w = ModelWeights::init_seeded(&cfg).unwrap();
    std::fs::write(dir.path().join("w.shvw"), w.to_bytes()).unwrap();
    let model = ShvcModel::new(&w).unwrap();
    let x = Tensor::from_fn(3, 8, 8, |c, y, x| ((c + 2 * y + 3 * x) % 9) as f32 / 4.5 - 1.0);
    std::fs::write(dir.path().join("g.shvg"), GoldenVectors::generate(&model, &x).unwrap().to_bytes()).unwrap();

    let loaded = ModelWeights::from_bytes(&std::fs::read(dir.path().join("w.shvw")).unwrap()).unwrap();
    let golden = GoldenVectors::from_bytes(&std::fs::read(dir.path().join("g.shvg")).unwrap()).unwrap();
    let report = golden.verify(&ShvcModel::new(&loaded).unwrap()).unwrap();
    assert!(report.passed());
    assert!(report.max_relative_error <= 1e-4);
}

#[test]
fn weight_file_errors() {
    let bytes = ModelWeights::init_seeded(&tiny(1, Mode::Shvc, 0)).unwrap().to_bytes();
    assert!(matches!(ModelWeights::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::WeightFormat(_))));
    let mut b = bytes.clone();
    b[4] = 9;
    assert!(matches!(ModelWeights::from_bytes(&b), Err(Error::BadVersion(9))));
    let mut b = bytes;
    b[..4].copy_from_slice(b"NOPE");
    assert!(matches!(ModelWeights::from_bytes(&b), Err(Error::BadMagic)));
}

#[test]
fn prior_evaluations_do_not_depend_on_size() {
    let m = ShvcModel::seeded(&tiny(2, Mode::Shvc, 0)).unwrap();
    let mut counts = Vec::new();
    for size in [8, 16, 24] {
        let before = m.prior_evaluations();
        let x = Tensor::from_fn(3, size, size, |c, y, x| (c * 11 + y * 5 + x) as u8);
        encode_image_shvc(&x, &m, AuxSource::prng(0)).unwrap();
        counts.push(m.prior_evaluations() - before);
    }
    // k^2 per variable, minus the unconditional top slice
    assert_eq!(counts, vec![3 * 4 - 1; 3]);
}
