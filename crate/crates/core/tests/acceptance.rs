//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.
//!
//! Everything runs on seeded (untrained) weights. Run with
//! `cargo test -p shvc --test acceptance -- --nocapture` to see the report.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shvc::ans::{
    codelength_oracle, decode_image_arib, decode_image_shvc, encode_dataset_chained, encode_image_arib,
    encode_image_shvc, Action, AuxSource, ChainedDecoder, Encoded, Factor,
};
use shvc::dist::{quantize_to_cdf, DEFAULT_PRECISION};
use shvc::image::{crop, pad_replicate};
use shvc::model::{ContextD, Mode, ModelConfig, ShvcModel};
use shvc::tensor::{f_g_permutation, pixel_unshuffle_f, subpixel_shuffle_g_inv, subpixel_unshuffle_g, Tensor};
use shvc::Error;

struct Report {
    lines: Vec<(bool, String, String)>,
}

impl Report {
    fn record(&mut self, name: &str, passed: bool, detail: String) {
        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.lines.push((passed, name.to_owned(), detail));
    }
}

fn random_image(rng: &mut ChaCha8Rng) -> Tensor<u8> {
    let h = rng.gen_range(8..=32);
    let w = rng.gen_range(8..=32);
    Tensor::from_fn(3, h, w, |_, _, _| rng.gen())
}

fn model(layers: usize, mode: Mode) -> ShvcModel {
    ShvcModel::seeded(&ModelConfig::lite(layers, mode).with_seed(2024)).unwrap()
}

/// One coded image from the lossless run, kept for the accounting checks.
struct Coded {
    mode: Mode,
    layers: usize,
    padded: Tensor<u8>,
    enc: Encoded,
    aux_seed: u64,
    returned: Vec<u32>,
}

fn losslessness(report: &mut Report, models: &[(Mode, usize, ShvcModel)]) -> Vec<Coded> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut coded = Vec::new();
    let mut failures = 0;
    let start = Instant::now();
    for n in 0..200 {
        let (mode, layers, m) = &models[n % models.len()];
        let x = random_image(&mut rng);
        let padded = pad_replicate(&x, m.config().required_multiple());
        let aux_seed = rng.gen();
        let (enc, dec) = match mode {
            Mode::Shvc => {
                let enc = encode_image_shvc(&padded, m, AuxSource::prng(aux_seed)).unwrap();
                let dec = decode_image_shvc(&enc.words, m, padded.height(), padded.width()).unwrap();
                (enc, dec)
            }
            Mode::Arib => {
                let enc = encode_image_arib(&padded, m, aux_seed).unwrap();
                let dec = decode_image_arib(&enc.words, m, padded.height(), padded.width()).unwrap();
                (enc, dec)
            }
        };
        if crop(&dec.image, x.height(), x.width()).unwrap() != x {
            failures += 1;
        }
        coded.push(Coded { mode: *mode, layers: *layers, padded, enc, aux_seed, returned: dec.returned_aux_words });
    }
    // chained mode: one short dataset per depth on a shared stack
    let mut chained = 0;
    for (_, _, m) in models.iter().filter(|(mode, _, _)| *mode == Mode::Shvc) {
        let images: Vec<_> = (0..8).map(|_| random_image(&mut rng)).collect();
        let padded: Vec<_> = images.iter().map(|x| pad_replicate(x, m.config().required_multiple())).collect();
        let enc = encode_dataset_chained(&padded, m, rng.gen()).unwrap();
        let (back, _) = ChainedDecoder::new(m, &enc.words, enc.dims.clone()).unwrap().decode_all().unwrap();
        for (x, b) in images.iter().zip(&back) {
            failures += usize::from(crop(b, x.height(), x.width()).unwrap() != *x);
        }
        chained += images.len();
    }
    let secs = start.elapsed().as_secs_f64();
    report.record(
        "losslessness",
        failures == 0 && secs <= 60.0,
        format!(
            "{} images across SHVC/ArIB x L=1,2,3 plus {chained} chained, {failures} mismatches, {secs:.1} s",
            coded.len()
        ),
    );
    coded
}

fn codelength_identity(report: &mut Report, models: &[(Mode, usize, ShvcModel)], coded: &[Coded]) {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut bad = 0;
    for c in coded {
        let m = &models.iter().find(|(mode, l, _)| *mode == c.mode && *l == c.layers).unwrap().2;
        let oracle = codelength_oracle(m, &c.padded, &c.enc.latents).unwrap();
        let tol = 32.0 + 0.001 * c.enc.symbol_count() as f64;
        let gap = (c.enc.report.net_bits as f64 - oracle).abs();
        worst_excess = worst_excess.max(gap - tol);
        bad += usize::from(gap > tol);
    }
    report.record(
        "codelength identity",
        bad == 0,
        format!("{} images, {bad} outside 32 + 0.001 N bits, worst margin {:.2} bits", coded.len(), -worst_excess),
    );
}

fn bits_back(report: &mut Report, coded: &[Coded]) {
    let shvc: Vec<_> = coded.iter().filter(|c| c.mode == Mode::Shvc).collect();
    let exact = shvc
        .iter()
        .filter(|c| {
            let n = c.returned.len();
            32 * n as u64 == c.enc.report.aux_bits_consumed && c.returned == AuxSource::prng(c.aux_seed).preview(n)
        })
        .count();
    let bits: u64 = shvc.iter().map(|c| c.enc.report.aux_bits_consumed).sum();
    report.record(
        "bits-back recovery",
        exact == shvc.len(),
        format!("{exact}/{} SHVC images returned all {bits} aux bits verbatim", shvc.len()),
    );
}

fn arib_overhead(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut within = 0;
    let mut criterion2 = 0;
    let mut shvc_ok = 0;
    let mut ratios = Vec::new();
    let n = 40;
    let arib = model(2, Mode::Arib);
    for _ in 0..n {
        let x = pad_replicate(&random_image(&mut rng), arib.config().required_multiple());
        let seed = rng.gen();
        let a = encode_image_arib(&x, &arib, seed).unwrap();
        let s = encode_image_shvc(&x, &arib, AuxSource::prng(seed)).unwrap();
        let tail_bits = a
            .steps
            .iter()
            .find(|c| c.step.action == Action::Push && matches!(&c.step.factor, Factor::Prior { level: 0, .. }))
            .unwrap()
            .bits;
        criterion2 += usize::from(tail_bits >= a.first_pop_bits());
        within += usize::from(a.report.aux_bits_consumed <= 64);
        shvc_ok += usize::from(s.report.aux_bits_consumed as f64 >= s.first_pop_bits());
        ratios.push(s.report.aux_bits_consumed as f64 / a.report.aux_bits_consumed as f64);
    }
    let ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    report.record(
        "ArIB overhead",
        within * 100 >= 95 * n && shvc_ok == n,
        format!(
            "{within}/{n} images with ArIB aux <= 64 bits ({criterion2}/{n} satisfy the funding criterion); \
             SHVC aux >= first-pop q bits on {shvc_ok}/{n}; mean SHVC/ArIB aux ratio {ratio:.1}x"
        ),
    );
}

fn operator_suite(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=4);
        let c = rng.gen_range(1..=4);
        let (h, w) = (k * rng.gen_range(1..=5), k * rng.gen_range(1..=5));
        let t = Tensor::from_fn(c, h, w, |_, _, _| rng.gen::<i32>());
        let g = subpixel_unshuffle_g(&t, k).unwrap();
        let f = pixel_unshuffle_f(&t, k).unwrap();
        let inverse_ok = subpixel_shuffle_g_inv(&g, k, c).unwrap() == t;
        let perm_ok = f_g_permutation(c, k).iter().enumerate().all(|(n, &p)| g.channel(n) == f.channel(p));
        bad += usize::from(!(inverse_ok && perm_ok));
    }
    // with k = H = W every sub-block is a single pixel, visited in raster order
    let mut raster_ok = true;
    for k in 1..=5 {
        for c in 1..=3 {
            let t = Tensor::from_fn(c, k, k, |ch, y, x| (ch * 1000 + y * k + x) as u32);
            let g = subpixel_unshuffle_g(&t, k).unwrap();
            for i in 0..k * k {
                for ch in 0..c {
                    raster_ok &= g.get(i * c + ch, 0, 0) == t.get(ch, i / k, i % k);
                }
            }
        }
    }
    report.record(
        "operator suite",
        bad == 0 && raster_ok,
        format!("1000 random tensors, {bad} failures; raster-order equivalence {}", if raster_ok { "holds" } else { "broken" }),
    );
}

fn cdf_suite(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=512);
        let skew = rng.gen_range(1..=8);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(skew)).collect();
        let sum: f64 = raw.iter().sum();
        let pmf: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let t = quantize_to_cdf(&pmf, DEFAULT_PRECISION).unwrap();
        let total: u64 = t.freqs().iter().map(|&f| u64::from(f)).sum();
        let min = *t.freqs().iter().min().unwrap();
        let bound = n as f64 * 2f64.powi(1 - DEFAULT_PRECISION as i32);
        let kl = t.kl_bits(&pmf);
        worst_ratio = worst_ratio.max(kl / bound);
        bad += usize::from(total != 1 << DEFAULT_PRECISION || min < 1 || kl > bound);
    }
    report.record(
        "CdfTable suite",
        bad == 0,
        format!("10000 pmfs at P=16, {bad} violations, worst KL at {:.1}% of bound", 100.0 * worst_ratio),
    );
}

fn arib_independence(report: &mut Report) {
    let m = model(1, Mode::Arib);
    let cfg = m.config().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut q_invariant = true;
    let mut p_invariant = true;
    let mut rejects_latent = true;
    for _ in 0..20 {
        let x = pad_replicate(&random_image(&mut rng), cfg.required_multiple());
        let xf = x.map(|v| f32::from(v) / 127.5 - 1.0);
        let q = m.posterior_params(1, &xf).unwrap();
        let mut g = subpixel_unshuffle_g(&xf, cfg.k).unwrap();
        let plane = g.plane_len();
        for v in &mut g.data_mut()[cfg.split * cfg.channels * plane..] {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let perturbed = subpixel_shuffle_g_inv(&g, cfg.k, cfg.channels).unwrap();
        q_invariant &= m.posterior_params(1, &perturbed).unwrap() == q;

        // two different latents (different aux seeds) must cost the tail the same
        let a = encode_image_arib(&x, &m, rng.gen()).unwrap();
        let b = encode_image_arib(&x, &m, rng.gen()).unwrap();
        if a.latents != b.latents {
            let tail = |e: &Encoded| e.steps.iter().find(|c| c.step.action == Action::Push).unwrap().bits;
            p_invariant &= tail(&a) == tail(&b);
        }

        let prefix = subpixel_unshuffle_g(&xf, cfg.k).unwrap();
        let z = Tensor::from_fn(3, x.height() / 2, x.width() / 2, |_, _, _| rng.gen_range(-2.0..2.0f32));
        let d = m.context_features(1, &z).unwrap();
        for i in cfg.split..cfg.num_subblocks() {
            rejects_latent &= matches!(
                m.prior_subblock_params(0, &d, &prefix, i),
                Err(Error::CausalityViolation { .. })
            );
        }
        let _ = ContextD::without_latent(0);
    }
    report.record(
        "ArIB structural independence",
        q_invariant && p_invariant && rejects_latent,
        format!(
            "q invariant to sub-blocks >= split: {q_invariant}; tail p invariant to z: {p_invariant}; \
             tail heads reject latent context: {rejects_latent}"
        ),
    );
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    let models: Vec<(Mode, usize, ShvcModel)> = [Mode::Shvc, Mode::Arib]
        .into_iter()
        .flat_map(|mode| (1..=3).map(move |l| (mode, l)))
        .map(|(mode, l)| (mode, l, model(l, mode)))
        .collect();
    let coded = losslessness(&mut report, &models);
    codelength_identity(&mut report, &models, &coded);
    bits_back(&mut report, &coded);
    arib_overhead(&mut report);
    operator_suite(&mut report);
    cdf_suite(&mut report);
    arib_independence(&mut report);
    let failed: Vec<_> = report.lines.iter().filter(|(ok, _, _)| !ok).map(|(_, n, _)| n.clone()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
