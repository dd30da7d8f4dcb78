//! Quick invariant checks over every module, for `shvc selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ans::{
    codelength_oracle, decode_image_arib, decode_image_shvc, encode_image_arib, encode_image_shvc, AnsCoder,
    AuxSource, CodingMode,
};
use crate::container::{compress_image, decompress_image, Container};
use crate::dist::{quantize_to_cdf, DEFAULT_PRECISION};
use crate::error::Result;
use crate::model::{GoldenVectors, Mode, ModelConfig, ShvcModel};
use crate::tensor::{f_g_permutation, pixel_unshuffle_f, subpixel_shuffle_g_inv, subpixel_unshuffle_g, Tensor};

#[derive(Clone, Copy, Debug, Default)]
pub struct SelftestOptions<'a> {
    /// Model to exercise instead of the seeded lite models.
    pub model: Option<&'a ShvcModel>,
    /// Break one quantized table before it is checked.
    pub inject_table_corruption: bool,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, r: Result<std::result::Result<String, String>>) -> CheckOutcome {
    match r {
        Ok(Ok(detail)) => CheckOutcome { name, passed: true, detail },
        Ok(Err(detail)) => CheckOutcome { name, passed: false, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
    }
}

type Check = std::result::Result<String, String>;

fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor<u8> {
    Tensor::from_fn(c, h, w, |_, _, _| rng.gen())
}

fn operators(rng: &mut ChaCha8Rng) -> Result<Check> {
    for _ in 0..50 {
        let k = rng.gen_range(1..=3);
        let c = rng.gen_range(1..=4);
        let (h, w) = (k * rng.gen_range(1..=4), k * rng.gen_range(1..=4));
        let t = Tensor::from_fn(c, h, w, |_, _, _| rng.gen::<u32>());
        let g = subpixel_unshuffle_g(&t, k)?;
        if subpixel_shuffle_g_inv(&g, k, c)? != t {
            return Ok(Err(format!("inverse failed for c={c} k={k} {h}x{w}")));
        }
        let f = pixel_unshuffle_f(&t, k)?;
        for (n, &p) in f_g_permutation(c, k).iter().enumerate() {
            if g.channel(n) != f.channel(p) {
                return Ok(Err(format!("permutation mismatch at channel {n}")));
            }
        }
    }
    Ok(Ok("50 tensors".into()))
}

fn tables(rng: &mut ChaCha8Rng, corrupt: bool) -> Result<Check> {
    for i in 0..500 {
        let n = rng.gen_range(2..=256);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3)).collect();
        let sum: f64 = raw.iter().sum();
        let pmf: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let mut t = quantize_to_cdf(&pmf, DEFAULT_PRECISION)?;
        if corrupt && i == 0 {
            t.corrupt(0, t.freq(0) + 1);
        }
        let total: u64 = t.freqs().iter().map(|&f| u64::from(f)).sum();
        if total != 1 << DEFAULT_PRECISION || t.freqs().iter().any(|&f| f == 0) {
            return Ok(Err(format!("table {i} sums to {total}")));
        }
        let bound = n as f64 * 2f64.powi(1 - DEFAULT_PRECISION as i32);
        let kl = t.kl_bits(&pmf);
        if kl > bound {
            return Ok(Err(format!("table {i}: KL {kl} above {bound}")));
        }
    }
    Ok(Ok("500 pmfs".into()))
}

fn coder(rng: &mut ChaCha8Rng) -> Result<Check> {
    let t = quantize_to_cdf(&[0.5, 0.25, 0.125, 0.0625, 0.0625], DEFAULT_PRECISION)?;
    let syms: Vec<usize> = (0..2000).map(|_| rng.gen_range(0..5)).collect();
    let mut c = AnsCoder::new(AuxSource::prng(rng.gen()))?;
    for &s in &syms {
        c.push(s, &t);
    }
    let mut d = AnsCoder::from_words(&c.to_words())?;
    for &s in syms.iter().rev() {
        if d.pop(&t)? != s {
            return Ok(Err("LIFO order broken".into()));
        }
    }
    Ok(Ok("2000 symbols".into()))
}

fn lite(layers: usize, mode: Mode, seed: u64) -> Result<ShvcModel> {
    ShvcModel::seeded(&ModelConfig::lite(layers, mode).with_seed(seed))
}

fn codec(models: &[&ShvcModel], rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut n = 0;
    for m in models {
        let cfg = m.config();
        let r = cfg.required_multiple();
        let x = random_image(rng, cfg.channels, r, 2 * r);
        let seed = rng.gen();
        let enc = encode_image_shvc(&x, m, AuxSource::prng(seed))?;
        let dec = decode_image_shvc(&enc.words, m, x.height(), x.width())?;
        if dec.image != x {
            return Ok(Err("SHVC round trip differs".into()));
        }
        let k = dec.returned_aux_words.len();
        if dec.returned_aux_words != AuxSource::prng(seed).preview(k) || 32 * k as u64 != enc.report.aux_bits_consumed {
            return Ok(Err("aux bits not returned".into()));
        }
        let oracle = codelength_oracle(m, &x, &enc.latents)?;
        let gap = (enc.report.net_bits as f64 - oracle).abs();
        if gap > 32.0 + 0.001 * enc.symbol_count() as f64 {
            return Ok(Err(format!("net bits {} vs codelength {oracle:.1}", enc.report.net_bits)));
        }
        if cfg.mode == Mode::Arib {
            let enc = encode_image_arib(&x, m, seed)?;
            if decode_image_arib(&enc.words, m, x.height(), x.width())?.image != x {
                return Ok(Err("ArIB round trip differs".into()));
            }
        }
        n += 1;
    }
    Ok(Ok(format!("{n} models")))
}

fn arib_independence(m: &ShvcModel, rng: &mut ChaCha8Rng) -> Result<Check> {
    let cfg = m.config();
    if cfg.mode != Mode::Arib {
        return Ok(Ok("skipped for SHVC model".into()));
    }
    let r = cfg.required_multiple();
    let x = random_image(rng, cfg.channels, r, r).map(|v| f32::from(v) / 127.5 - 1.0);
    let q = m.posterior_params(1, &x)?;
    let mut g = subpixel_unshuffle_g(&x, cfg.k)?;
    let n = g.plane_len();
    for v in &mut g.data_mut()[cfg.split * cfg.channels * n..] {
        *v = -*v;
    }
    let y = subpixel_shuffle_g_inv(&g, cfg.k, cfg.channels)?;
    if m.posterior_params(1, &y)? != q {
        return Ok(Err("posterior reads sub-blocks past the split".into()));
    }
    let prefix = subpixel_unshuffle_g(&x, cfg.k)?;
    for i in cfg.split..cfg.num_subblocks() {
        let z = Tensor::filled(cfg.level_channels(1), r / cfg.downsample[0], r / cfg.downsample[0], 0.5f32);
        let d = m.context_features(1, &z)?;
        if m.prior_subblock_params(0, &d, &prefix, i).is_ok() {
            return Ok(Err(format!("sub-block {i} accepted latent context")));
        }
    }
    Ok(Ok("posterior and tail heads ignore the forbidden inputs".into()))
}

fn golden(m: &ShvcModel, rng: &mut ChaCha8Rng) -> Result<Check> {
    let cfg = m.config();
    let r = cfg.required_multiple();
    let x = random_image(rng, cfg.channels, r, r).map(|v| f32::from(v) / 127.5 - 1.0);
    let g = GoldenVectors::from_bytes(&GoldenVectors::generate(m, &x)?.to_bytes())?;
    let report = g.verify(m)?;
    if report.passed() {
        Ok(Ok(format!("{} outputs, {} tables", report.outputs_checked, report.tables_checked)))
    } else {
        Ok(Err(format!("mismatch in {:?}", report.failures)))
    }
}

fn container(m: &ShvcModel, rng: &mut ChaCha8Rng) -> Result<Check> {
    let x = random_image(rng, m.config().channels, 5, 7);
    let (c, _) = compress_image(&x, m, CodingMode::Shvc, rng.gen())?;
    let mut bytes = c.to_bytes();
    if decompress_image(&Container::from_bytes(&bytes)?, m)? != x {
        return Ok(Err("container round trip differs".into()));
    }
    let last = bytes.len() - 5;
    bytes[last] ^= 0x40;
    if Container::from_bytes(&bytes).is_ok() {
        return Ok(Err("payload corruption went unnoticed".into()));
    }
    Ok(Ok("round trip and CRC".into()))
}

/// Run every check; the suite passes when every outcome passed.
pub fn run(opts: &SelftestOptions<'_>) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let owned = match opts.model {
        Some(_) => Vec::new(),
        None => vec![lite(1, Mode::Shvc, opts.seed)?, lite(2, Mode::Arib, opts.seed)?],
    };
    let models: Vec<&ShvcModel> = match opts.model {
        Some(m) => vec![m],
        None => owned.iter().collect(),
    };
    let arib = models.iter().find(|m| m.config().mode == Mode::Arib).unwrap_or(&models[0]);
    Ok(vec![
        outcome("operators", operators(&mut rng)),
        outcome("cdf-tables", tables(&mut rng, opts.inject_table_corruption)),
        outcome("ans-coder", coder(&mut rng)),
        outcome("codec", codec(&models, &mut rng)),
        outcome("arib-independence", arib_independence(arib, &mut rng)),
        outcome("golden-vectors", golden(models[0], &mut rng)),
        outcome("container", container(models[0], &mut rng)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_and_detects_corruption() {
        let ok = run(&SelftestOptions::default()).unwrap();
        assert!(ok.iter().all(|c| c.passed), "{ok:?}");
        let bad = run(&SelftestOptions { inject_table_corruption: true, ..Default::default() }).unwrap();
        assert!(!bad.iter().find(|c| c.name == "cdf-tables").unwrap().passed);
    }
}
