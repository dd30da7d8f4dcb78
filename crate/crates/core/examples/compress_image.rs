//! Code one image with the bits-back schedule and with ArIB, and show where
//! the bits go step by step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shvc::ans::{codelength_oracle, decode_image_arib, decode_image_shvc, encode_image_arib, encode_image_shvc, AuxSource, Encoded};
use shvc::model::{Mode, ModelConfig, ShvcModel};
use shvc::tensor::Tensor;

fn show(name: &str, enc: &Encoded, dims: usize) {
    let r = &enc.report;
    println!("{name}: {} words, net {} bits ({:.3} bpd)", enc.words.len(), r.net_bits, r.net_bits as f64 / dims as f64);
    println!("  aux consumed {} returned {}", r.aux_bits_consumed, r.aux_bits_returned);
    for s in &enc.steps {
        println!("  {:<28} {:9.1} bits over {} symbols", s.step.to_string(), s.bits, s.symbols);
    }
}

fn main() -> shvc::Result<()> {
    let model = ShvcModel::seeded(&ModelConfig::lite(2, Mode::Arib))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // a smooth gradient with a little noise
    let x = Tensor::from_fn(3, 32, 32, |c, y, x| ((4 * (x + y) + 40 * c) as u8).wrapping_add(rng.gen_range(0..8)));
    let dims = x.data().len();

    let shvc = encode_image_shvc(&x, &model, AuxSource::prng(7))?;
    show("shvc", &shvc, dims);
    let oracle = codelength_oracle(&model, &x, &shvc.latents)?;
    println!("  codelength of the coded latents {oracle:.1} bits");
    assert_eq!(decode_image_shvc(&shvc.words, &model, 32, 32)?.image, x);

    let arib = encode_image_arib(&x, &model, 7)?;
    show("arib", &arib, dims);
    assert_eq!(decode_image_arib(&arib.words, &model, 32, 32)?.image, x);
    println!("both decodes are exact");
    Ok(())
}
