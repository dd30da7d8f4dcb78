//! Chained mode: a dataset shares one stack, so only the first image pays for
//! initial bits. Images come back last first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shvc::ans::{encode_dataset_chained, ChainedDecoder, ChainedEncoded};
use shvc::model::{Mode, ModelConfig, ShvcModel};
use shvc::tensor::Tensor;

fn main() -> shvc::Result<()> {
    let model = ShvcModel::seeded(&ModelConfig::lite(1, Mode::Shvc))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let images: Vec<Tensor<u8>> = (0..5)
        .map(|i| Tensor::from_fn(3, 16, 16, |c, y, x| (8 * y + 3 * x + 30 * c + 10 * i) as u8 ^ rng.gen_range(0..4)))
        .collect();

    let enc = encode_dataset_chained(&images, &model, 99)?;
    for (i, r) in enc.reports.iter().enumerate() {
        println!("image {i}: net {:6} bits, aux drawn {}", r.net_bits, r.aux_bits_consumed);
    }
    let sum: i64 = enc.reports.iter().map(|r| r.net_bits).sum();
    println!("sum of nets {sum} + flush {} = {}", ChainedEncoded::FLUSH_BITS, enc.report.net_bits);

    let mut dec = ChainedDecoder::new(&model, &enc.words, enc.dims.clone())?;
    if let Err(e) = dec.decode(0) {
        println!("out of order: {e}");
    }
    let (back, aux) = dec.decode_all()?;
    assert_eq!(back, images);
    println!("all {} images restored, {} aux words returned", back.len(), aux.len());
    Ok(())
}
