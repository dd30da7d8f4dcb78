use proptest::prelude::*;
use shvc::ans::{AnsCoder, AuxSource};
use shvc::dist::{mixture_pmf_vec, quantize_to_cdf, LogisticParams, MixtureParams, SymbolGrid};
use shvc::image::{crop, pad_replicate};
use shvc::tensor::{f_g_permutation, pixel_unshuffle_f, subpixel_shuffle_g_inv, subpixel_unshuffle_g, Tensor};

fn tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor<u64> {
    Tensor::from_fn(c, h, w, |a, b, d| seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((a * 1_000_000 + b * 1000 + d) as u64))
}

proptest! {
    #[test]
    fn g_is_a_channel_permutation_of_f(c in 1usize..5, k in 1usize..4, hb in 1usize..5, wb in 1usize..5, seed: u64) {
        let t = tensor(c, k * hb, k * wb, seed);
        let g = subpixel_unshuffle_g(&t, k).unwrap();
        let f = pixel_unshuffle_f(&t, k).unwrap();
        prop_assert_eq!(subpixel_shuffle_g_inv(&g, k, c).unwrap(), t);
        for (n, &p) in f_g_permutation(c, k).iter().enumerate() {
            prop_assert_eq!(g.channel(n), f.channel(p));
        }
    }

    #[test]
    fn quantized_tables_are_complete(raw in prop::collection::vec(0.0f64..1.0, 2..300), precision in 12u32..=16) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 0.0);
        let pmf: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let t = quantize_to_cdf(&pmf, precision).unwrap();
        prop_assert!(t.freqs().iter().all(|&f| f >= 1));
        prop_assert_eq!(t.freqs().iter().map(|&f| u64::from(f)).sum::<u64>(), 1u64 << precision);
        prop_assert!(t.kl_bits(&pmf) <= pmf.len() as f64 * 2f64.powi(1 - precision as i32));
    }

    #[test]
    fn mixture_pmfs_sum_to_one(mean in -1.5f64..1.5, log_scale in -9.0f64..4.0, w in -3.0f64..3.0) {
        let m = MixtureParams::new(
            vec![LogisticParams::new(mean, log_scale), LogisticParams::new(-mean, log_scale / 2.0)],
            vec![w, 0.0],
        ).unwrap();
        for grid in [SymbolGrid::pixels(), SymbolGrid::latents()] {
            let pmf = mixture_pmf_vec(&m, &grid);
            prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn pushes_pop_back_in_reverse(syms in prop::collection::vec(0usize..6, 0..500), seed: u64) {
        let t = quantize_to_cdf(&[0.5, 0.2, 0.1, 0.1, 0.09, 0.01], 16).unwrap();
        let mut c = AnsCoder::new(AuxSource::prng(seed)).unwrap();
        for &s in &syms {
            c.push(s, &t);
        }
        let mut d = AnsCoder::from_words(&c.to_words()).unwrap();
        for &s in syms.iter().rev() {
            prop_assert_eq!(d.pop(&t).unwrap(), s);
        }
        prop_assert_eq!(d.to_words(), AnsCoder::new(AuxSource::prng(seed)).unwrap().to_words());
    }

    #[test]
    fn padding_then_cropping_is_identity(h in 1usize..20, w in 1usize..20, m in 1usize..9, seed: u64) {
        let t = tensor(2, h, w, seed);
        let p = pad_replicate(&t, m);
        prop_assert_eq!(p.height() % m, 0);
        prop_assert_eq!(p.width() % m, 0);
        prop_assert_eq!(p.get(1, p.height() - 1, p.width() - 1), t.get(1, h - 1, w - 1));
        prop_assert_eq!(crop(&p, h, w).unwrap(), t);
    }
}
