//! The two space-to-depth layouts and how they relate.
//!
//! `f` is the usual pixel unshuffle. `g` groups channels by sub-block, so that
//! sub-block `i` of a `k x k` cell occupies channels `i*C .. (i+1)*C`.

use shvc::tensor::{f_g_permutation, pixel_unshuffle_f, subpixel_shuffle_g_inv, subpixel_unshuffle_g, Tensor};

fn main() -> shvc::Result<()> {
    let (c, k) = (2, 2);
    let x = Tensor::from_fn(c, 4, 4, |ch, y, x| (100 * ch + 10 * y + x) as u32);

    let f = pixel_unshuffle_f(&x, k)?;
    let g = subpixel_unshuffle_g(&x, k)?;
    println!("input {:?} -> f/g {:?}", x.shape(), g.shape());

    for n in 0..g.channels() {
        println!("g channel {n}: {:?}", g.channel(n));
    }

    let perm = f_g_permutation(c, k);
    println!("g channel n is f channel perm[n]: {perm:?}");
    for (n, &p) in perm.iter().enumerate() {
        assert_eq!(g.channel(n), f.channel(p));
    }

    assert_eq!(subpixel_shuffle_g_inv(&g, k, c)?, x);
    println!("g inverse restores the input");
    Ok(())
}
