//! Turning a discretized logistic mixture into a 16-bit frequency table.

use shvc::dist::{entropy_bits, mixture_pmf_vec, quantize_to_cdf, LogisticParams, MixtureParams, SymbolGrid};

fn main() -> shvc::Result<()> {
    let grid = SymbolGrid::pixels();
    let mix = MixtureParams::new(
        vec![LogisticParams::new(-0.3, -2.5), LogisticParams::new(0.6, -1.0)],
        vec![1.0, 0.0],
    )?;
    let pmf = mixture_pmf_vec(&mix, &grid);
    let table = quantize_to_cdf(&pmf, 16)?;

    println!("sum of pmf      {:.12}", pmf.iter().sum::<f64>());
    println!("entropy         {:.4} bits", entropy_bits(&pmf));
    println!("table KL        {:.3e} bits", table.kl_bits(&pmf));
    println!("smallest freq   {}", table.freqs().iter().min().unwrap());
    for s in [0, 64, 89, 128, 204, 255] {
        println!(
            "symbol {s:3} value {:+.4} pmf {:.6} freq {:5} cost {:.3} bits",
            grid.value(s),
            pmf[s],
            table.freq(s),
            table.bits(s)
        );
    }
    Ok(())
}
