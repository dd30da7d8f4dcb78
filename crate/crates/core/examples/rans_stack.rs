//! The rANS stack: pushes and pops are exact inverses, and popping from a
//! fresh coder draws seed bits that a decoder later hands back.

use shvc::ans::{AnsCoder, AuxSource};
use shvc::dist::quantize_to_cdf;

fn main() -> shvc::Result<()> {
    let table = quantize_to_cdf(&[0.6, 0.25, 0.1, 0.05], 16)?;

    // "sampling" with the coder: pops consume aux bits
    let mut coder = AnsCoder::new(AuxSource::prng(42))?;
    let drawn: Vec<usize> = (0..20).map(|_| coder.pop(&table)).collect::<shvc::Result<_>>()?;
    println!("popped {drawn:?}");
    println!("aux bits consumed {}", coder.aux_bits_consumed());

    let message: Vec<usize> = (0..200).map(|i| (i * i) % 4).collect();
    for &s in &message {
        coder.push(s, &table);
    }
    let words = coder.to_words();
    println!("{} symbols in {} words ({} bits)", message.len(), words.len(), coder.total_bits());

    let mut dec = AnsCoder::from_words(&words)?;
    for &s in message.iter().rev() {
        assert_eq!(dec.pop(&table)?, s);
    }
    for &s in drawn.iter().rev() {
        dec.push(s, &table);
    }
    let returned = dec.returned_aux_words()?;
    assert_eq!(returned, AuxSource::prng(42).preview(returned.len()));
    println!("decoder returned {} aux words intact", returned.len());
    Ok(())
}
