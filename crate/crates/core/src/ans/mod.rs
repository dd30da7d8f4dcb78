//! Entropy coding: the ANS stack, coding schedules and image codecs.

mod codec;
mod coder;
mod schedule;

pub use codec::{
    codelength_oracle, decode_image_arib, decode_image_shvc, encode_dataset_chained, encode_image_arib,
    encode_image_shvc, encode_into, encode_plan, measure_overhead, ChainedDecoder, ChainedEncoded, CodingMode,
    Decoded, Encoded, ImageDecoder, OverheadReport, StepCost,
};
pub use coder::{words_from_bytes, words_to_bytes, AnsCoder, AuxSource, FLUSH_BITS, STATE_LOWER};
pub use schedule::{arib_schedule, bitswap_schedule, decode_schedule, Action, Factor, Step};
