//! Shared fixtures for the benchmarks in `benches/`.

use citetax_core::encoder::{EncoderParams, EncoderShape};
use citetax_core::eval::{synth_graph, SynthConfig, SynthInstance};
use citetax_core::graph::{init_level_graph, LevelGraph};

/// The planted two-level instance: 4 blocks of `block_size` in 2 super-blocks.
pub fn planted(block_size: usize, seed: u64) -> SynthInstance {
    synth_graph(&SynthConfig {
        block_size,
        seed,
        ..SynthConfig::default()
    })
    .expect("valid synth config")
}

pub fn base_graph(s: &SynthInstance) -> LevelGraph {
    init_level_graph(&s.graph, &s.embeddings).expect("synth graph is consistent")
}

/// Default-shaped encoder for the instance's feature width.
pub fn params(s: &SynthInstance, seed: u64) -> EncoderParams {
    EncoderParams::init(EncoderShape::new(s.embeddings.dim()), seed).expect("valid shape")
}
