//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigaccess_core::{
    sample_arrivals, superpose, ChannelParams, Codebook, MixerMode, ObservationFrame, SignatureParams,
};

/// Codebook, arrivals and a noisy observation at `T = 1000`.
pub struct Frame {
    pub codebook: Codebook,
    pub arrived: Vec<usize>,
    pub observation: ObservationFrame,
}

pub fn frame(arrivals: usize, raos: usize, weight: usize, seed: u64) -> Frame {
    let params = SignatureParams::new(raos, 54, weight, MixerMode::SplitMix64).expect("valid params");
    let codebook = Codebook::sequential(1000, params).expect("codebook");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrived = sample_arrivals(1000, arrivals, &mut rng);
    let sigs = codebook.signatures();
    let channel = ChannelParams::new(0.99, 1e-3).expect("channel");
    let observation =
        superpose(params.shape(), arrived.iter().map(|&i| &sigs[i]), &channel, &mut rng).expect("shapes match");
    Frame {
        codebook,
        arrived,
        observation,
    }
}
