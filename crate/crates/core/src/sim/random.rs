use std::collections::HashMap;

use rand::Rng;

use super::{compute_metrics, sample_arrivals, RunEvents, RunMetrics, SimConfig};
use crate::codec::random_signature;
use crate::error::Result;
use crate::ormac::{superpose, FrameShape, Signature};

/// Random signatures with `K = L`: every arrival picks a fresh uniform
/// preamble in each of the `L` RAOs and nothing is decodable before the frame
/// ends.
///
/// The BS serves every one-preamble-per-RAO pattern contained in the
/// observation, i.e. the product of the per-RAO active counts. A device is
/// served only if its own pattern is contained and no other arrival drew the
/// same one. Everything else served is a false positive.
pub fn run_random_arp<R: Rng + ?Sized>(config: &SimConfig, frame_len: usize, rng: &mut R) -> Result<RunMetrics> {
    config.validate()?;
    let shape = FrameShape::new(frame_len, config.preambles)?;
    let arrived = sample_arrivals(config.population, config.arrivals, rng);
    let sigs: Vec<Signature> = arrived.iter().map(|_| random_signature(shape, rng)).collect();
    let y = superpose(shape, &sigs, &config.channel, rng)?;

    let mut copies: HashMap<&Signature, usize> = HashMap::new();
    for s in &sigs {
        *copies.entry(s).or_default() += 1;
    }
    let served = sigs
        .iter()
        .filter(|s| copies[s] == 1 && y.contains(s, frame_len))
        .count();
    let patterns: f64 = (0..frame_len).map(|r| y.active_in_row(r).count() as f64).product();

    let step1 = frame_len as f64 * config.rao_period_ms;
    let fin = step1 + config.processing_delay_ms + config.grant_to_data_ms;
    Ok(compute_metrics(RunEvents {
        arrivals: arrived.len(),
        served,
        false_positives: patterns - served as f64,
        step1_ms: vec![step1; served],
        final_ms: vec![fin; served],
        ..Default::default()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ormac::ChannelParams;
    use crate::sim::Scheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lone_arrival_on_ideal_channel() {
        let mut cfg = SimConfig::new(1, 1, Scheme::Random, 0);
        cfg.channel = ChannelParams::IDEAL;
        let m = run_random_arp(&cfg, 30, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(m.detection_prob, Some(1.0));
        assert_eq!(m.goodput, Some(1.0));
        assert_eq!(m.mean_step1_ms, Some(30.0));
        assert_eq!(m.mean_final_ms, Some(30.0 + 3.0 + 5.0));
    }

    #[test]
    fn identical_draws_collide() {
        // a single preamble and RAO forces every arrival onto the same pattern
        let mut cfg = SimConfig::new(3, 3, Scheme::Random, 0);
        cfg.preambles = 1;
        cfg.channel = ChannelParams::IDEAL;
        let m = run_random_arp(&cfg, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.served, 0);
        assert_eq!(m.detection_prob, Some(0.0));
        assert_eq!(m.false_positives, 1.0);
        assert_eq!(m.goodput, Some(0.0));
    }

    #[test]
    fn pattern_count_is_row_product() {
        let mut cfg = SimConfig::new(2, 2, Scheme::Random, 0);
        cfg.channel = ChannelParams::IDEAL;
        for seed in 0..50 {
            let m = run_random_arp(&cfg, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let total = m.served as f64 + m.false_positives;
            // two arrivals light one or two preambles per RAO
            assert!([1.0, 2.0, 4.0, 8.0].contains(&total), "{total}");
        }
    }
}
