//! Batch-arrival simulation of the three access schemes.
//!
//! Every replication draws a binomial batch of arrivals out of `T` devices
//! and runs one access scheme to completion. All times are in milliseconds
//! from the batch instant; RAO `t` (0-based) occupies `[t, t+1)` periods.

mod baseline;
mod random;
mod results;
mod signature;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{splitmix64, Codebook, MixerMode, SignatureParams};
use crate::decoder::DecodeTrace;
use crate::dimensioning::{dimension, DimensioningInput};
use crate::error::{Error, Result};
use crate::ormac::ChannelParams;

pub use baseline::run_baseline_arp;
pub use random::run_random_arp;
pub use results::{read_results, write_results, ResultRow};
pub use signature::run_signature_arp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Signature,
    Baseline,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Signature, Scheme::Baseline, Scheme::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Signature => "signature",
            Scheme::Baseline => "baseline",
            Scheme::Random => "random",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "signature" => Ok(Scheme::Signature),
            "baseline" => Ok(Scheme::Baseline),
            "random" => Ok(Scheme::Random),
            other => Err(Error::invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

/// How a detected preamble collision is charged in the baseline goodput.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CollisionAccounting {
    /// Every colliding device sends its own msg3, and each one is wasted.
    #[default]
    PerMessage,
    /// One wasted msg3 resource per collided preamble.
    PerGroup,
}

impl fmt::Display for CollisionAccounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CollisionAccounting::PerMessage => "per-message",
            CollisionAccounting::PerGroup => "per-group",
        })
    }
}

impl FromStr for CollisionAccounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per-message" => Ok(CollisionAccounting::PerMessage),
            "per-group" => Ok(CollisionAccounting::PerGroup),
            other => Err(Error::invalid(format!("unknown collision accounting {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub population: usize,
    pub arrivals: usize,
    pub preambles: usize,
    pub rao_period_ms: f64,
    pub scheme: Scheme,
    pub backoff_window_ms: f64,
    pub max_attempts: u32,
    pub payload_bytes: u32,
    pub channel: ChannelParams,
    pub rar_window_ms: f64,
    pub processing_delay_ms: f64,
    pub grant_to_data_ms: f64,
    /// Baseline msg4 timer before a collided device may retry.
    pub contention_resolution_ms: f64,
    /// Goodput target used to dimension the signature frames.
    pub target_goodput: f64,
    /// Fixed signature weight, skipping dimensioning when set with `frame_len`.
    pub weight: Option<usize>,
    pub frame_len: Option<usize>,
    pub mixer: MixerMode,
    pub collision_accounting: CollisionAccounting,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    /// Defaults for everything but the population, arrivals and seed.
    pub fn new(population: usize, arrivals: usize, scheme: Scheme, seed: u64) -> Self {
        SimConfig {
            population,
            arrivals,
            preambles: 54,
            rao_period_ms: 1.0,
            scheme,
            backoff_window_ms: 20.0,
            max_attempts: 10,
            payload_bytes: 100,
            channel: ChannelParams::new(0.99, 1e-3).expect("valid default channel"),
            rar_window_ms: 5.0,
            processing_delay_ms: 3.0,
            grant_to_data_ms: 5.0,
            contention_resolution_ms: 48.0,
            target_goodput: 0.99,
            weight: None,
            frame_len: None,
            mixer: MixerMode::default(),
            collision_accounting: CollisionAccounting::default(),
            replications: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.preambles == 0 {
            return Err(Error::invalid("T and M must be positive"));
        }
        if self.arrivals > self.population {
            return Err(Error::invalid(format!(
                "N={} exceeds T={}",
                self.arrivals, self.population
            )));
        }
        let times = [
            ("rao_period_ms", self.rao_period_ms),
            ("backoff_window_ms", self.backoff_window_ms),
        ];
        for (name, v) in times {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let delays = [
            ("rar_window_ms", self.rar_window_ms),
            ("processing_delay_ms", self.processing_delay_ms),
            ("grant_to_data_ms", self.grant_to_data_ms),
            ("contention_resolution_ms", self.contention_resolution_ms),
        ];
        for (name, v) in delays {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.max_attempts == 0 || self.replications == 0 {
            return Err(Error::invalid("max_attempts and replications must be positive"));
        }
        if self.weight.is_some() != self.frame_len.is_some() {
            return Err(Error::invalid("K and L must be given together"));
        }
        Ok(())
    }

    pub fn arrival_prob(&self) -> f64 {
        self.arrivals as f64 / self.population as f64
    }

    /// Number of whole RAOs needed to cover `ms`.
    pub(crate) fn raos_for(&self, ms: f64) -> usize {
        (ms / self.rao_period_ms - 1e-9).ceil().max(0.0) as usize
    }

    /// `(K, L)` for the signature frames: the configured override, or the
    /// dimensioning result at this `N`.
    pub fn frame_dimensions(&self) -> Result<(usize, usize)> {
        if let (Some(k), Some(l)) = (self.weight, self.frame_len) {
            return Ok((k, l));
        }
        let input = DimensioningInput::new(
            self.arrivals as f64,
            self.population as f64,
            self.preambles,
            self.target_goodput,
            self.channel,
        )?;
        let dims = dimension(&input)?;
        Ok((dims.weight, dims.frame_len))
    }
}

/// Each of `population` devices arrives independently with probability
/// `arrivals / population`. Returned indices are ascending.
pub fn sample_arrivals<R: Rng + ?Sized>(population: usize, arrivals: usize, rng: &mut R) -> Vec<usize> {
    if arrivals == 0 {
        return Vec::new();
    }
    if arrivals >= population {
        return (0..population).collect();
    }
    let p = arrivals as f64 / population as f64;
    (0..population).filter(|_| rng.random::<f64>() < p).collect()
}

/// Seed of replication `rep` under `master`.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master ^ rep as u64)
}

/// Raw outcome of one replication before averaging.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunEvents {
    pub arrivals: usize,
    /// Arrivals that were correctly served.
    pub served: usize,
    /// Step-3 resources spent on anything other than a served arrival.
    pub false_positives: f64,
    pub step1_ms: Vec<f64>,
    pub final_ms: Vec<f64>,
    /// Baseline only: arrivals that gave up after `max_attempts`.
    pub outage: usize,
    /// Baseline only: access attempts per arrival.
    pub attempts: Vec<u32>,
    pub trace: Option<DecodeTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// Absent when nothing was served at all.
    pub goodput: Option<f64>,
    /// Absent without arrivals.
    pub detection_prob: Option<f64>,
    pub mean_step1_ms: Option<f64>,
    pub mean_final_ms: Option<f64>,
    pub false_positives: f64,
    pub arrivals: usize,
    pub served: usize,
    pub step1_ms: Vec<f64>,
    pub final_ms: Vec<f64>,
    pub trace: Option<DecodeTrace>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn compute_metrics(events: RunEvents) -> RunMetrics {
    let served = events.served as f64;
    let total = served + events.false_positives;
    RunMetrics {
        goodput: (total > 0.0).then(|| served / total),
        detection_prob: (events.arrivals > 0).then(|| served / events.arrivals as f64),
        mean_step1_ms: mean(&events.step1_ms),
        mean_final_ms: mean(&events.final_ms),
        false_positives: events.false_positives,
        arrivals: events.arrivals,
        served: events.served,
        step1_ms: events.step1_ms,
        final_ms: events.final_ms,
        trace: events.trace,
    }
}

/// Per-configuration state shared by all replications.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    config: SimConfig,
    dims: Option<(usize, usize)>,
    codebook: Option<Arc<Codebook>>,
}

impl PreparedRun {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let (dims, codebook) = match config.scheme {
            Scheme::Baseline => (None, None),
            Scheme::Random => {
                // same frame length as the signature scheme, every RAO active
                let (_, l) = config.frame_dimensions()?;
                (Some((l, l)), None)
            }
            Scheme::Signature => {
                let (k, l) = config.frame_dimensions()?;
                let params = SignatureParams::new(l, config.preambles, k, config.mixer)?;
                let cb = Codebook::sequential(config.population, params)?;
                (Some((k, l)), Some(Arc::new(cb)))
            }
        };
        Ok(PreparedRun { config, dims, codebook })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    pub fn codebook(&self) -> Option<&Codebook> {
        self.codebook.as_deref()
    }

    pub fn run_with_seed(&self, seed: u64) -> Result<RunMetrics> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.config;
        match cfg.scheme {
            Scheme::Baseline => run_baseline_arp(cfg, &mut rng),
            Scheme::Random => run_random_arp(cfg, self.dims.expect("prepared").1, &mut rng),
            Scheme::Signature => {
                let cb = self.codebook.as_deref().expect("prepared");
                run_signature_arp(cfg, cb, &mut rng)
            }
        }
    }

    pub fn run_replication(&self, rep: usize) -> Result<Replication> {
        let seed = replication_seed(self.config.seed, rep);
        Ok(Replication {
            rep,
            seed,
            metrics: self.run_with_seed(seed)?,
        })
    }

    /// All replications, in replication order whatever the thread schedule.
    pub fn run_all(&self) -> Result<Vec<Replication>> {
        (0..self.config.replications)
            .into_par_iter()
            .map(|rep| self.run_replication(rep))
            .collect()
    }

    pub fn result_row(&self, rep: &Replication) -> ResultRow {
        let m = &rep.metrics;
        ResultRow {
            scheme: self.config.scheme,
            arrivals_mean: self.config.arrivals,
            population: self.config.population,
            preambles: self.config.preambles,
            weight: self.dims.map(|d| d.0),
            frame_len: self.dims.map(|d| d.1),
            seed: rep.seed,
            goodput: m.goodput,
            det_prob: m.detection_prob,
            mean_step1_ms: m.mean_step1_ms,
            mean_final_ms: m.mean_final_ms,
            false_positives: m.false_positives,
            arrivals: m.arrivals,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Replication {
    pub rep: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Runs every replication of one configuration.
pub fn run_experiment(config: &SimConfig) -> Result<Vec<Replication>> {
    PreparedRun::new(config.clone())?.run_all()
}
