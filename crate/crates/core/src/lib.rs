//! Signature-based random access over an OR multiple-access channel.

pub mod codec;
pub mod combinatorics;
pub mod config;
pub mod decoder;
pub mod dimensioning;
pub mod error;
pub mod ormac;
pub mod report;
pub mod sim;

pub use codec::{
    build_codebook, generate_signature, random_signature, Codebook, DeviceIdentity, MixerMode, SignatureParams,
};
pub use config::ExperimentSpec;
pub use decoder::{
    decode_full, decode_iterative, DecodeOutcome, DecodeReport, DecodeTrace, IterativeDecoder, TraceRecord,
};
pub use dimensioning::{dimension, DimensioningInput, DimensioningResult};
pub use error::{Error, Result};
pub use ormac::{contains, superpose, BitGrid, ChannelParams, FrameShape, ObservationFrame, Signature};
pub use sim::{
    compute_metrics, run_baseline_arp, run_experiment, run_random_arp, run_signature_arp, sample_arrivals, RunMetrics,
    Scheme, SimConfig,
};
