//! Ternary noise modulation (T-NoiseMod).
//!
//! Information is carried by the *statistics* of artificial noise rather than by a
//! deterministic waveform. Each signalling interval is two blocks of `N` samples, each block
//! is low-variance (`L`), high-variance (`H`) or silent (`S`), and the eight legal pairs
//! (everything except `(S, S)`) carry three bits.
//!
//! The crate is organised along the signal path:
//!
//! - [`modem`]: bit mapping and block synthesis.
//! - [`channel`]: quasi-static Rayleigh fading plus complex AWGN.
//! - [`detector`]: mean-based silent test, variance LRT and the `(S, S)` repair rule.
//! - [`analysis`]: closed-form conditional BEP and its Rayleigh average.
//! - [`montecarlo`]: seeded end-to-end BER simulation, binary NoiseMod baseline and sweeps.

pub mod analysis;
pub mod channel;
pub mod detector;
mod error;
pub mod modem;
pub mod montecarlo;
pub mod rng;

pub use analysis::{
    average_bep, conditional_bep, pair_distribution, q_function, stage_probs, transition_kernel,
    PairDistribution, StageProbs, TransitionKernel,
};
pub use channel::{apply_channel, draw_rayleigh, ChannelRealization, RxFrame};
pub use detector::{
    demodulate, lrt_threshold, segment_stats, silent_test, variance_test, DetectionResult,
    SegmentStats,
};
pub use error::{CoreError, Result};
pub use modem::{
    generate_block, map_bits_to_pair, map_pair_to_bits, map_states_to_bits, modulate, BitTriplet,
    LinkConfig, SampleModel, StatePair, TernaryState, TxFrame,
};
pub use montecarlo::{
    run_binary_point, run_sweep, run_ternary_point, BerRecord, EnergyNorm, Scheme, SweepSpec,
};

pub use num_complex::Complex64;
