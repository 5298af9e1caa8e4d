//! Seeded end-to-end BER simulation.
//!
//! Every trial owns a random substream keyed by `(seed, scheme, delta index, trial)`, so
//! counts are independent of thread scheduling. Curves of one sweep that share a `delta`
//! value also share streams (common random numbers), which keeps curve orderings stable
//! at modest trial counts.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::average_bep;
use crate::channel::{add_awgn, draw_rayleigh, ChannelRealization};
use crate::detector::{demodulate, lrt_threshold_from_variances, segment_stats, variance_test};
use crate::error::{CoreError, Result};
use crate::modem::{fill_gaussian, modulate, BitTriplet, LinkConfig, StatePair, TernaryState};
use crate::rng::{stream_key, substream};
use crate::Complex64;

/// Smallest trial budget a sweep accepts.
pub const MIN_SWEEP_TRIALS: u64 = 10_000;

/// Two-sided 95% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

const TERNARY_TAG: u64 = 0x7465_726e;
const BINARY_TAG: u64 = 0x6269_6e61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ternary,
    Binary,
}

impl Scheme {
    /// Information bits per two-block interval.
    pub fn bits_per_interval(self) -> u64 {
        match self {
            Scheme::Ternary => 3,
            Scheme::Binary => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ternary => "ternary",
            Scheme::Binary => "binary",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the binary baseline's variances are scaled against the ternary scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyNorm {
    /// Equal average transmit energy per two-block interval.
    #[default]
    EqualPairEnergy,
    /// Use `sigma_l2` and `sigma_h2` as configured.
    Unscaled,
}

impl EnergyNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyNorm::EqualPairEnergy => "equal-pair-energy",
            EnergyNorm::Unscaled => "none",
        }
    }
}

impl fmt::Display for EnergyNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnergyNorm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "equal-pair-energy" => Ok(EnergyNorm::EqualPairEnergy),
            "none" => Ok(EnergyNorm::Unscaled),
            other => Err(format!(
                "unknown energy normalisation {other:?}, expected equal-pair-energy or none"
            )),
        }
    }
}

/// Channel used by a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Fresh `h ~ CN(0, 1)` per frame.
    Rayleigh,
    /// The same coefficient for every frame.
    Fixed(ChannelRealization),
}

/// Raw counts from a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCounts {
    pub frames: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
    /// Frames where the `(S, S)` repair fired (ternary only).
    pub refined: u64,
    /// Frames whose detected pair had no active block. Always zero.
    pub silent_pairs: u64,
}

impl ErrorCounts {
    fn merge(self, other: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            frames: self.frames + other.frames,
            bit_errors: self.bit_errors + other.bit_errors,
            total_bits: self.total_bits + other.total_bits,
            refined: self.refined + other.refined,
            silent_pairs: self.silent_pairs + other.silent_pairs,
        }
    }

    pub fn ber(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.total_bits as f64
        }
    }
}

/// Half-width of the 95% Wilson score interval for `errors` out of `total`.
pub fn wilson_halfwidth(errors: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let p = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// One sweep point's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub config: LinkConfig,
    /// Rayleigh-averaged BEP; `None` for the binary baseline or when quadrature failed.
    pub analytic_bep: Option<f64>,
    pub frames: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub ci_halfwidth: f64,
    pub seed: u64,
    /// Set when part of the point failed; the simulated columns are still valid.
    pub error: Option<String>,
}

impl BerRecord {
    fn new(scheme: Scheme, config: LinkConfig, counts: ErrorCounts, seed: u64) -> Self {
        BerRecord {
            scheme,
            config,
            analytic_bep: None,
            frames: counts.frames,
            bit_errors: counts.bit_errors,
            total_bits: counts.total_bits,
            ci_halfwidth: wilson_halfwidth(counts.bit_errors, counts.total_bits),
            seed,
            error: None,
        }
    }

    pub fn simulated_ber(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.total_bits as f64
        }
    }

    pub fn bits_per_interval(&self) -> u64 {
        self.scheme.bits_per_interval()
    }
}

fn run_trials<F>(trials: u64, trial: F) -> ErrorCounts
where
    F: Fn(u64) -> ErrorCounts + Sync,
{
    const BATCH: u64 = 2048;
    let batches = trials.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            (b * BATCH..trials.min((b + 1) * BATCH))
                .map(&trial)
                .fold(ErrorCounts::default(), ErrorCounts::merge)
        })
        .reduce(ErrorCounts::default, ErrorCounts::merge)
}

/// Ternary link simulation: random bits, modulate, fade, add noise, detect.
pub fn simulate_ternary(
    cfg: &LinkConfig,
    fading: Fading,
    trials: u64,
    seed: u64,
    label: u64,
) -> ErrorCounts {
    let key = stream_key(seed, &[TERNARY_TAG, label]);
    run_trials(trials, |t| {
        let mut rng = substream(key, &[t]);
        let bits: BitTriplet = rng.gen();
        let tx = modulate(bits, cfg, &mut rng);
        let h = match fading {
            Fading::Rayleigh => draw_rayleigh(&mut rng),
            Fading::Fixed(h) => h,
        };
        let rx = crate::channel::apply_channel(&tx, h, cfg, &mut rng);
        let detection = demodulate(&rx, cfg).expect("frame length matches the configuration");
        ErrorCounts {
            frames: 1,
            bit_errors: bits.hamming(detection.bits) as u64,
            total_bits: 3,
            refined: detection.refined as u64,
            silent_pairs: (detection.states.active_blocks() == 0) as u64,
        }
    })
}

/// Binary NoiseMod: one bit per block, zero-mean blocks with variance `sigma_l2'` (bit 0) or
/// `sigma_h2'` (bit 1), detected by the variance LRT alone. Noise power follows `cfg`.
pub fn simulate_binary(
    cfg: &LinkConfig,
    norm: EnergyNorm,
    fading: Fading,
    trials: u64,
    seed: u64,
    label: u64,
) -> ErrorCounts {
    let (var_low, var_high) = scale_binary_variances(cfg, norm);
    let sigma_w2 = cfg.sigma_w2();
    let n = cfg.n();
    let key = stream_key(seed, &[BINARY_TAG, label]);
    run_trials(trials, |t| {
        let mut rng = substream(key, &[t]);
        let bits: [bool; 2] = [rng.gen(), rng.gen()];
        let mut samples = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (block, bit) in samples.chunks_exact_mut(n).zip(bits) {
            let variance = if bit { var_high } else { var_low };
            fill_gaussian(block, 0.0, variance, cfg.sample_model(), &mut rng);
        }
        let h = match fading {
            Fading::Rayleigh => draw_rayleigh(&mut rng),
            Fading::Fixed(h) => h,
        };
        let mut rx = samples;
        for y in rx.iter_mut() {
            *y *= h.h;
        }
        add_awgn(&mut rx, sigma_w2, &mut rng);

        let u = h.power();
        let tau = lrt_threshold_from_variances(u * var_low + sigma_w2, u * var_high + sigma_w2);
        let mut bit_errors = 0;
        for (segment, bit) in rx.chunks_exact(n).zip(bits) {
            let stats = segment_stats(segment, h, cfg).expect("segment length is N");
            let decided_high = variance_test(&stats, tau) == TernaryState::H;
            bit_errors += (decided_high != bit) as u64;
        }
        ErrorCounts {
            frames: 1,
            bit_errors,
            total_bits: 2,
            ..ErrorCounts::default()
        }
    })
}

/// Average transmit energy of one ternary interval, enumerated over the mapping table.
/// Silent blocks cost nothing; an active block costs `N (sigma^2 + mu^2)`.
pub fn ternary_energy(n: usize, mu: f64, sigma_l2: f64, sigma_h2: f64) -> f64 {
    let block = |s: TernaryState| match s {
        TernaryState::S => 0.0,
        TernaryState::L => n as f64 * (sigma_l2 + mu * mu),
        TernaryState::H => n as f64 * (sigma_h2 + mu * mu),
    };
    StatePair::ALL
        .iter()
        .map(|p| block(p.first()) + block(p.second()))
        .sum::<f64>()
        / 8.0
}

pub fn ternary_avg_energy_per_pair(cfg: &LinkConfig) -> f64 {
    ternary_energy(cfg.n(), cfg.mu(), cfg.sigma_l2(), cfg.sigma_h2())
}

/// Baseline variances `(sigma_l2', sigma_h2')`. With equal-pair-energy scaling the binary
/// interval, `N (sigma_l2' + sigma_h2')`, matches [`ternary_avg_energy_per_pair`].
pub fn scale_binary_variances(cfg: &LinkConfig, norm: EnergyNorm) -> (f64, f64) {
    let (low, high) = (cfg.sigma_l2(), cfg.sigma_h2());
    match norm {
        EnergyNorm::Unscaled => (low, high),
        EnergyNorm::EqualPairEnergy => {
            let scale = ternary_avg_energy_per_pair(cfg) / (cfg.n() as f64 * (low + high));
            (scale * low, scale * high)
        }
    }
}

pub fn run_ternary_point(cfg: &LinkConfig, trials: u64, seed: u64) -> BerRecord {
    ternary_point(cfg, trials, seed, 0)
}

fn ternary_point(cfg: &LinkConfig, trials: u64, seed: u64, label: u64) -> BerRecord {
    let counts = simulate_ternary(cfg, Fading::Rayleigh, trials, seed, label);
    let mut record = BerRecord::new(Scheme::Ternary, *cfg, counts, seed);
    match average_bep(cfg) {
        Ok(p) => record.analytic_bep = Some(p),
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

pub fn run_binary_point(cfg: &LinkConfig, trials: u64, seed: u64, norm: EnergyNorm) -> BerRecord {
    binary_point(cfg, trials, seed, norm, 0)
}

fn binary_point(
    cfg: &LinkConfig,
    trials: u64,
    seed: u64,
    norm: EnergyNorm,
    label: u64,
) -> BerRecord {
    let counts = simulate_binary(cfg, norm, Fading::Rayleigh, trials, seed, label);
    BerRecord::new(Scheme::Binary, *cfg, counts, seed)
}

/// Parameter varied across the curves of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveAxis {
    Single,
    Mu(Vec<f64>),
    N(Vec<usize>),
}

impl CurveAxis {
    fn configs(&self, base: &LinkConfig) -> Result<Vec<LinkConfig>> {
        match self {
            CurveAxis::Single => Ok(vec![*base]),
            CurveAxis::Mu(values) => values.iter().map(|&mu| base.with_mu(mu)).collect(),
            CurveAxis::N(values) => values.iter().map(|&n| base.with_n(n)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSpec {
    /// Block length of a single baseline curve; `None` adds one baseline per curve.
    pub n: Option<usize>,
    pub norm: EnergyNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Parameters shared by every point; the baseline's energy reference when `n` is fixed.
    pub base: LinkConfig,
    /// x-axis of every curve.
    pub delta_db: Vec<f64>,
    pub curves: CurveAxis,
    /// Frames per point.
    pub trials: u64,
    pub seed: u64,
    pub baseline: Option<BaselineSpec>,
}

/// One point to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub config: LinkConfig,
    /// Index into the delta grid; selects the random substream.
    pub delta_index: usize,
}

/// 0 to 30 dB in 2 dB steps.
pub fn default_delta_grid() -> Vec<f64> {
    (0..=15).map(|i| 2.0 * i as f64).collect()
}

fn strictly_increasing<T: PartialOrd>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

impl SweepSpec {
    /// `mu` in {0.57, 0.77, 1} at `N = 200` with an `N = 400` baseline.
    pub fn fig2(trials: u64, seed: u64) -> Self {
        SweepSpec {
            base: LinkConfig::new(200, 0.57, 1.0, 10.0, 0.0).expect("valid preset"),
            delta_db: default_delta_grid(),
            curves: CurveAxis::Mu(vec![0.57, 0.77, 1.0]),
            trials,
            seed,
            baseline: Some(BaselineSpec {
                n: Some(400),
                norm: EnergyNorm::EqualPairEnergy,
            }),
        }
    }

    /// `N` in {100, 200, 400} at `mu = 1`, each with a baseline of the same `N`.
    pub fn fig3(trials: u64, seed: u64) -> Self {
        SweepSpec {
            base: LinkConfig::new(200, 1.0, 1.0, 10.0, 0.0).expect("valid preset"),
            delta_db: default_delta_grid(),
            curves: CurveAxis::N(vec![100, 200, 400]),
            trials,
            seed,
            baseline: Some(BaselineSpec {
                n: None,
                norm: EnergyNorm::EqualPairEnergy,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CoreError::InvalidSweep(msg));
        if self.trials < MIN_SWEEP_TRIALS {
            return fail(format!(
                "trials must be at least {MIN_SWEEP_TRIALS}, got {}",
                self.trials
            ));
        }
        if self.delta_db.is_empty() {
            return fail("delta_db grid is empty".into());
        }
        if !strictly_increasing(&self.delta_db) {
            return fail("delta_db grid must be strictly increasing".into());
        }
        match &self.curves {
            CurveAxis::Single => {}
            CurveAxis::Mu(v) if v.is_empty() => return fail("mu list is empty".into()),
            CurveAxis::N(v) if v.is_empty() => return fail("N list is empty".into()),
            CurveAxis::Mu(v) if !strictly_increasing(v) => {
                return fail("mu list must be strictly increasing".into())
            }
            CurveAxis::N(v) if !strictly_increasing(v) => {
                return fail("N list must be strictly increasing".into())
            }
            _ => {}
        }
        self.points().map(|_| ())
    }

    /// Every point in evaluation order: ternary curves first, then baselines, each walking
    /// the delta grid.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let curves = self.curves.configs(&self.base)?;
        let baselines: Vec<LinkConfig> = match self.baseline {
            None => Vec::new(),
            Some(BaselineSpec { n: Some(n), .. }) => vec![self.base.with_n(n)?],
            Some(BaselineSpec { n: None, .. }) => curves.clone(),
        };
        let mut points = Vec::new();
        for (scheme, group) in [(Scheme::Ternary, &curves), (Scheme::Binary, &baselines)] {
            for cfg in group {
                for (delta_index, &delta_db) in self.delta_db.iter().enumerate() {
                    points.push(SweepPoint {
                        scheme,
                        config: cfg.with_delta_db(delta_db)?,
                        delta_index,
                    });
                }
            }
        }
        Ok(points)
    }

    pub fn norm(&self) -> EnergyNorm {
        self.baseline.map(|b| b.norm).unwrap_or_default()
    }
}

/// Runs a sweep point by point. Analytic failures are recorded on the affected record.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BerRecord>> {
    run_sweep_with_progress(spec, |_, _, _| {})
}

/// Like [`run_sweep`], calling `progress(done, total, record)` after each point.
pub fn run_sweep_with_progress<P>(spec: &SweepSpec, mut progress: P) -> Result<Vec<BerRecord>>
where
    P: FnMut(usize, usize, &BerRecord),
{
    spec.validate()?;
    let points = spec.points()?;
    let total = points.len();
    let mut records = Vec::with_capacity(total);
    for (i, point) in points.iter().enumerate() {
        let label = point.delta_index as u64;
        let record = match point.scheme {
            Scheme::Ternary => ternary_point(&point.config, spec.trials, spec.seed, label),
            Scheme::Binary => {
                binary_point(&point.config, spec.trials, spec.seed, spec.norm(), label)
            }
        };
        progress(i + 1, total, &record);
        records.push(record);
    }
    Ok(records)
}
