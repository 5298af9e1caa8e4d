//! Bit mapping and block synthesis.
//!
//! A bit triplet selects one of eight state pairs, and each state selects how the `N`
//! samples of its block are drawn: silent blocks are exactly zero, active blocks are
//! i.i.d. Gaussian with mean `mu` and the state's variance.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::distributions::{Distribution, Standard};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};

/// State of a single block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TernaryState {
    /// Silent: the block is not transmitted.
    S,
    /// Low variance.
    L,
    /// High variance.
    H,
}

impl TernaryState {
    pub const ALL: [TernaryState; 3] = [TernaryState::S, TernaryState::L, TernaryState::H];

    /// Row/column index used by transition kernels (`S = 0`, `L = 1`, `H = 2`).
    pub const fn index(self) -> usize {
        match self {
            TernaryState::S => 0,
            TernaryState::L => 1,
            TernaryState::H => 2,
        }
    }

    pub const fn is_active(self) -> bool {
        !matches!(self, TernaryState::S)
    }

    fn as_char(self) -> char {
        match self {
            TernaryState::S => 'S',
            TernaryState::L => 'L',
            TernaryState::H => 'H',
        }
    }
}

impl fmt::Display for TernaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for TernaryState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "S" | "s" => Ok(TernaryState::S),
            "L" | "l" => Ok(TernaryState::L),
            "H" | "h" => Ok(TernaryState::H),
            other => Err(format!("unknown state {other:?}, expected S, L or H")),
        }
    }
}

/// Ordered pair of block states. `(S, S)` cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatePair {
    first: TernaryState,
    second: TernaryState,
}

use TernaryState::{H, L, S};

/// Mapping table, indexed by the triplet value `4*b1 + 2*b2 + b3`.
const MAPPING: [StatePair; 8] = [
    StatePair {
        first: L,
        second: L,
    },
    StatePair {
        first: L,
        second: S,
    },
    StatePair {
        first: L,
        second: H,
    },
    StatePair {
        first: S,
        second: L,
    },
    StatePair {
        first: S,
        second: H,
    },
    StatePair {
        first: H,
        second: L,
    },
    StatePair {
        first: H,
        second: S,
    },
    StatePair {
        first: H,
        second: H,
    },
];

impl StatePair {
    /// All eight valid pairs in mapping-table order.
    pub const ALL: [StatePair; 8] = MAPPING;

    pub fn new(first: TernaryState, second: TernaryState) -> Result<Self> {
        if first == S && second == S {
            return Err(CoreError::SilentPair);
        }
        Ok(StatePair { first, second })
    }

    pub fn first(self) -> TernaryState {
        self.first
    }

    pub fn second(self) -> TernaryState {
        self.second
    }

    pub fn states(self) -> [TernaryState; 2] {
        [self.first, self.second]
    }

    /// Position of this pair in the mapping table, equal to its triplet value.
    pub fn index(self) -> usize {
        map_pair_to_bits(self).index() as usize
    }

    pub fn active_blocks(self) -> usize {
        self.first.is_active() as usize + self.second.is_active() as usize
    }
}

impl fmt::Display for StatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.first, self.second)
    }
}

impl FromStr for StatePair {
    type Err = String;

    /// Accepts `LS`, `L,S` or `(L,S)`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let letters: Vec<char> = s
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ',' | ' '))
            .collect();
        let [a, b] = letters[..] else {
            return Err(format!("expected two states, got {s:?}"));
        };
        let first: TernaryState = a.to_string().parse()?;
        let second: TernaryState = b.to_string().parse()?;
        StatePair::new(first, second).map_err(|e| e.to_string())
    }
}

/// Three information bits `[b1, b2, b3]`, stored as the value `4*b1 + 2*b2 + b3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitTriplet(u8);

impl BitTriplet {
    pub const ALL: [BitTriplet; 8] = [
        BitTriplet(0),
        BitTriplet(1),
        BitTriplet(2),
        BitTriplet(3),
        BitTriplet(4),
        BitTriplet(5),
        BitTriplet(6),
        BitTriplet(7),
    ];

    pub fn new(b1: bool, b2: bool, b3: bool) -> Self {
        BitTriplet(((b1 as u8) << 2) | ((b2 as u8) << 1) | b3 as u8)
    }

    pub fn from_index(index: u8) -> Option<Self> {
        (index < 8).then_some(BitTriplet(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn bits(self) -> [u8; 3] {
        [(self.0 >> 2) & 1, (self.0 >> 1) & 1, self.0 & 1]
    }

    pub fn hamming(self, other: BitTriplet) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

impl From<[u8; 3]> for BitTriplet {
    /// Any nonzero entry counts as a one.
    fn from(bits: [u8; 3]) -> Self {
        BitTriplet::new(bits[0] != 0, bits[1] != 0, bits[2] != 0)
    }
}

impl fmt::Display for BitTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.bits();
        write!(f, "[{a}{b}{c}]")
    }
}

impl Distribution<BitTriplet> for Standard {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitTriplet {
        BitTriplet(rng.gen_range(0..8))
    }
}

/// How the samples of an active block are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleModel {
    /// Circularly-symmetric complex Gaussian around the real mean `mu`; the variance is split
    /// equally between the in-phase and quadrature parts. The closed-form BEP assumes this.
    #[default]
    Circular,
    /// Real Gaussian samples with zero imaginary part.
    Real,
}

impl SampleModel {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleModel::Circular => "circular",
            SampleModel::Real => "real",
        }
    }
}

impl fmt::Display for SampleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "circular" => Ok(SampleModel::Circular),
            "real" => Ok(SampleModel::Real),
            other => Err(format!(
                "unknown sample model {other:?}, expected circular or real"
            )),
        }
    }
}

/// Scalar link parameters.
///
/// `sigma_h2 = alpha * sigma_l2` and `sigma_w2 = sigma_l2 / 10^(delta_db / 10)` are derived.
/// `delta_db = +inf` gives a noiseless link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    n: usize,
    mu: f64,
    sigma_l2: f64,
    alpha: f64,
    delta_db: f64,
    sample_model: SampleModel,
}

impl LinkConfig {
    pub fn new(n: usize, mu: f64, sigma_l2: f64, alpha: f64, delta_db: f64) -> Result<Self> {
        let cfg = LinkConfig {
            n,
            mu,
            sigma_l2,
            alpha,
            delta_db,
            sample_model: SampleModel::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CoreError::InvalidConfig(msg));
        if self.n < 2 {
            return fail(format!("N must be at least 2, got {}", self.n));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return fail(format!(
                "mu must be finite and non-negative, got {}",
                self.mu
            ));
        }
        if !(self.sigma_l2.is_finite() && self.sigma_l2 > 0.0) {
            return fail(format!("sigma_l2 must be positive, got {}", self.sigma_l2));
        }
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return fail(format!("alpha must be greater than 1, got {}", self.alpha));
        }
        if self.delta_db.is_nan() || self.delta_db == f64::NEG_INFINITY {
            return fail(format!(
                "delta_db must be a number or +inf, got {}",
                self.delta_db
            ));
        }
        Ok(())
    }

    pub fn with_n(mut self, n: usize) -> Result<Self> {
        self.n = n;
        self.validate().map(|_| self)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.mu = mu;
        self.validate().map(|_| self)
    }

    pub fn with_sigma_l2(mut self, sigma_l2: f64) -> Result<Self> {
        self.sigma_l2 = sigma_l2;
        self.validate().map(|_| self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate().map(|_| self)
    }

    pub fn with_delta_db(mut self, delta_db: f64) -> Result<Self> {
        self.delta_db = delta_db;
        self.validate().map(|_| self)
    }

    pub fn with_sample_model(mut self, sample_model: SampleModel) -> Self {
        self.sample_model = sample_model;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma_l2(&self) -> f64 {
        self.sigma_l2
    }

    pub fn sigma_h2(&self) -> f64 {
        self.alpha * self.sigma_l2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta_db(&self) -> f64 {
        self.delta_db
    }

    /// AWGN variance. Zero when `delta_db` is `+inf`.
    pub fn sigma_w2(&self) -> f64 {
        self.sigma_l2 / 10f64.powf(self.delta_db / 10.0)
    }

    pub fn sample_model(&self) -> SampleModel {
        self.sample_model
    }

    /// Transmit variance of a block in `state` (zero when silent).
    pub fn state_variance(&self, state: TernaryState) -> f64 {
        match state {
            TernaryState::S => 0.0,
            TernaryState::L => self.sigma_l2,
            TernaryState::H => self.sigma_h2(),
        }
    }
}

/// One transmitted interval: block 1 followed by block 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    samples: Vec<Complex64>,
    states: StatePair,
}

impl TxFrame {
    #[cfg(test)]
    pub(crate) fn from_parts(samples: Vec<Complex64>, states: StatePair) -> Self {
        TxFrame { samples, states }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn states(&self) -> StatePair {
        self.states
    }

    /// Block length `N`.
    pub fn block_len(&self) -> usize {
        self.samples.len() / 2
    }

    /// Samples of block `i` (0 or 1).
    pub fn block(&self, i: usize) -> &[Complex64] {
        let n = self.block_len();
        &self.samples[i * n..(i + 1) * n]
    }
}

/// Table lookup from bits to states.
pub fn map_bits_to_pair(bits: BitTriplet) -> StatePair {
    MAPPING[bits.index() as usize]
}

/// Inverse of [`map_bits_to_pair`].
pub fn map_pair_to_bits(pair: StatePair) -> BitTriplet {
    let index = MAPPING
        .iter()
        .position(|p| *p == pair)
        .expect("every constructible pair is in the mapping table");
    BitTriplet(index as u8)
}

/// Like [`map_pair_to_bits`] but from raw states, rejecting `(S, S)`.
pub fn map_states_to_bits(first: TernaryState, second: TernaryState) -> Result<BitTriplet> {
    StatePair::new(first, second).map(map_pair_to_bits)
}

/// Fills `out` with i.i.d. Gaussian samples of the given mean and total variance.
pub(crate) fn fill_gaussian<R: Rng + ?Sized>(
    out: &mut [Complex64],
    mean: f64,
    variance: f64,
    model: SampleModel,
    rng: &mut R,
) {
    match model {
        SampleModel::Circular => {
            let scale = (variance / 2.0).sqrt();
            for x in out.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *x = Complex64::new(mean + scale * re, scale * im);
            }
        }
        SampleModel::Real => {
            let scale = variance.sqrt();
            for x in out.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                *x = Complex64::new(mean + scale * re, 0.0);
            }
        }
    }
}

fn fill_block<R: Rng + ?Sized>(
    out: &mut [Complex64],
    state: TernaryState,
    cfg: &LinkConfig,
    rng: &mut R,
) {
    match state {
        TernaryState::S => out.fill(Complex64::new(0.0, 0.0)),
        active => fill_gaussian(
            out,
            cfg.mu,
            cfg.state_variance(active),
            cfg.sample_model,
            rng,
        ),
    }
}

/// Draws the `N` samples of one block.
pub fn generate_block<R: Rng + ?Sized>(
    state: TernaryState,
    cfg: &LinkConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.n];
    fill_block(&mut out, state, cfg, rng);
    out
}

pub fn modulate<R: Rng + ?Sized>(bits: BitTriplet, cfg: &LinkConfig, rng: &mut R) -> TxFrame {
    let states = map_bits_to_pair(bits);
    let n = cfg.n;
    let mut samples = vec![Complex64::new(0.0, 0.0); 2 * n];
    let (first, second) = samples.split_at_mut(n);
    fill_block(first, states.first, cfg, rng);
    fill_block(second, states.second, cfg, rng);
    TxFrame { samples, states }
}
